#pragma once

#include <filesystem>
#include <string_view>

namespace manifestd::detail {

// Writes to a sibling temp file and renames over the target, so readers see
// either the old or the new content. Throws StorageError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace manifestd::detail
