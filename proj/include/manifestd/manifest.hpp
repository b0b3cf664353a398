#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "manifestd/hash.hpp"

namespace manifestd {

// Scalar-or-string field value. Decimals are rendered with shortest
// round-trip formatting; non-finite values are rejected at construction.
using FieldValue = std::variant<std::string, std::int64_t, double, bool>;
using FieldMap = std::map<std::string, FieldValue>;

using ManifestDigest = Digest32;

// A tool-invocation request: user-visible fields, model-facing fields,
// freshness timestamp (ms since epoch) and the requested tool backend.
//
// The only way to build one is the checking constructor, so a Manifest with
// overlapping partitions, a zero timestamp or non-encodable values cannot
// exist.
class Manifest {
public:
    Manifest(FieldMap user_fields, FieldMap model_fields, std::uint64_t timestamp_ms,
             std::string tool_id);

    const FieldMap& user_fields() const { return user_; }
    const FieldMap& model_fields() const { return model_; }
    std::uint64_t timestamp() const { return timestamp_; }
    const std::string& tool_id() const { return tool_id_; }

    // Copy with a different timestamp; used by replay simulation.
    Manifest with_timestamp(std::uint64_t timestamp_ms) const;

    friend bool operator==(const Manifest&, const Manifest&) = default;

private:
    FieldMap user_;
    FieldMap model_;
    std::uint64_t timestamp_;
    std::string tool_id_;
};

// What a user is allowed to see of a manifest: everything except M_m.
struct UserView {
    FieldMap user_fields;
    std::uint64_t timestamp;
    std::string tool_id;

    friend bool operator==(const UserView&, const UserView&) = default;
};

struct EncodingStats {
    double entropy_bits;
    double redundancy;
};

// Deterministic UTF-8 text form:
//   {"user":{...},"model":{...},"timestamp":N,"tool_id":"..."}
// Keys sorted bytewise, no whitespace, control characters escaped.
std::string canonical_encode(const Manifest& m);

// Inverse of canonical_encode. Anything that is not byte-for-byte canonical
// is rejected with EncodingError; overlapping partitions raise
// DisjointnessViolation.
Manifest canonical_decode(std::string_view text);

ManifestDigest digest(const Manifest& m);

UserView redact_for_user(const Manifest& m);
std::string canonical_encode(const UserView& view);

// Shannon entropy of the byte histogram of the canonical encoding, with
// redundancy measured against the 8-bit maximum.
EncodingStats encoding_stats(const Manifest& m);
EncodingStats byte_entropy(std::span<const std::uint8_t> data);

// Manifest files hold one canonical manifest per line; a single-manifest
// file is the one-line case. Blank lines are ignored.
std::vector<Manifest> read_manifest_file(const std::filesystem::path& path);
std::string encode_batch(std::span<const Manifest> batch);

bool is_valid_utf8(std::string_view s);

}  // namespace manifestd
