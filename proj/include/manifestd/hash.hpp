#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace manifestd {

using Bytes = std::vector<std::uint8_t>;

// 32-byte SHA-256 output.
struct Digest32 {
    std::array<std::uint8_t, 32> bytes{};

    friend bool operator==(const Digest32&, const Digest32&) = default;
    friend auto operator<=>(const Digest32&, const Digest32&) = default;

    std::string hex() const;
    static Digest32 from_hex(std::string_view hex);
};

// Incremental SHA-256 backed by OpenSSL EVP.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::uint8_t> data);
    Sha256& update(std::string_view data);
    Sha256& update(std::uint8_t byte);
    Digest32 finish();

private:
    void* ctx_;
};

Digest32 sha256(std::span<const std::uint8_t> data);
Digest32 sha256(std::string_view data);

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace manifestd
