#include "manifestd/hash.hpp"

#include <openssl/evp.h>

#include "manifestd/error.hpp"

namespace manifestd {

namespace {

// Fetched once; EVP_sha256() re-resolves the provider on every init.
const EVP_MD* sha256_md() {
    static EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
    return md;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string to_hex(std::span<const std::uint8_t> data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw EncodingError("odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = hex_value(hex[2 * i]);
        const int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw EncodingError("invalid hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

std::string Digest32::hex() const { return to_hex(bytes); }

Digest32 Digest32::from_hex(std::string_view hex) {
    const Bytes raw = manifestd::from_hex(hex);
    if (raw.size() != 32) throw EncodingError("digest must be 32 bytes");
    Digest32 d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex2(static_cast<EVP_MD_CTX*>(ctx_), sha256_md(), nullptr) != 1) {
        throw CryptoError("EVP_DigestInit_ex failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(std::span<const std::uint8_t> data) {
    if (!data.empty() && EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()) != 1) {
        throw CryptoError("EVP_DigestUpdate failed");
    }
    return *this;
}

Sha256& Sha256::update(std::string_view data) { return update(as_bytes(data)); }

Sha256& Sha256::update(std::uint8_t byte) { return update(std::span<const std::uint8_t>(&byte, 1)); }

Digest32 Sha256::finish() {
    Digest32 d;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.bytes.data(), &len) != 1 || len != 32) {
        throw CryptoError("EVP_DigestFinal_ex failed");
    }
    return d;
}

namespace {

struct ThreadCtx {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    ~ThreadCtx() { EVP_MD_CTX_free(ctx); }
};

}  // namespace

Digest32 sha256(std::span<const std::uint8_t> data) {
    thread_local ThreadCtx tc;
    Digest32 d;
    unsigned int len = 0;
    if (tc.ctx == nullptr || EVP_DigestInit_ex2(tc.ctx, sha256_md(), nullptr) != 1 ||
        EVP_DigestUpdate(tc.ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(tc.ctx, d.bytes.data(), &len) != 1) {
        throw CryptoError("SHA-256 failed");
    }
    return d;
}

Digest32 sha256(std::string_view data) { return sha256(as_bytes(data)); }

}  // namespace manifestd
