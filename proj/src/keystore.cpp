#include "manifestd/keystore.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/x509.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <sstream>

#include <json.hpp>

#include "atomic_file.hpp"
#include "manifestd/error.hpp"

namespace manifestd::keys {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

constexpr std::size_t kSaltLen = 16;
constexpr std::size_t kNonceLen = 12;
constexpr std::size_t kTagLen = 16;
constexpr std::uint32_t kDefaultKdfIterations = 100000;

std::uint64_t wall_ms() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count());
}

PkeyPtr generate(Scheme scheme) {
    PkeyCtxPtr ctx(scheme == Scheme::ed25519 ? EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr)
                                             : EVP_PKEY_CTX_new_id(EVP_PKEY_EC, nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1) throw CryptoError("keygen init failed");
    if (scheme == Scheme::ecdsa_p256 &&
        EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.get(), NID_X9_62_prime256v1) != 1) {
        throw CryptoError("cannot select P-256");
    }
    EVP_PKEY* raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) != 1) throw CryptoError("keygen failed");
    return PkeyPtr(raw);
}

Bytes public_der(EVP_PKEY* key) {
    const int len = i2d_PUBKEY(key, nullptr);
    if (len <= 0) throw CryptoError("public key encoding failed");
    Bytes out(static_cast<std::size_t>(len));
    unsigned char* p = out.data();
    i2d_PUBKEY(key, &p);
    return out;
}

Bytes private_der(EVP_PKEY* key) {
    const int len = i2d_PrivateKey(key, nullptr);
    if (len <= 0) throw CryptoError("private key encoding failed");
    Bytes out(static_cast<std::size_t>(len));
    unsigned char* p = out.data();
    i2d_PrivateKey(key, &p);
    return out;
}

PkeyPtr private_from_der(std::span<const std::uint8_t> der) {
    const unsigned char* p = der.data();
    EVP_PKEY* raw = d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der.size()));
    if (raw == nullptr) throw CryptoError("cannot decode private key");
    return PkeyPtr(raw);
}

Bytes random_bytes(std::size_t n) {
    Bytes out(n);
    if (RAND_bytes(out.data(), static_cast<int>(n)) != 1) throw CryptoError("RAND_bytes failed");
    return out;
}

std::array<std::uint8_t, 32> derive_key(std::string_view passphrase, std::span<const std::uint8_t> salt,
                                        std::uint32_t iterations) {
    std::array<std::uint8_t, 32> key{};
    if (PKCS5_PBKDF2_HMAC(passphrase.data(), static_cast<int>(passphrase.size()), salt.data(),
                          static_cast<int>(salt.size()), static_cast<int>(iterations), EVP_sha256(),
                          static_cast<int>(key.size()), key.data()) != 1) {
        throw CryptoError("key derivation failed");
    }
    return key;
}

Bytes seal(std::span<const std::uint8_t, 32> key, std::span<const std::uint8_t> nonce,
           std::span<const std::uint8_t> plaintext, std::string_view aad) {
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    int len = 0;
    Bytes out(plaintext.size() + kTagLen);
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()), nullptr) != 1 ||
        EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1 ||
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, reinterpret_cast<const unsigned char*>(aad.data()),
                          static_cast<int>(aad.size())) != 1 ||
        EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1 ||
        EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &len) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kTagLen, out.data() + plaintext.size()) != 1) {
        throw CryptoError("private key encryption failed");
    }
    return out;
}

Bytes open_sealed(std::span<const std::uint8_t, 32> key, std::span<const std::uint8_t> nonce,
                  std::span<const std::uint8_t> sealed, std::string_view aad) {
    if (sealed.size() < kTagLen) throw CryptoError("sealed private key too short");
    const std::size_t n = sealed.size() - kTagLen;
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    int len = 0;
    Bytes out(n);
    Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(n), sealed.end());
    if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()), nullptr) != 1 ||
        EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1 ||
        EVP_DecryptUpdate(ctx.get(), nullptr, &len, reinterpret_cast<const unsigned char*>(aad.data()),
                          static_cast<int>(aad.size())) != 1 ||
        EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data(), static_cast<int>(n)) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kTagLen, tag.data()) != 1 ||
        EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &len) != 1) {
        throw CryptoError("cannot decrypt private key (wrong passphrase or corrupted keystore)");
    }
    return out;
}

}  // namespace

std::string_view to_string(Scheme s) { return s == Scheme::ed25519 ? "ed25519" : "ecdsa-p256"; }

Scheme scheme_from_string(std::string_view s) {
    if (s == "ecdsa-p256") return Scheme::ecdsa_p256;
    if (s == "ed25519") return Scheme::ed25519;
    throw ConfigError("unknown signature scheme '" + std::string(s) + "'");
}

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::signature_invalid: return "signature-invalid";
        case RejectReason::key_revoked: return "key-revoked";
        case RejectReason::unknown_key: return "unknown-key";
    }
    return "signature-invalid";
}

struct Keystore::Impl {
    struct Entry {
        KeyHandle handle;
        PkeyPtr key;
    };

    Scheme default_scheme;
    std::uint32_t kdf_iterations = kDefaultKdfIterations;
    mutable std::shared_mutex mu;
    // Turnstile so a pending revoke is not starved by a stream of signers.
    mutable std::mutex gate;

    std::unique_lock<std::shared_mutex> write_lock() const {
        std::lock_guard g(gate);
        return std::unique_lock(mu);
    }
    std::shared_lock<std::shared_mutex> read_lock() const {
        { std::lock_guard g(gate); }
        return std::shared_lock(mu);
    }
    std::map<std::string, Entry> keys;
};

Keystore::Keystore(Scheme default_scheme) : impl_(std::make_unique<Impl>()) {
    impl_->default_scheme = default_scheme;
}

Keystore::~Keystore() = default;
Keystore::Keystore(Keystore&&) noexcept = default;
Keystore& Keystore::operator=(Keystore&&) noexcept = default;

void Keystore::set_kdf_iterations(std::uint32_t iterations) { impl_->kdf_iterations = std::max(1u, iterations); }

KeyHandle Keystore::keygen(const std::string& key_id) { return keygen(key_id, impl_->default_scheme, wall_ms()); }

KeyHandle Keystore::keygen(const std::string& key_id, Scheme scheme, std::uint64_t created_at_ms) {
    if (key_id.empty()) throw DomainError("key id must be nonempty");
    PkeyPtr key = generate(scheme);
    KeyHandle handle{key_id, scheme, public_der(key.get()), created_at_ms, false};
    auto lock = impl_->write_lock();
    if (impl_->keys.contains(key_id)) throw DuplicateKeyId("key '" + key_id + "' already exists");
    impl_->keys.emplace(key_id, Impl::Entry{handle, std::move(key)});
    return handle;
}

Bytes Keystore::sign(const ManifestDigest& digest, const std::string& key_id) const {
    auto lock = impl_->read_lock();
    auto it = impl_->keys.find(key_id);
    if (it == impl_->keys.end()) throw UnknownKey("unknown key '" + key_id + "'");
    if (it->second.handle.revoked) throw KeyRevoked("key '" + key_id + "' is revoked");
    EVP_PKEY* key = it->second.key.get();

    if (it->second.handle.scheme == Scheme::ed25519) {
        MdCtxPtr ctx(EVP_MD_CTX_new());
        std::size_t len = 64;
        Bytes sig(len);
        if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key) != 1 ||
            EVP_DigestSign(ctx.get(), sig.data(), &len, digest.bytes.data(), digest.bytes.size()) != 1) {
            throw CryptoError("ed25519 signing failed");
        }
        sig.resize(len);
        return sig;
    }

    PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key, nullptr));
    std::size_t len = 0;
    if (!ctx || EVP_PKEY_sign_init(ctx.get()) != 1 ||
        EVP_PKEY_sign(ctx.get(), nullptr, &len, digest.bytes.data(), digest.bytes.size()) != 1) {
        throw CryptoError("ecdsa signing init failed");
    }
    Bytes sig(len);
    if (EVP_PKEY_sign(ctx.get(), sig.data(), &len, digest.bytes.data(), digest.bytes.size()) != 1) {
        throw CryptoError("ecdsa signing failed");
    }
    sig.resize(len);
    return sig;
}

VerifyResult Keystore::verify(const ManifestDigest& digest, std::span<const std::uint8_t> signature,
                              const std::string& key_id) const {
    auto lock = impl_->read_lock();
    auto it = impl_->keys.find(key_id);
    if (it == impl_->keys.end()) return VerifyResult::rejected(RejectReason::unknown_key);
    if (it->second.handle.revoked) return VerifyResult::rejected(RejectReason::key_revoked);
    EVP_PKEY* key = it->second.key.get();

    int rc = 0;
    if (it->second.handle.scheme == Scheme::ed25519) {
        MdCtxPtr ctx(EVP_MD_CTX_new());
        if (ctx && EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key) == 1) {
            rc = EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), digest.bytes.data(),
                                  digest.bytes.size());
        }
    } else {
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key, nullptr));
        if (ctx && EVP_PKEY_verify_init(ctx.get()) == 1) {
            rc = EVP_PKEY_verify(ctx.get(), signature.data(), signature.size(), digest.bytes.data(),
                                 digest.bytes.size());
        }
    }
    return rc == 1 ? VerifyResult::accept() : VerifyResult::rejected(RejectReason::signature_invalid);
}

void Keystore::revoke(const std::string& key_id) {
    auto lock = impl_->write_lock();
    auto it = impl_->keys.find(key_id);
    if (it == impl_->keys.end()) throw UnknownKey("unknown key '" + key_id + "'");
    it->second.handle.revoked = true;
}

std::vector<KeyHandle> Keystore::list() const {
    auto lock = impl_->read_lock();
    std::vector<KeyHandle> out;
    for (const auto& [_, e] : impl_->keys) out.push_back(e.handle);
    return out;
}

std::optional<KeyHandle> Keystore::find(const std::string& key_id) const {
    auto lock = impl_->read_lock();
    auto it = impl_->keys.find(key_id);
    if (it == impl_->keys.end()) return std::nullopt;
    return it->second.handle;
}

bool Keystore::usable(const std::string& key_id) const {
    auto h = find(key_id);
    return h && !h->revoked;
}

void Keystore::save(const std::filesystem::path& path, std::string_view passphrase) const {
    const Bytes salt = random_bytes(kSaltLen);
    const auto kek = derive_key(passphrase, salt, impl_->kdf_iterations);

    nlohmann::json doc;
    doc["version"] = 1;
    doc["kdf"] = {{"algorithm", "pbkdf2-sha256"}, {"salt", to_hex(salt)}, {"iterations", impl_->kdf_iterations}};
    doc["keys"] = nlohmann::json::array();
    {
        auto lock = impl_->read_lock();
        for (const auto& [id, e] : impl_->keys) {
            const Bytes nonce = random_bytes(kNonceLen);
            const Bytes sealed = seal(kek, nonce, private_der(e.key.get()), id);
            doc["keys"].push_back({{"key_id", id},
                                   {"scheme", to_string(e.handle.scheme)},
                                   {"public_key", to_hex(e.handle.public_key)},
                                   {"created_at", e.handle.created_at},
                                   {"revoked", e.handle.revoked},
                                   {"nonce", to_hex(nonce)},
                                   {"private_key", to_hex(sealed)}});
        }
    }
    detail::write_file_atomic(path, doc.dump(2) + "\n");
}

namespace {

nlohmann::json read_keystore_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open keystore " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw StorageError("malformed keystore " + path.string() + ": " + e.what());
    }
}

}  // namespace

Keystore Keystore::load(const std::filesystem::path& path, std::string_view passphrase) {
    const nlohmann::json doc = read_keystore_json(path);
    Keystore ks;
    try {
        const Bytes salt = from_hex(doc.at("kdf").at("salt").get<std::string>());
        const auto iterations = doc.at("kdf").at("iterations").get<std::uint32_t>();
        ks.impl_->kdf_iterations = iterations;
        const auto kek = derive_key(passphrase, salt, iterations);
        for (const auto& k : doc.at("keys")) {
            const auto id = k.at("key_id").get<std::string>();
            const Bytes der = open_sealed(kek, from_hex(k.at("nonce").get<std::string>()),
                                          from_hex(k.at("private_key").get<std::string>()), id);
            PkeyPtr key = private_from_der(der);
            KeyHandle handle{id, scheme_from_string(k.at("scheme").get<std::string>()), public_der(key.get()),
                             k.at("created_at").get<std::uint64_t>(), k.at("revoked").get<bool>()};
            if (to_hex(handle.public_key) != k.at("public_key").get<std::string>()) {
                throw CryptoError("public key mismatch for '" + id + "'");
            }
            if (ks.impl_->keys.contains(id)) throw DuplicateKeyId("duplicate key '" + id + "' in keystore");
            ks.impl_->keys.emplace(id, Impl::Entry{std::move(handle), std::move(key)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw StorageError("malformed keystore " + path.string() + ": " + e.what());
    } catch (const EncodingError& e) {
        throw StorageError("malformed keystore " + path.string() + ": " + e.what());
    }
    return ks;
}

void Keystore::reload_revocations(const std::filesystem::path& path) {
    const nlohmann::json doc = read_keystore_json(path);
    auto lock = impl_->write_lock();
    for (const auto& k : doc.value("keys", nlohmann::json::array())) {
        if (!k.value("revoked", false)) continue;
        auto it = impl_->keys.find(k.value("key_id", std::string{}));
        if (it != impl_->keys.end()) it->second.handle.revoked = true;
    }
}

RotationPolicy::RotationPolicy(std::vector<std::string> key_ids, std::vector<double> epsilon)
    : key_ids_(std::move(key_ids)), epsilon_(std::move(epsilon)) {
    if (key_ids_.empty()) throw DomainError("rotation policy needs at least one key");
    if (epsilon_.empty()) epsilon_.assign(key_ids_.size(), 0.0);
    if (epsilon_.size() != key_ids_.size()) throw DomainError("one epsilon offset per key");
    const double sum = std::accumulate(epsilon_.begin(), epsilon_.end(), 0.0);
    if (!(std::abs(sum) <= 1e-9)) throw DomainError("epsilon offsets must sum to zero");
    const double base = 1.0 / static_cast<double>(key_ids_.size());
    for (double e : epsilon_) {
        const double p = base + e;
        if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) throw DomainError("rotation probability outside [0, 1]");
    }
}

std::vector<double> RotationPolicy::probabilities() const {
    const double base = 1.0 / static_cast<double>(key_ids_.size());
    std::vector<double> p(key_ids_.size());
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::clamp(base + epsilon_[j], 0.0, 1.0);
    return p;
}

std::size_t select_key_index(const RotationPolicy& rp, const std::vector<bool>& usable, CounterRng& rng) {
    const auto probs = rp.probabilities();
    if (usable.size() != probs.size()) throw DomainError("usable mask size mismatch");
    double total = 0.0;
    std::size_t last = probs.size();
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (usable[j] && probs[j] > 0.0) {
            total += probs[j];
            last = j;
        }
    }
    if (last == probs.size()) throw NoUsableKey("no unrevoked key with nonzero rotation weight");
    double u = rng.uniform() * total;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (!usable[j] || probs[j] <= 0.0) continue;
        if (u < probs[j]) return j;
        u -= probs[j];
    }
    return last;
}

std::string select_key(const RotationPolicy& rp, const Keystore& keystore, CounterRng& rng) {
    std::vector<bool> usable;
    usable.reserve(rp.key_ids().size());
    for (const auto& id : rp.key_ids()) usable.push_back(keystore.usable(id));
    return rp.key_ids()[select_key_index(rp, usable, rng)];
}

}  // namespace manifestd::keys
