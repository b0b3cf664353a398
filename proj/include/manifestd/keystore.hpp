#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "manifestd/hash.hpp"
#include "manifestd/manifest.hpp"
#include "manifestd/rng.hpp"

namespace manifestd::keys {

enum class Scheme { ecdsa_p256, ed25519 };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);

// Public view of a key. Private material has no public accessor anywhere in
// this API.
struct KeyHandle {
    std::string key_id;
    Scheme scheme;
    Bytes public_key;  // DER SubjectPublicKeyInfo
    std::uint64_t created_at;
    bool revoked;
};

struct SignedManifest {
    Manifest manifest;
    ManifestDigest digest;
    Bytes signature;
    std::string key_id;
};

enum class RejectReason { signature_invalid, key_revoked, unknown_key };

std::string_view to_string(RejectReason r);

struct VerifyResult {
    std::optional<RejectReason> reject;

    bool accepted() const { return !reject.has_value(); }
    explicit operator bool() const { return accepted(); }

    static VerifyResult accept() { return {}; }
    static VerifyResult rejected(RejectReason r) { return {r}; }

    friend bool operator==(const VerifyResult&, const VerifyResult&) = default;
};

// In-process stand-in for an HSM: keys are generated inside, used inside,
// and only ever leave encrypted through save().
//
// Thread-safe. sign() and revoke() are serialized so that a sign call that
// starts after revoke() has returned always observes the revocation.
class Keystore {
public:
    explicit Keystore(Scheme default_scheme = Scheme::ecdsa_p256);
    ~Keystore();
    Keystore(Keystore&&) noexcept;
    Keystore& operator=(Keystore&&) noexcept;
    Keystore(const Keystore&) = delete;
    Keystore& operator=(const Keystore&) = delete;

    // Throws DuplicateKeyId.
    KeyHandle keygen(const std::string& key_id);
    KeyHandle keygen(const std::string& key_id, Scheme scheme, std::uint64_t created_at_ms);

    // Throws UnknownKey or KeyRevoked.
    Bytes sign(const ManifestDigest& digest, const std::string& key_id) const;

    // Never throws on bad input; rejection is a value.
    VerifyResult verify(const ManifestDigest& digest, std::span<const std::uint8_t> signature,
                        const std::string& key_id) const;

    // Throws UnknownKey. Idempotent for already revoked keys.
    void revoke(const std::string& key_id);

    std::vector<KeyHandle> list() const;
    std::optional<KeyHandle> find(const std::string& key_id) const;
    bool usable(const std::string& key_id) const;

    // Keystore file: JSON with key_id, scheme, public key hex, revocation
    // flag and AES-256-GCM encrypted private key (PBKDF2-SHA256 key
    // derivation). Written atomically.
    void save(const std::filesystem::path& path, std::string_view passphrase) const;
    static Keystore load(const std::filesystem::path& path, std::string_view passphrase);

    // Re-reads revocation flags from a keystore file written by another
    // process. Keys are never un-revoked.
    void reload_revocations(const std::filesystem::path& path);

    void set_kdf_iterations(std::uint32_t iterations);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// P(k_j) = 1/K + epsilon_j over a fixed key list.
class RotationPolicy {
public:
    // Epsilon defaults to all zeros. Throws DomainError unless the offsets sum
    // to zero and every probability lands in [0, 1].
    explicit RotationPolicy(std::vector<std::string> key_ids, std::vector<double> epsilon = {});

    const std::vector<std::string>& key_ids() const { return key_ids_; }
    const std::vector<double>& epsilon() const { return epsilon_; }
    std::vector<double> probabilities() const;

private:
    std::vector<std::string> key_ids_;
    std::vector<double> epsilon_;
};

// Samples a key with probability 1/K + epsilon_j, renormalized over the keys
// for which usable[j] is true. Throws NoUsableKey when none remain.
std::size_t select_key_index(const RotationPolicy& rp, const std::vector<bool>& usable, CounterRng& rng);

std::string select_key(const RotationPolicy& rp, const Keystore& keystore, CounterRng& rng);

}  // namespace manifestd::keys
