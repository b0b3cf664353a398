#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "manifestd/keystore.hpp"
#include "manifestd/manifest.hpp"
#include "manifestd/policy.hpp"
#include "manifestd/transparency_log.hpp"

namespace manifestd::pipeline {

struct SignResult {
    std::optional<keys::SignedManifest> signed_manifest;  // empty when the policy blocked
    policy::ComplianceReport report;
};

// encode -> digest -> evaluate -> (stop | sign). A blocked manifest is
// returned without a signature; key failures throw UnknownKey / KeyRevoked.
SignResult create_and_sign(const Manifest& m, const policy::PolicySet& ps, const keys::Keystore& ks,
                           const std::string& key_id, std::uint64_t now_ms);

struct LogResult {
    keys::VerifyResult verdict;
    std::optional<tlog::AppendReceipt> receipt;  // set iff accepted
};

// Digest check against the carried manifest, then signature verification.
keys::VerifyResult verify_signed(const keys::SignedManifest& sm, const keys::Keystore& ks);

// Recomputes the digest from the carried manifest, verifies the signature and
// appends on success. A digest that does not match the manifest is treated
// as an invalid signature. StorageError propagates.
LogResult verify_and_log(const keys::SignedManifest& sm, const keys::Keystore& ks, tlog::TransparencyLog& log,
                         std::uint64_t appended_at);

// Signed manifest file: one JSON object per line with the canonical manifest
// text, digest hex, signature hex and key id.
std::string serialize_signed(const keys::SignedManifest& sm);
keys::SignedManifest parse_signed(std::string_view line);
std::vector<keys::SignedManifest> read_signed_file(const std::filesystem::path& path);

// Structured rejection line shared by the CLI and harness:
//   rejected stage=<policy|verify|key> reason=<...> [rule=<id>]...
std::string rejection_line(const policy::ComplianceReport& report);
std::string rejection_line(const keys::VerifyResult& verdict);

}  // namespace manifestd::pipeline
