#include "manifestd/pipeline.hpp"

#include <fstream>

#include <json.hpp>

#include "manifestd/error.hpp"

namespace manifestd::pipeline {

using nlohmann::json;

SignResult create_and_sign(const Manifest& m, const policy::PolicySet& ps, const keys::Keystore& ks,
                           const std::string& key_id, std::uint64_t now_ms) {
    SignResult out;
    const ManifestDigest d = digest(m);
    out.report = policy::evaluate(m, ps, now_ms);
    if (!out.report.passed) return out;
    Bytes sig = ks.sign(d, key_id);
    out.signed_manifest = keys::SignedManifest{m, d, std::move(sig), key_id};
    return out;
}

keys::VerifyResult verify_signed(const keys::SignedManifest& sm, const keys::Keystore& ks) {
    if (digest(sm.manifest) != sm.digest) return keys::VerifyResult::rejected(keys::RejectReason::signature_invalid);
    return ks.verify(sm.digest, sm.signature, sm.key_id);
}

LogResult verify_and_log(const keys::SignedManifest& sm, const keys::Keystore& ks, tlog::TransparencyLog& log,
                         std::uint64_t appended_at) {
    LogResult out;
    out.verdict = verify_signed(sm, ks);
    if (!out.verdict.accepted()) return out;
    out.receipt = log.append(sm.digest, sm.signature, sm.key_id, appended_at);
    return out;
}

std::string serialize_signed(const keys::SignedManifest& sm) {
    json j = json::object();
    j["manifest"] = canonical_encode(sm.manifest);
    j["digest"] = sm.digest.hex();
    j["signature"] = to_hex(sm.signature);
    j["key_id"] = sm.key_id;
    return j.dump();
}

keys::SignedManifest parse_signed(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw EncodingError(std::string("signed manifest is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw EncodingError("signed manifest must be an object");
    auto str = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw EncodingError(std::string("signed manifest missing '") + key + "'");
        return it->get<std::string>();
    };
    Manifest m = canonical_decode(str("manifest"));
    return keys::SignedManifest{std::move(m), Digest32::from_hex(str("digest")), from_hex(str("signature")),
                                str("key_id")};
}

std::vector<keys::SignedManifest> read_signed_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path.string());
    std::vector<keys::SignedManifest> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(parse_signed(line));
        } catch (const DisjointnessViolation& e) {
            throw DisjointnessViolation(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw EncodingError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string rejection_line(const policy::ComplianceReport& report) {
    std::string s = "rejected stage=policy severity=";
    s += policy::to_string(report.severity);
    for (const auto& f : report.failed_rules) {
        s += " rule=";
        s += f.rule_id;
        s += ":";
        s += policy::to_string(f.kind);
        s += ":";
        s += policy::to_string(f.severity);
    }
    return s;
}

std::string rejection_line(const keys::VerifyResult& verdict) {
    if (verdict.accepted()) return "accepted";
    return "rejected stage=verify reason=" + std::string(keys::to_string(*verdict.reject));
}

}  // namespace manifestd::pipeline
