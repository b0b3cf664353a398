#include "manifestd/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "atomic_file.hpp"
#include "manifestd/audit.hpp"
#include "manifestd/error.hpp"
#include "manifestd/harness.hpp"
#include "manifestd/keystore.hpp"
#include "manifestd/pipeline.hpp"
#include "manifestd/policy.hpp"
#include "manifestd/stats.hpp"
#include "manifestd/transparency_log.hpp"

namespace manifestd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 42;
    std::string policy_path;
    std::string keystore_path;
    std::string log_dir;
    std::string passphrase;
    int verbosity = 0;
};

std::uint64_t wall_now_ms() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count());
}

std::string passphrase(const Globals& g) {
    if (!g.passphrase.empty()) return g.passphrase;
    if (const char* env = std::getenv("MANIFESTD_PASSPHRASE"); env != nullptr && *env != '\0') return env;
    throw ConfigError("keystore passphrase required (--passphrase or MANIFESTD_PASSPHRASE)");
}

const std::string& require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
    return value;
}

keys::Keystore load_keystore(const Globals& g) {
    const auto& path = require(g.keystore_path, "--keystore");
    if (!fs::exists(path)) throw ConfigError("keystore " + path + " does not exist");
    return keys::Keystore::load(path, passphrase(g));
}

policy::PolicySet load_policy(const Globals& g) {
    return policy::load_policy(require(g.policy_path, "--policy"));
}

tlog::TransparencyLog open_log(const Globals& g) {
    const auto& dir = require(g.log_dir, "--log-dir");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw StorageError("cannot use log directory " + dir);
    return tlog::TransparencyLog::open(dir);
}

json handle_json(const keys::KeyHandle& h) {
    return {{"key_id", h.key_id},
            {"scheme", std::string(keys::to_string(h.scheme))},
            {"public_key", to_hex(h.public_key)},
            {"created_at", h.created_at},
            {"revoked", h.revoked}};
}

void emit(std::ostream& out, json j, const Globals& g) {
    j["seed"] = g.seed;
    out << j.dump() << '\n';
}

int cmd_key_gen(const Globals& g, const std::string& id, const std::string& scheme, std::ostream& out) {
    const auto& path = require(g.keystore_path, "--keystore");
    const auto pass = passphrase(g);
    const auto sch = keys::scheme_from_string(scheme);
    keys::Keystore ks = fs::exists(path) ? keys::Keystore::load(path, pass) : keys::Keystore(sch);
    const auto handle = ks.keygen(id, sch, wall_now_ms());
    ks.save(path, pass);
    emit(out, {{"event", "key-gen"}, {"key", handle_json(handle)}}, g);
    return kOk;
}

int cmd_key_revoke(const Globals& g, const std::string& id, std::ostream& out) {
    keys::Keystore ks = load_keystore(g);
    ks.revoke(id);
    ks.save(g.keystore_path, passphrase(g));
    emit(out, {{"event", "key-revoke"}, {"key_id", id}}, g);
    return kOk;
}

int cmd_key_list(const Globals& g, std::ostream& out) {
    const keys::Keystore ks = load_keystore(g);
    json list = json::array();
    for (const auto& h : ks.list()) list.push_back(handle_json(h));
    emit(out, {{"event", "key-list"}, {"keys", list}}, g);
    return kOk;
}

int cmd_sign(const Globals& g, const std::string& manifest_path, const std::string& key_id,
             const std::string& out_path, std::optional<std::uint64_t> now, std::ostream& out, std::ostream& err) {
    const policy::PolicySet ps = load_policy(g);
    const keys::Keystore ks = load_keystore(g);
    require(out_path, "--out");
    std::vector<Manifest> manifests;
    try {
        manifests = read_manifest_file(manifest_path);
    } catch (const DisjointnessViolation& e) {
        err << "rejected stage=decode reason=disjointness-violation detail=\"" << e.what() << "\"\n";
        return kPolicy;
    } catch (const EncodingError& e) {
        err << "rejected stage=decode reason=malformed-encoding detail=\"" << e.what() << "\"\n";
        return kPolicy;
    }
    const std::uint64_t t = now.value_or(wall_now_ms());
    std::string body;
    std::size_t n = 0;
    for (const auto& m : manifests) {
        pipeline::SignResult r;
        try {
            r = pipeline::create_and_sign(m, ps, ks, key_id, t);
        } catch (const KeyRevoked& e) {
            err << "rejected stage=key reason=key-revoked key_id=" << key_id << "\n";
            return kKey;
        } catch (const UnknownKey& e) {
            err << "rejected stage=key reason=unknown-key key_id=" << key_id << "\n";
            return kKey;
        }
        if (!r.signed_manifest) {
            err << pipeline::rejection_line(r.report) << " manifest=" << n << "\n";
            return kPolicy;
        }
        body += pipeline::serialize_signed(*r.signed_manifest) + "\n";
        emit(out,
             {{"event", "signed"},
              {"manifest", n},
              {"digest", r.signed_manifest->digest.hex()},
              {"key_id", key_id},
              {"severity", std::string(policy::to_string(r.report.severity))}},
             g);
        ++n;
    }
    detail::write_file_atomic(out_path, body);
    return kOk;
}

int cmd_verify_log(const Globals& g, const std::string& in_path, std::ostream& out, std::ostream& err) {
    const keys::Keystore ks = load_keystore(g);
    std::vector<keys::SignedManifest> items;
    try {
        items = pipeline::read_signed_file(in_path);
    } catch (const EncodingError& e) {
        err << "rejected stage=verify reason=malformed-encoding detail=\"" << e.what() << "\"\n";
        return kVerify;
    } catch (const DisjointnessViolation& e) {
        err << "rejected stage=verify reason=malformed-encoding detail=\"" << e.what() << "\"\n";
        return kVerify;
    }
    // All-or-nothing: one bad record means nothing from the file is logged.
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto v = pipeline::verify_signed(items[i], ks);
        if (!v.accepted()) {
            err << pipeline::rejection_line(v) << " record=" << i << " key_id=" << items[i].key_id << "\n";
            return kVerify;
        }
    }
    tlog::TransparencyLog log = open_log(g);
    const std::uint64_t now = wall_now_ms();
    for (const auto& sm : items) {
        const auto r = pipeline::verify_and_log(sm, ks, log, now);
        emit(out,
             {{"event", "logged"},
              {"index", r.receipt->index},
              {"tree_size", r.receipt->root.tree_size},
              {"root", r.receipt->root.hash.hex()},
              {"chain", r.receipt->chain.hex()}},
             g);
    }
    return kOk;
}

int cmd_log_verify(const Globals& g, std::ostream& out) {
    const auto rep = tlog::check_integrity(require(g.log_dir, "--log-dir"));
    json j{{"event", "log-verify"},
           {"ok", rep.ok},
           {"entries", rep.entries},
           {"checkpoints", rep.checkpoints},
           {"detail", rep.detail}};
    j["tampered_at"] = rep.tampered_at ? json(*rep.tampered_at) : json(nullptr);
    emit(out, j, g);
    return rep.ok ? kOk : kVerify;
}

int cmd_log_prove(const Globals& g, std::uint64_t index, std::optional<std::uint64_t> size, std::ostream& out) {
    const auto dir = require(g.log_dir, "--log-dir");
    if (!fs::exists(fs::path(dir) / tlog::kLogFileName)) throw StorageError("no log in " + dir);
    const tlog::TransparencyLog log = tlog::TransparencyLog::open(dir);
    const std::uint64_t n = size.value_or(log.size());
    const auto proof = log.prove_inclusion(index, n);
    const auto root = log.root_at(n);
    json path = json::array();
    for (const auto& s : proof.path) {
        path.push_back({{"sibling", s.sibling.hex()}, {"side", s.side == tlog::Side::left ? "left" : "right"}});
    }
    const auto leaf = log.leaf(index);
    emit(out,
         {{"event", "log-prove"},
          {"leaf_index", index},
          {"tree_size", n},
          {"leaf", leaf.hex()},
          {"root", root.hash.hex()},
          {"path", path},
          {"verified", tlog::verify_inclusion(leaf, proof, root)}},
         g);
    return kOk;
}

int cmd_log_stats(const Globals& g, std::ostream& out) {
    const auto dir = require(g.log_dir, "--log-dir");
    if (!fs::exists(fs::path(dir) / tlog::kLogFileName)) throw StorageError("no log in " + dir);
    const tlog::TransparencyLog log = tlog::TransparencyLog::open(dir);
    std::vector<std::uint64_t> marks;
    for (std::uint64_t n = 1; n <= log.size(); n *= 2) marks.push_back(n);
    if (log.size() > 0 && (marks.empty() || marks.back() != log.size())) marks.push_back(log.size());
    json growth = json::array();
    for (const auto& [n, b] : tlog::log_growth_series(log, marks)) growth.push_back({n, b});
    emit(out,
         {{"event", "log-stats"},
          {"entries", log.size()},
          {"storage_bytes", log.storage_bytes()},
          {"root", log.root().hash.hex()},
          {"chain", log.chain().hex()},
          {"growth", growth}},
         g);
    return kOk;
}

int cmd_audit(const Globals& g, double p, double f_a, std::uint64_t rounds, std::uint64_t from,
              std::optional<std::uint64_t> to, const std::string& out_path, std::ostream& out) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("--p must be in [0, 1]");
    if (!(f_a > 0.0)) throw ConfigError("--f-a must be positive");
    require(out_path, "--out");
    const auto dir = require(g.log_dir, "--log-dir");
    if (!fs::exists(fs::path(dir) / tlog::kLogFileName)) throw StorageError("no log in " + dir);
    const tlog::TransparencyLog log = tlog::TransparencyLog::open(dir);
    const std::uint64_t end = std::min(to.value_or(log.size()), log.size());
    if (from > end) throw ConfigError("--from is past --to");
    const tlog::MerkleRoot root = log.root();

    CounterRng rng(g.seed);
    std::string body;
    std::uint64_t audited = 0;
    for (std::uint64_t i = from; i < end; ++i) {
        if (!rng.bernoulli(p)) continue;
        // Simulated tool execution for the sampled entry: deterministic
        // output derived from the entry and the seed.
        audit::Stopwatch exec;
        CounterRng out_rng(g.seed, i + 1);
        Bytes output(256 + out_rng.below(768));
        for (auto& b : output) b = static_cast<std::uint8_t>(out_rng.next_u64());
        const double exec_ms = exec.elapsed_ms();
        audit::Stopwatch verify;
        const bool included = tlog::verify_inclusion(log.leaf(i), log.prove_inclusion(i, root.tree_size), root);
        const double verify_ms = verify.elapsed_ms();
        if (!included) throw StorageError("entry " + std::to_string(i) + " is not included under the log root");
        body += audit::serialize_evidence(audit::build_evidence(root, output, exec_ms, verify_ms, i)) + "\n";
        ++audited;
    }
    detail::write_file_atomic(out_path, body);
    json j{{"event", "audit"},
           {"range", {from, end}},
           {"audited", audited},
           {"p", p},
           {"f_a", f_a},
           {"rounds", rounds},
           {"root", root.hash.hex()},
           {"tree_size", root.tree_size}};
    if (p > 0) {
        j["undetected_probability"] = audit::undetected_probability(p, rounds);
        j["expected_detection_latency_s"] = audit::expected_detection_latency(p, f_a);
    }
    emit(out, j, g);
    return kOk;
}

struct BenchArgs {
    std::string config;
    std::string out;
    std::vector<std::uint64_t> sizes;
    std::optional<double> invalid_fraction;
    std::optional<std::size_t> workers;
};

int cmd_bench(const Globals& g, bool seed_given, const BenchArgs& a, std::ostream& out) {
    harness::WorkloadConfig cfg = a.config.empty() ? harness::WorkloadConfig{} : harness::load_workload(a.config);
    if (seed_given) cfg.seed = g.seed;
    if (!a.sizes.empty()) {
        cfg.sizes = a.sizes;
        if (cfg.revoke_at_scale && *cfg.revoke_at_scale >= cfg.sizes.size()) cfg.revoke_at_scale = cfg.sizes.size() - 1;
    }
    if (a.invalid_fraction) cfg.invalid_fraction = *a.invalid_fraction;
    if (a.workers) cfg.workers = *a.workers;
    if (!g.policy_path.empty()) cfg.policy_path = g.policy_path;
    cfg.validate();
    require(a.out, "--out");

    harness::RunResult r;
    if (!g.log_dir.empty()) {
        keys::Keystore ks(cfg.scheme);
        for (const auto& id : cfg.key_ids) ks.keygen(id, cfg.scheme, cfg.base_time_ms);
        const auto ps = cfg.policy_path.empty() ? harness::default_policy(cfg.epoch_ms)
                                                : policy::load_policy(cfg.policy_path);
        tlog::TransparencyLog log = open_log(g);
        r = harness::run_pipeline(cfg, ps, ks, log);
    } else {
        r = harness::run_pipeline(cfg);
    }
    harness::write_run_outputs(r, a.out);

    std::vector<std::string> backend_ids;
    for (const auto& b : cfg.backends) backend_ids.push_back(b.backend_id);
    auto report = stats::compute_report(r.outcomes, r.log_growth, backend_ids, cfg.key_ids);
    report.seed = cfg.seed;
    detail::write_file_atomic(fs::path(a.out) / "stats.json", stats::to_json(report));

    json scales = json::array();
    for (const auto& s : r.scales) {
        scales.push_back({{"scale", s.scale}, {"successes", s.successes}, {"failures", s.failures}, {"delta", s.delta}});
    }
    json j{{"event", "bench"}, {"out", a.out}, {"scales", scales}, {"total_wall_ms", r.total_wall_ms}};
    j["seed"] = cfg.seed;
    out << j.dump() << '\n';
    return kOk;
}

int cmd_stats(const Globals& g, const std::string& in_path, const std::string& out_path,
              const std::string& growth_path, std::ostream& out) {
    std::ifstream in(require(in_path, "--in"), std::ios::binary);
    if (!in) throw StorageError("cannot read " + in_path);
    const auto outcomes = read_outcomes_csv(in, in_path);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> growth;
    if (!growth_path.empty()) {
        std::ifstream gin(growth_path, std::ios::binary);
        if (!gin) throw StorageError("cannot read " + growth_path);
        growth = stats::read_log_growth_csv(gin);
    }
    auto report = stats::compute_report(outcomes, growth);
    report.seed = g.seed;
    detail::write_file_atomic(require(out_path, "--out"), stats::to_json(report));
    emit(out, {{"event", "stats"}, {"out", out_path}, {"outcomes", outcomes.size()}}, g);
    return kOk;
}

int classify(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kConfig;
    if (dynamic_cast<const UnknownKey*>(&e) != nullptr || dynamic_cast<const KeyRevoked*>(&e) != nullptr ||
        dynamic_cast<const DuplicateKeyId*>(&e) != nullptr || dynamic_cast<const NoUsableKey*>(&e) != nullptr ||
        dynamic_cast<const CryptoError*>(&e) != nullptr) {
        return kKey;
    }
    if (dynamic_cast<const StorageError*>(&e) != nullptr) return kStorage;
    return kConfig;
}

std::string error_tag(int code) {
    switch (code) {
        case kKey: return "key";
        case kStorage: return "storage";
        case kPolicy: return "policy";
        case kVerify: return "verify";
        default: return "config";
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"manifestd: signed tool manifests, transparency log, audits and benchmarks", "manifestd"};
    app.require_subcommand(1);
    // A repeated global option overrides the earlier one.
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Seed recorded in every output")->capture_default_str();
    app.add_option("--policy", g.policy_path, "Policy file (YAML)");
    app.add_option("--keystore", g.keystore_path, "Keystore file");
    app.add_option("--log-dir", g.log_dir, "Transparency log directory")->envname("MANIFESTD_LOG_DIR");
    app.add_option("--passphrase", g.passphrase, "Keystore passphrase (or MANIFESTD_PASSPHRASE)");
    app.add_flag("-v,--verbose", g.verbosity, "More output on stderr");

    std::string key_id, scheme = "ecdsa-p256";
    auto* key_gen = app.add_subcommand("key-gen", "Generate a signing key");
    key_gen->add_option("--id", key_id, "Key id")->required();
    key_gen->add_option("--scheme", scheme, "ecdsa-p256 or ed25519")->capture_default_str();

    auto* key_revoke = app.add_subcommand("key-revoke", "Revoke a key");
    key_revoke->add_option("--id", key_id, "Key id")->required();

    auto* key_list = app.add_subcommand("key-list", "List keys");

    std::string manifest_path, out_path;
    std::optional<std::uint64_t> now;
    auto* sign = app.add_subcommand("sign", "Encode, check policy and sign manifests");
    sign->add_option("--manifest", manifest_path, "Manifest file (one canonical manifest per line)")->required();
    sign->add_option("--key", key_id, "Signing key id")->required();
    sign->add_option("--out", out_path, "Signed manifest output file")->required();
    sign->add_option("--now", now, "Evaluation time in ms since epoch (default: wall clock)");

    std::string in_path;
    auto* verify_log = app.add_subcommand("verify-log", "Verify signed manifests and append them to the log");
    verify_log->add_option("--in", in_path, "Signed manifest file")->required();

    auto* log_verify = app.add_subcommand("log-verify", "Check log integrity against its checkpoints");

    std::uint64_t index = 0;
    std::optional<std::uint64_t> size;
    auto* log_prove = app.add_subcommand("log-prove", "Inclusion proof for one entry");
    log_prove->add_option("--index", index, "Entry index")->required();
    log_prove->add_option("--size", size, "Tree size (default: current)");

    auto* log_stats = app.add_subcommand("log-stats", "Log size, root and growth series");

    double p = 1.0, f_a = 1.0;
    std::uint64_t rounds = 1, from = 0;
    std::optional<std::uint64_t> to;
    auto* audit_cmd = app.add_subcommand("audit", "Bernoulli audit over a log range");
    audit_cmd->add_option("--p", p, "Detection probability")->capture_default_str();
    audit_cmd->add_option("--f-a", f_a, "Audit frequency per second")->capture_default_str();
    audit_cmd->add_option("--rounds", rounds, "Audit rounds n")->capture_default_str();
    audit_cmd->add_option("--from", from, "First entry index")->capture_default_str();
    audit_cmd->add_option("--to", to, "One past the last entry index");
    audit_cmd->add_option("--out", out_path, "Evidence output file")->required();

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Run the workload ladder");
    bench->add_option("--config", bench_args.config, "Workload config (YAML)");
    bench->add_option("--out", bench_args.out, "Report directory")->required();
    bench->add_option("--sizes", bench_args.sizes, "Override ladder sizes")->delimiter(',');
    bench->add_option("--invalid-fraction", bench_args.invalid_fraction, "Override invalid fraction");
    bench->add_option("--workers", bench_args.workers, "Worker threads");

    std::string growth_path;
    auto* stats_cmd = app.add_subcommand("stats", "Statistics from an outcomes file");
    stats_cmd->add_option("--in", in_path, "outcomes.csv")->required();
    stats_cmd->add_option("--out", out_path, "stats.json")->required();
    stats_cmd->add_option("--log-growth", growth_path, "log_growth.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*key_gen) return cmd_key_gen(g, key_id, scheme, out);
        if (*key_revoke) return cmd_key_revoke(g, key_id, out);
        if (*key_list) return cmd_key_list(g, out);
        if (*sign) return cmd_sign(g, manifest_path, key_id, out_path, now, out, err);
        if (*verify_log) return cmd_verify_log(g, in_path, out, err);
        if (*log_verify) return cmd_log_verify(g, out);
        if (*log_prove) return cmd_log_prove(g, index, size, out);
        if (*log_stats) return cmd_log_stats(g, out);
        if (*audit_cmd) return cmd_audit(g, p, f_a, rounds, from, to, out_path, out);
        if (*bench) return cmd_bench(g, seed_opt->count() > 0, bench_args, out);
        if (*stats_cmd) return cmd_stats(g, in_path, out_path, growth_path, out);
    } catch (const Error& e) {
        const int code = classify(e);
        err << "error class=" << error_tag(code) << " detail=\"" << e.what() << "\"\n";
        return code;
    } catch (const std::exception& e) {
        err << "error class=config detail=\"" << e.what() << "\"\n";
        return kConfig;
    }
    return kConfig;
}

}  // namespace manifestd::cli
