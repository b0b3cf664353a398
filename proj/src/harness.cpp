#include "manifestd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "atomic_file.hpp"
#include "manifestd/error.hpp"
#include "manifestd/pipeline.hpp"
#include "yaml_util.hpp"

namespace manifestd::harness {

using nlohmann::json;

namespace {

// Per-request random streams, so results do not depend on worker count or
// on processing order.
enum Purpose : std::uint64_t {
    kGenerate = 1,
    kKey = 2,
    kTamper = 3,
    kLatency = 4,
    kOutput = 5,
    kAudit = 6,
    kJitter = 7,
};

CounterRng stream(const WorkloadConfig& cfg, Purpose p, std::size_t scale_idx, std::uint64_t i) {
    return CounterRng(cfg.seed, (static_cast<std::uint64_t>(p) << 56) |
                                    (static_cast<std::uint64_t>(scale_idx) << 40) | i);
}

constexpr std::array<std::string_view, 3> kTools{"search", "calculator", "code-exec"};
constexpr std::array<std::string_view, 4> kPrompts{
    "You are a careful assistant.",
    "Answer using the tool output only.",
    "Summarize the result in one paragraph.",
    "Return structured JSON.",
};
constexpr double kMsPerOutputByte = 0.002;
constexpr double kWarnTokensProbability = 0.15;

std::string hex_token(CounterRng& rng, std::size_t chars) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(chars);
    for (std::size_t i = 0; i < chars; ++i) s.push_back(digits[rng.below(16)]);
    return s;
}

Manifest make_valid(CounterRng& rng, std::uint64_t now) {
    FieldMap user;
    user["query"] = "q-" + hex_token(rng, 16);
    user["max_tokens"] = static_cast<std::int64_t>(rng.bernoulli(kWarnTokensProbability) ? 2049 + rng.below(2048)
                                                                                          : 16 + rng.below(2033));
    user["temperature"] = std::round(rng.uniform(0.0, 1.5) * 100.0) / 100.0;
    FieldMap model;
    model["system_prompt"] = std::string(kPrompts[rng.below(kPrompts.size())]);
    model["context_id"] = "ctx-" + hex_token(rng, 8);
    const std::string tool(kTools[rng.below(kTools.size())]);
    const std::uint64_t ts = now - rng.below(30000);
    return Manifest(std::move(user), std::move(model), ts, tool);
}

std::string corrupt(std::string text, int variant) {
    switch (variant) {
        case 1:
            text.resize(text.size() / 2);
            break;
        case 2:
            text.insert(1, " ");
            break;
        case 3: {
            const std::string head = "{\"user\":{";
            text.insert(head.size(), "\"context_id\":\"ctx-00000000\",");
            break;
        }
        default: {
            const auto pos = text.find("\"q-");
            text.insert(pos == std::string::npos ? 1 : pos + 3, "\xff");
            break;
        }
    }
    return text;
}

std::vector<std::uint64_t> largest_remainder(const std::map<AttackKind, double>& mix, std::uint64_t total) {
    std::vector<std::uint64_t> counts(4, 0);
    double sum = 0;
    for (const auto& [k, w] : mix) sum += w;
    if (total == 0 || sum <= 0) return counts;
    std::vector<std::pair<double, std::size_t>> rema;
    std::uint64_t assigned = 0;
    for (const auto& [k, w] : mix) {
        const double exact = static_cast<double>(total) * w / sum;
        const auto idx = static_cast<std::size_t>(k);
        counts[idx] = static_cast<std::uint64_t>(std::floor(exact));
        assigned += counts[idx];
        rema.emplace_back(exact - std::floor(exact), idx);
    }
    std::stable_sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++counts[rema[j % rema.size()].second];
    return counts;
}

double latency_sample(const LatencyModel& m, std::uint64_t calls, CounterRng& rng) {
    return m.base_ms + m.spread_ms * rng.uniform() +
           m.init_overhead_ms * std::exp(-static_cast<double>(calls) / 100.0);
}

Bytes synth_output(const OutputSizeModel& m, std::uint64_t scale, CounterRng& rng) {
    const double sd = 0.25 * m.mean_bytes * std::sqrt(std::exp(-m.decay_rate * static_cast<double>(scale) / 1000.0));
    const double size = std::max(1.0, std::round(m.mean_bytes + sd * rng.normal()));
    Bytes out(static_cast<std::size_t>(size));
    for (std::size_t i = 0; i < out.size(); i += 8) {
        std::uint64_t x = rng.next_u64();
        for (std::size_t b = 0; b < 8 && i + b < out.size(); ++b, x >>= 8) out[i + b] = static_cast<std::uint8_t>(x);
    }
    return out;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

const SimulatedBackend& backend_by_id(const WorkloadConfig& cfg, const std::string& id) {
    for (const auto& b : cfg.backends) {
        if (b.backend_id == id) return b;
    }
    throw ConfigError("unknown backend '" + id + "'");
}

std::string_view attack_key(AttackKind k) { return to_string(k); }

}  // namespace

std::vector<SimulatedBackend> default_backends() {
    return {
        {"gpt-4-turbo", {1.7, 0.4, 0.0}, {1200, 0.15}},
        {"deepseek-v3", {2.6, 0.8, 6.0}, {1000, 0.15}},
        {"llama-3.5", {4.3, 0.8, 0.0}, {800, 0.15}},
    };
}

void WorkloadConfig::validate() const {
    if (sizes.empty()) throw ConfigError("sizes must not be empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] == 0) throw ConfigError("sizes must be positive");
        if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sizes must be strictly increasing");
    }
    if (!(invalid_fraction >= 0.0 && invalid_fraction <= 1.0)) throw ConfigError("invalid_fraction must be in [0, 1]");
    double sum = 0;
    for (const auto& [k, w] : adversary_mix) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("adversary_mix weights must be nonnegative");
        sum += w;
    }
    if (invalid_fraction > 0 && std::abs(sum - 1.0) > 1e-6) throw ConfigError("adversary_mix weights must sum to 1");
    if (backends.empty()) throw ConfigError("at least one backend is required");
    std::set<std::string> ids;
    for (const auto& b : backends) {
        if (b.backend_id.empty() || b.backend_id.find(',') != std::string::npos) {
            throw ConfigError("invalid backend id '" + b.backend_id + "'");
        }
        if (!ids.insert(b.backend_id).second) throw ConfigError("duplicate backend id '" + b.backend_id + "'");
        const double p[] = {b.latency.base_ms, b.latency.spread_ms, b.latency.init_overhead_ms, b.output.mean_bytes,
                            b.output.decay_rate};
        for (double v : p) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("backend '" + b.backend_id + "' has a negative parameter");
        }
    }
    if (!(jitter_epsilon_ms >= 0.0)) throw ConfigError("jitter_epsilon_ms must be nonnegative");
    if (key_ids.empty()) throw ConfigError("at least one key is required");
    if (!key_epsilon.empty() && key_epsilon.size() != key_ids.size()) {
        throw ConfigError("key_epsilon must have one entry per key");
    }
    try {
        keys::RotationPolicy rp(key_ids, key_epsilon);
    } catch (const Error& e) {
        throw ConfigError(std::string("key rotation: ") + e.what());
    }
    const auto revoked_it = adversary_mix.find(AttackKind::revoked_key_use);
    const bool revoked_attacks = invalid_fraction > 0 && revoked_it != adversary_mix.end() && revoked_it->second > 0;
    if (revoke_at_scale) {
        if (*revoke_at_scale >= sizes.size()) throw ConfigError("revoke_at_scale is past the last size");
        if (std::find(key_ids.begin(), key_ids.end(), revoked_key_id) == key_ids.end()) {
            throw ConfigError("revoked_key '" + revoked_key_id + "' is not in keys");
        }
        if (key_ids.size() < 2) throw ConfigError("revocation needs a second key for honest traffic");
    } else if (revoked_attacks) {
        throw ConfigError("revoked-key-use attacks need revoke_at_scale");
    }
    if (epoch_ms == 0) throw ConfigError("epoch_ms must be positive");
    if (!(audit_probability >= 0.0 && audit_probability <= 1.0)) throw ConfigError("audit p must be in [0, 1]");
    if (!(audit_frequency > 0.0)) throw ConfigError("audit f_a must be positive");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (base_time_ms <= 20 * epoch_ms) throw ConfigError("base_time_ms too small for the freshness window");
}

WorkloadConfig parse_workload(std::string_view text, std::string_view origin) {
    using detail::config_fail;
    using detail::yaml_as;
    const YAML::Node root = detail::parse_yaml(text, origin);
    WorkloadConfig cfg;
    if (!root || root.IsNull()) {
        cfg.validate();
        return cfg;
    }
    if (!root.IsMap()) config_fail(origin, root.Mark(), "workload config must be a mapping");

    static const std::set<std::string> known{"sizes",        "invalid_fraction", "adversary_mix", "backends",
                                             "seed",         "jitter_epsilon_ms", "keys",         "key_epsilon",
                                             "revoked_key",  "revoke_at_scale",  "scheme",        "epoch_ms",
                                             "audit",        "workers",          "base_time_ms",  "policy"};
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (!known.contains(key)) config_fail(origin, kv.first.Mark(), "unknown key '" + key + "'");
    }

    if (root["sizes"]) cfg.sizes = yaml_as<std::vector<std::uint64_t>>(root["sizes"], origin, "sizes");
    if (root["invalid_fraction"]) {
        cfg.invalid_fraction = yaml_as<double>(root["invalid_fraction"], origin, "invalid_fraction");
    }
    if (const YAML::Node mix = root["adversary_mix"]) {
        if (!mix.IsMap()) config_fail(origin, mix.Mark(), "adversary_mix must be a mapping");
        cfg.adversary_mix.clear();
        for (const auto& kv : mix) {
            AttackKind k;
            try {
                k = attack_kind_from_string(kv.first.as<std::string>());
            } catch (const Error& e) {
                config_fail(origin, kv.first.Mark(), e.what());
            }
            cfg.adversary_mix[k] = yaml_as<double>(kv.second, origin, "adversary_mix weight");
        }
    }
    if (const YAML::Node list = root["backends"]) {
        if (!list.IsSequence()) config_fail(origin, list.Mark(), "backends must be a list");
        cfg.backends.clear();
        for (const auto& b : list) {
            SimulatedBackend sb;
            sb.backend_id = yaml_as<std::string>(detail::yaml_require(b, "id", origin), origin, "id");
            if (b["base_ms"]) sb.latency.base_ms = yaml_as<double>(b["base_ms"], origin, "base_ms");
            if (b["spread_ms"]) sb.latency.spread_ms = yaml_as<double>(b["spread_ms"], origin, "spread_ms");
            if (b["init_overhead_ms"]) {
                sb.latency.init_overhead_ms = yaml_as<double>(b["init_overhead_ms"], origin, "init_overhead_ms");
            }
            if (b["mean_bytes"]) sb.output.mean_bytes = yaml_as<double>(b["mean_bytes"], origin, "mean_bytes");
            if (b["decay_rate"]) sb.output.decay_rate = yaml_as<double>(b["decay_rate"], origin, "decay_rate");
            cfg.backends.push_back(std::move(sb));
        }
    }
    if (root["seed"]) cfg.seed = yaml_as<std::uint64_t>(root["seed"], origin, "seed");
    if (root["jitter_epsilon_ms"]) {
        cfg.jitter_epsilon_ms = yaml_as<double>(root["jitter_epsilon_ms"], origin, "jitter_epsilon_ms");
    }
    if (root["keys"]) cfg.key_ids = yaml_as<std::vector<std::string>>(root["keys"], origin, "keys");
    if (root["key_epsilon"]) cfg.key_epsilon = yaml_as<std::vector<double>>(root["key_epsilon"], origin, "key_epsilon");
    if (root["revoked_key"]) cfg.revoked_key_id = yaml_as<std::string>(root["revoked_key"], origin, "revoked_key");
    if (root["revoke_at_scale"]) {
        cfg.revoke_at_scale = yaml_as<std::size_t>(root["revoke_at_scale"], origin, "revoke_at_scale");
    }
    if (root["scheme"]) {
        try {
            cfg.scheme = keys::scheme_from_string(yaml_as<std::string>(root["scheme"], origin, "scheme"));
        } catch (const ConfigError& e) {
            config_fail(origin, root["scheme"].Mark(), e.what());
        }
    }
    if (root["epoch_ms"]) cfg.epoch_ms = yaml_as<std::uint64_t>(root["epoch_ms"], origin, "epoch_ms");
    if (const YAML::Node a = root["audit"]) {
        if (a["p"]) cfg.audit_probability = yaml_as<double>(a["p"], origin, "audit.p");
        if (a["f_a"]) cfg.audit_frequency = yaml_as<double>(a["f_a"], origin, "audit.f_a");
    }
    if (root["workers"]) cfg.workers = yaml_as<std::size_t>(root["workers"], origin, "workers");
    if (root["base_time_ms"]) cfg.base_time_ms = yaml_as<std::uint64_t>(root["base_time_ms"], origin, "base_time_ms");
    if (root["policy"]) cfg.policy_path = yaml_as<std::string>(root["policy"], origin, "policy");

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        config_fail(origin, root.Mark(), e.what());
    }
    return cfg;
}

WorkloadConfig load_workload(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot read workload config");
    std::stringstream ss;
    ss << in.rdbuf();
    WorkloadConfig cfg = parse_workload(ss.str(), path.string());
    if (!cfg.policy_path.empty() && cfg.policy_path.is_relative()) {
        cfg.policy_path = path.parent_path() / cfg.policy_path;
    }
    return cfg;
}

std::string default_policy_yaml(std::uint64_t epoch_ms) {
    std::string s = "epoch_ms: " + std::to_string(epoch_ms) + "\n";
    s += R"(clock_skew_ms: 2000
rules:
  - id: fresh
    kind: freshness-window
    severity: block
  - id: tools
    kind: tool-allowlist
    tools: [search, calculator, code-exec]
    severity: block
  - id: has-query
    kind: required-field
    partition: user
    field: query
    severity: block
  - id: context-id
    kind: field-pattern
    partition: model
    field: context_id
    pattern: "ctx-[0-9a-f]{8}"
    severity: block
  - id: token-budget
    kind: value-range
    partition: user
    field: max_tokens
    min: 1
    max: 2048
    severity: warn
  - id: encoding-size
    kind: max-encoding-size
    max_bytes: 4096
    severity: block
  - id: field-count
    kind: max-field-count
    max: 16
    severity: block
)";
    return s;
}

policy::PolicySet default_policy(std::uint64_t epoch_ms) {
    return policy::parse_policy(default_policy_yaml(epoch_ms), "<default policy>");
}

std::size_t select_backend_index(std::size_t count, CounterRng& rng) {
    return static_cast<std::size_t>(rng.below(count));
}

std::string select_backend(const std::vector<SimulatedBackend>& backends, CounterRng& rng) {
    if (backends.empty()) throw ConfigError("no backends");
    return backends[select_backend_index(backends.size(), rng)].backend_id;
}

double apply_jitter(double t, double epsilon_ms, CounterRng& rng) {
    if (epsilon_ms <= 0) return t;
    return t + rng.uniform(-epsilon_ms, epsilon_ms);
}

std::vector<Request> generate_batch(const WorkloadConfig& cfg, std::uint64_t scale, CounterRng& rng,
                                    bool revocation_active) {
    if (std::find(cfg.sizes.begin(), cfg.sizes.end(), scale) == cfg.sizes.end()) {
        throw ConfigError("scale " + std::to_string(scale) + " is not in the configured sizes");
    }
    if (cfg.backends.empty()) throw ConfigError("no backends");
    const auto n_invalid =
        static_cast<std::uint64_t>(std::llround(cfg.invalid_fraction * static_cast<double>(scale)));
    auto counts = largest_remainder(cfg.adversary_mix, n_invalid);
    if (!revocation_active) {
        counts[static_cast<std::size_t>(AttackKind::forged_signature)] +=
            counts[static_cast<std::size_t>(AttackKind::revoked_key_use)];
        counts[static_cast<std::size_t>(AttackKind::revoked_key_use)] = 0;
    }

    std::vector<std::optional<AttackKind>> labels;
    labels.reserve(scale);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        labels.insert(labels.end(), counts[k], static_cast<AttackKind>(k));
    }
    labels.resize(scale);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

    const std::uint64_t now = cfg.base_time_ms;
    std::vector<Request> batch;
    batch.reserve(scale);
    for (std::uint64_t i = 0; i < scale; ++i) {
        Request r;
        r.index = i;
        r.attack = labels[i];
        r.backend_id = cfg.backends[select_backend_index(cfg.backends.size(), rng)].backend_id;
        Manifest m = make_valid(rng, now);
        if (!r.attack) {
            r.encoded = canonical_encode(m);
        } else {
            switch (*r.attack) {
                case AttackKind::expired_timestamp: {
                    const std::uint64_t age = cfg.epoch_ms + 1 + rng.below(10 * cfg.epoch_ms);
                    r.encoded = canonical_encode(m.with_timestamp(now - age));
                    break;
                }
                case AttackKind::malformed_manifest:
                    r.variant = rng.bernoulli(0.5) ? 0 : 1 + static_cast<int>(rng.below(4));
                    if (r.variant == 0) {
                        FieldMap user = m.user_fields();
                        user.erase("query");
                        r.encoded = canonical_encode(Manifest(user, m.model_fields(), m.timestamp(), m.tool_id()));
                    } else {
                        r.encoded = corrupt(canonical_encode(m), r.variant);
                    }
                    break;
                case AttackKind::forged_signature:
                    r.variant = static_cast<int>(rng.below(4));
                    r.encoded = canonical_encode(m);
                    break;
                case AttackKind::revoked_key_use:
                    r.encoded = canonical_encode(m);
                    break;
            }
        }
        batch.push_back(std::move(r));
    }
    return batch;
}

namespace {

void tamper(keys::SignedManifest& sm, int variant, const keys::Keystore& ks, CounterRng& rng) {
    switch (variant) {
        case 0: {
            const auto bit = rng.below(sm.signature.size() * 8);
            sm.signature[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            break;
        }
        case 1:
            for (auto& b : sm.signature) b = static_cast<std::uint8_t>(rng.next_u64());
            break;
        case 2: {
            // A genuine signature, but over some other digest.
            const auto other = sha256("other-" + std::to_string(rng.next_u64()));
            sm.signature = ks.sign(other, sm.key_id);
            break;
        }
        default: {
            // Keep digest and signature, swap in a different manifest.
            FieldMap user = sm.manifest.user_fields();
            user["query"] = "q-substituted-" + hex_token(rng, 8);
            sm.manifest = Manifest(std::move(user), sm.manifest.model_fields(), sm.manifest.timestamp(),
                                   sm.manifest.tool_id());
            break;
        }
    }
}

struct Prepared {
    std::optional<Manifest> manifest;
    std::optional<keys::SignedManifest> signed_manifest;
    keys::VerifyResult verdict;
    policy::Severity severity = policy::Severity::ok;
    std::optional<ErrorKind> error;
    std::string key_id;
    bool reached_verify = false;
    double wall_ms = 0;
};

ErrorKind kind_of(const keys::VerifyResult& v) {
    return *v.reject == keys::RejectReason::key_revoked ? ErrorKind::key_revoked : ErrorKind::signature_invalid;
}

}  // namespace

RunResult run_pipeline(const WorkloadConfig& cfg, const policy::PolicySet& ps, keys::Keystore& ks,
                       tlog::TransparencyLog& log) {
    cfg.validate();
    for (const auto& id : cfg.key_ids) {
        if (!ks.find(id)) throw ConfigError("keystore has no key '" + id + "'");
    }
    const keys::RotationPolicy rp(cfg.key_ids, cfg.key_epsilon);
    const std::uint64_t now = cfg.base_time_ms;

    RunResult result;
    result.config = cfg;
    audit::Stopwatch total;

    for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
        const bool revoked_here = cfg.revoke_at_scale && s >= *cfg.revoke_at_scale;
        CounterRng gen = stream(cfg, kGenerate, s, 0);
        result.batches.push_back(generate_batch(cfg, cfg.sizes[s], gen, revoked_here));
    }

    // Stale signatures for revoked-key-use requests, issued while the key is
    // still live.
    std::map<std::pair<std::size_t, std::uint64_t>, Bytes> stale;
    for (std::size_t s = 0; s < result.batches.size(); ++s) {
        for (const auto& r : result.batches[s]) {
            if (r.attack == AttackKind::revoked_key_use) {
                stale[{s, r.index}] = ks.sign(digest(canonical_decode(r.encoded)), cfg.revoked_key_id);
            }
        }
    }

    std::map<std::string, std::uint64_t> verify_calls;

    for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
        const std::uint64_t scale = cfg.sizes[s];
        const auto& batch = result.batches[s];
        if (cfg.revoke_at_scale && s == *cfg.revoke_at_scale) ks.revoke(cfg.revoked_key_id);

        ScaleSummary sum;
        sum.scale = scale;
        sum.revocation_active = cfg.revoke_at_scale && s >= *cfg.revoke_at_scale;
        std::vector<Prepared> prep(batch.size());
        std::vector<double> secure_ms(batch.size(), 0.0);
        std::vector<double> baseline_ms(batch.size(), 0.0);
        std::vector<std::size_t> metric_rows(batch.size(), SIZE_MAX);

        audit::Stopwatch scale_clock;
        parallel_for(batch.size(), cfg.workers, [&](std::size_t i) {
            audit::Stopwatch sw;
            const Request& r = batch[i];
            Prepared& p = prep[i];
            try {
                p.manifest = canonical_decode(r.encoded);
            } catch (const Error&) {
                p.error = ErrorKind::malformed_encoding;
                p.severity = policy::Severity::block;
                p.wall_ms = sw.elapsed_ms();
                return;
            }
            std::string key_id;
            if (r.attack == AttackKind::revoked_key_use) {
                key_id = cfg.revoked_key_id;
            } else {
                CounterRng krng = stream(cfg, kKey, s, i);
                key_id = keys::select_key(rp, ks, krng);
            }
            pipeline::SignResult sr;
            if (r.attack == AttackKind::revoked_key_use) {
                sr.report = policy::evaluate(*p.manifest, ps, now);
                if (sr.report.passed) {
                    sr.signed_manifest =
                        keys::SignedManifest{*p.manifest, digest(*p.manifest), stale.at({s, r.index}), key_id};
                }
            } else {
                sr = pipeline::create_and_sign(*p.manifest, ps, ks, key_id, now);
            }
            p.severity = sr.report.severity;
            if (!sr.report.passed) {
                p.error = sr.report.failed_kind(policy::RuleKind::freshness_window) ? ErrorKind::expired_timestamp
                                                                                    : ErrorKind::policy_violation;
                p.wall_ms = sw.elapsed_ms();
                return;
            }
            p.key_id = key_id;
            if (r.attack == AttackKind::forged_signature) {
                CounterRng trng = stream(cfg, kTamper, s, i);
                tamper(*sr.signed_manifest, r.variant, ks, trng);
            }
            p.reached_verify = true;
            p.verdict = pipeline::verify_signed(*sr.signed_manifest, ks);
            if (!p.verdict.accepted()) p.error = kind_of(p.verdict);
            p.signed_manifest = std::move(sr.signed_manifest);
            p.wall_ms = sw.elapsed_ms();
        });

        double clock = 0;
        double sim_exec_total = 0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            audit::Stopwatch sw;
            const Request& r = batch[i];
            Prepared& p = prep[i];
            const SimulatedBackend& be = backend_by_id(cfg, r.backend_id);
            ExecutionOutcome o;
            o.scale = scale;
            o.request_index = r.index;
            o.backend_id = r.backend_id;
            o.key_id = p.key_id;
            o.severity = p.severity;
            o.attack = r.attack;
            CounterRng lrng = stream(cfg, kLatency, s, i);
            if (p.reached_verify) o.verify_time_ms = latency_sample(be.latency, verify_calls[be.backend_id]++, lrng);
            if (!p.error) {
                const auto receipt = log.append(p.signed_manifest->digest, p.signed_manifest->signature,
                                                p.signed_manifest->key_id, now + static_cast<std::uint64_t>(clock));
                CounterRng orng = stream(cfg, kOutput, s, i);
                const Bytes output = synth_output(be.output, scale, orng);
                o.output_bytes = output.size();
                o.exec_time_ms =
                    latency_sample(be.latency, verify_calls[be.backend_id], lrng) + kMsPerOutputByte * output.size();
                sim_exec_total += o.exec_time_ms;
                ++sum.executions;
                CounterRng arng = stream(cfg, kAudit, s, i);
                if (arng.bernoulli(cfg.audit_probability)) {
                    result.evidence.push_back(
                        audit::build_evidence(receipt.root, output, o.exec_time_ms, o.verify_time_ms, receipt.index));
                    ++sum.audits;
                }
                metric_rows[i] = result.metrics.size();
                result.metrics.push_back({"n" + std::to_string(scale) + "-" + std::to_string(i), o.exec_time_ms,
                                          o.verify_time_ms, 0, 0, 0});
            } else {
                o.status = Status::failure;
                o.error_kind = p.error;
                ++sum.failures_by_kind[std::string(to_string(*p.error))];
            }
            clock += o.verify_time_ms + o.exec_time_ms;
            CounterRng jrng = stream(cfg, kJitter, s, i);
            o.timestamp = apply_jitter(clock, cfg.jitter_epsilon_ms, jrng);
            if (o.status == Status::success) {
                ++sum.successes;
            } else {
                ++sum.failures;
            }
            secure_ms[i] = p.wall_ms + sw.elapsed_ms();
            result.outcomes.push_back(std::move(o));
        }
        sum.secure_wall_ms = scale_clock.elapsed_ms();
        sum.processed = batch.size();
        sum.log_size = log.size();
        sum.root_hex = log.root().hash.hex();
        result.log_growth.emplace_back(log.size(), log.storage_bytes());

        // Baseline: same work with signing, verification and logging elided.
        const tlog::MerkleRoot unlogged{tlog::empty_root(), 0};
        std::vector<std::optional<double>> base_prep(batch.size());
        audit::Stopwatch base_clock;
        parallel_for(batch.size(), cfg.workers, [&](std::size_t i) {
            audit::Stopwatch sw;
            try {
                const Manifest m = canonical_decode(batch[i].encoded);
                (void)digest(m);
                if (policy::evaluate(m, ps, now).passed) base_prep[i] = 0.0;
            } catch (const Error&) {
            }
            baseline_ms[i] = sw.elapsed_ms();
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            audit::Stopwatch sw;
            if (base_prep[i]) {
                const SimulatedBackend& be = backend_by_id(cfg, batch[i].backend_id);
                CounterRng orng = stream(cfg, kOutput, s, i);
                const Bytes output = synth_output(be.output, scale, orng);
                CounterRng arng = stream(cfg, kAudit, s, i);
                if (arng.bernoulli(cfg.audit_probability)) {
                    (void)audit::build_evidence(unlogged, output, 0.0, 0.0);
                }
            }
            baseline_ms[i] += sw.elapsed_ms();
        }
        sum.baseline_wall_ms = base_clock.elapsed_ms();

        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (metric_rows[i] == SIZE_MAX) continue;
            auto& row = result.metrics[metric_rows[i]];
            row = audit::make_metrics(row.workload_id, row.exec_time_ms, row.verify_time_ms,
                                      std::max(baseline_ms[i], 1e-6), secure_ms[i]);
        }
        sum.delta = audit::overhead(std::max(sum.baseline_wall_ms, 1e-6), sum.secure_wall_ms);
        sum.modeled_delta = (sum.secure_wall_ms - sum.baseline_wall_ms) /
                            std::max(sum.baseline_wall_ms + sim_exec_total, 1e-6);
        sum.secure_ms_per_manifest = sum.secure_wall_ms / static_cast<double>(scale);
        result.scales.push_back(std::move(sum));
    }
    result.total_wall_ms = total.elapsed_ms();
    return result;
}

RunResult run_pipeline(const WorkloadConfig& cfg) {
    cfg.validate();
    keys::Keystore ks(cfg.scheme);
    for (const auto& id : cfg.key_ids) ks.keygen(id, cfg.scheme, cfg.base_time_ms);
    const policy::PolicySet ps =
        cfg.policy_path.empty() ? default_policy(cfg.epoch_ms) : policy::load_policy(cfg.policy_path);
    tlog::TransparencyLog log;
    return run_pipeline(cfg, ps, ks, log);
}

namespace {

json config_json(const WorkloadConfig& cfg) {
    json j;
    j["sizes"] = cfg.sizes;
    j["invalid_fraction"] = cfg.invalid_fraction;
    json mix = json::object();
    for (const auto& [k, w] : cfg.adversary_mix) mix[std::string(attack_key(k))] = w;
    j["adversary_mix"] = mix;
    json backends = json::array();
    for (const auto& b : cfg.backends) {
        backends.push_back({{"id", b.backend_id},
                            {"base_ms", b.latency.base_ms},
                            {"spread_ms", b.latency.spread_ms},
                            {"init_overhead_ms", b.latency.init_overhead_ms},
                            {"mean_bytes", b.output.mean_bytes},
                            {"decay_rate", b.output.decay_rate}});
    }
    j["backends"] = backends;
    j["seed"] = cfg.seed;
    j["jitter_epsilon_ms"] = cfg.jitter_epsilon_ms;
    j["keys"] = cfg.key_ids;
    j["key_epsilon"] = cfg.key_epsilon;
    j["revoked_key"] = cfg.revoked_key_id;
    j["revoke_at_scale"] = cfg.revoke_at_scale ? json(*cfg.revoke_at_scale) : json(nullptr);
    j["scheme"] = std::string(keys::to_string(cfg.scheme));
    j["epoch_ms"] = cfg.epoch_ms;
    j["audit"] = {{"p", cfg.audit_probability}, {"f_a", cfg.audit_frequency}};
    j["workers"] = cfg.workers;
    j["base_time_ms"] = cfg.base_time_ms;
    j["policy"] = cfg.policy_path.empty() ? json("default") : json(cfg.policy_path.string());
    return j;
}

}  // namespace

std::string run_report_json(const RunResult& r) {
    json j;
    j["seed"] = r.config.seed;
    j["config"] = config_json(r.config);
    j["baseline_definition"] =
        "same requests and simulated execution with signing, verification and transparency logging elided";
    j["timing_note"] =
        "delta uses measured wall time; modeled_delta adds simulated backend time to the baseline; "
        "verify_time_ms and exec_time_ms in outcomes are simulated from the latency model";
    j["audit_expected_detection_latency_s"] =
        r.config.audit_probability > 0
            ? json(audit::expected_detection_latency(r.config.audit_probability, r.config.audit_frequency))
            : json(nullptr);
    json scales = json::array();
    for (const auto& s : r.scales) {
        scales.push_back({{"scale", s.scale},
                          {"processed", s.processed},
                          {"successes", s.successes},
                          {"failures", s.failures},
                          {"failures_by_kind", s.failures_by_kind},
                          {"executions", s.executions},
                          {"audits", s.audits},
                          {"secure_wall_ms", s.secure_wall_ms},
                          {"baseline_wall_ms", s.baseline_wall_ms},
                          {"delta", s.delta},
                          {"delta_negative", s.delta < 0},
                          {"modeled_delta", s.modeled_delta},
                          {"secure_ms_per_manifest", s.secure_ms_per_manifest},
                          {"log_size", s.log_size},
                          {"root", s.root_hex},
                          {"revocation_active", s.revocation_active}});
    }
    j["scales"] = scales;
    json growth = json::array();
    for (const auto& [n, bytes] : r.log_growth) growth.push_back({n, bytes});
    j["log_growth"] = growth;
    j["total_wall_ms"] = r.total_wall_ms;
    return j.dump(2) + "\n";
}

void write_log_growth_csv(std::ostream& out, const std::vector<std::pair<std::uint64_t, std::uint64_t>>& growth) {
    out << "entries,storage_bytes\n";
    for (const auto& [n, b] : growth) out << n << ',' << b << '\n';
}

void write_run_outputs(const RunResult& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());

    std::ostringstream outcomes;
    write_outcomes_csv(outcomes, r.outcomes);
    detail::write_file_atomic(dir / "outcomes.csv", outcomes.str());

    std::ostringstream metrics;
    audit::write_metrics_csv(metrics, r.metrics);
    detail::write_file_atomic(dir / "metrics.csv", metrics.str());

    std::string evidence;
    for (const auto& e : r.evidence) evidence += audit::serialize_evidence(e) + "\n";
    detail::write_file_atomic(dir / "evidence.ndjson", evidence);

    std::ostringstream growth;
    write_log_growth_csv(growth, r.log_growth);
    detail::write_file_atomic(dir / "log_growth.csv", growth.str());

    detail::write_file_atomic(dir / "run-report.json", run_report_json(r));
}

}  // namespace manifestd::harness
