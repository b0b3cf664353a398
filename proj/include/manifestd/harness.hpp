#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "manifestd/audit.hpp"
#include "manifestd/keystore.hpp"
#include "manifestd/outcome.hpp"
#include "manifestd/policy.hpp"
#include "manifestd/rng.hpp"
#include "manifestd/transparency_log.hpp"

namespace manifestd::harness {

struct LatencyModel {
    double base_ms = 2.0;
    double spread_ms = 0.5;
    // Extra cost on the first calls, decaying as exp(-calls / 100).
    double init_overhead_ms = 0.0;
};

struct OutputSizeModel {
    double mean_bytes = 1024;
    // Relative spread decays as exp(-decay * N / 1000) in variance.
    double decay_rate = 0.15;
};

struct SimulatedBackend {
    std::string backend_id;
    LatencyModel latency;
    OutputSizeModel output;
};

std::vector<SimulatedBackend> default_backends();

struct WorkloadConfig {
    std::vector<std::uint64_t> sizes{100, 500, 1000, 5000, 10000, 20000, 50000};
    double invalid_fraction = 0.2;
    std::map<AttackKind, double> adversary_mix{
        {AttackKind::expired_timestamp, 1.0 / 3},
        {AttackKind::forged_signature, 1.0 / 3},
        {AttackKind::malformed_manifest, 1.0 / 3},
    };
    std::vector<SimulatedBackend> backends = default_backends();
    std::uint64_t seed = 42;
    double jitter_epsilon_ms = 0.0;

    std::vector<std::string> key_ids{"dev-k1", "dev-k2"};
    std::vector<double> key_epsilon;  // empty means uniform
    std::string revoked_key_id = "dev-k2";
    // dev-k2 is revoked right before this index into `sizes` is processed.
    std::optional<std::size_t> revoke_at_scale;
    keys::Scheme scheme = keys::Scheme::ecdsa_p256;

    std::uint64_t epoch_ms = 60000;
    double audit_probability = 0.1;
    double audit_frequency = 1.0;
    std::size_t workers = 1;
    // Virtual "now" for policy evaluation and log timestamps.
    std::uint64_t base_time_ms = 1700000000000ULL;
    // Policy file; empty means default_policy(epoch_ms).
    std::filesystem::path policy_path;

    // Throws ConfigError.
    void validate() const;
};

WorkloadConfig parse_workload(std::string_view text, std::string_view origin = "<workload>");
WorkloadConfig load_workload(const std::filesystem::path& path);

// Rules the generator is built against: fresh timestamp, allowlisted tool,
// required query, context id pattern, bounded max_tokens (warn), encoding
// size and field count.
policy::PolicySet default_policy(std::uint64_t epoch_ms);
std::string default_policy_yaml(std::uint64_t epoch_ms);

struct Request {
    std::uint64_t index = 0;
    std::optional<AttackKind> attack;
    std::string encoded;  // canonical text, or broken text for malformed input
    std::string backend_id;
    // Forgery variant or malformed variant, when relevant.
    int variant = 0;
};

// Exactly `scale` requests; round(invalid_fraction * scale) of them are
// attacks split over the mix by largest remainder, placed at random
// positions. Same (cfg, scale, rng state) gives the same batch.
std::vector<Request> generate_batch(const WorkloadConfig& cfg, std::uint64_t scale, CounterRng& rng,
                                    bool revocation_active = false);

std::string select_backend(const std::vector<SimulatedBackend>& backends, CounterRng& rng);
std::size_t select_backend_index(std::size_t count, CounterRng& rng);

// t + xi with xi ~ U(-epsilon, epsilon).
double apply_jitter(double t, double epsilon_ms, CounterRng& rng);

struct ScaleSummary {
    std::uint64_t scale = 0;
    std::uint64_t processed = 0;
    std::uint64_t successes = 0;
    std::uint64_t failures = 0;
    std::map<std::string, std::uint64_t> failures_by_kind;
    std::uint64_t executions = 0;
    std::uint64_t audits = 0;
    double secure_wall_ms = 0;
    double baseline_wall_ms = 0;
    double delta = 0;
    // Wall-clock crypto overhead relative to baseline plus simulated
    // backend time, i.e. what the overhead looks like next to real tools.
    double modeled_delta = 0;
    double secure_ms_per_manifest = 0;
    std::uint64_t log_size = 0;
    std::string root_hex;
    bool revocation_active = false;
};

struct RunResult {
    WorkloadConfig config;
    std::vector<ExecutionOutcome> outcomes;
    std::vector<audit::MetricsRecord> metrics;
    std::vector<audit::EvidenceTuple> evidence;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> log_growth;
    std::vector<ScaleSummary> scales;
    std::vector<std::vector<Request>> batches;
    double total_wall_ms = 0;
};

// Drives every request through policy -> sign -> verify -> log -> simulated
// execution -> audit -> metrics, then repeats each scale with signing,
// verification and logging elided for the baseline. Attacks never abort the
// run; StorageError does. The keystore must hold cfg.key_ids.
RunResult run_pipeline(const WorkloadConfig& cfg, const policy::PolicySet& ps, keys::Keystore& ks,
                       tlog::TransparencyLog& log);

// Fresh keystore, default (or configured) policy and in-memory log.
RunResult run_pipeline(const WorkloadConfig& cfg);

std::string run_report_json(const RunResult& r);
void write_log_growth_csv(std::ostream& out, const std::vector<std::pair<std::uint64_t, std::uint64_t>>& growth);

// outcomes.csv, metrics.csv, evidence.ndjson, log_growth.csv,
// run-report.json; each written atomically.
void write_run_outputs(const RunResult& r, const std::filesystem::path& dir);

}  // namespace manifestd::harness
