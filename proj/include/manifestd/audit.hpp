#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "manifestd/hash.hpp"
#include "manifestd/rng.hpp"
#include "manifestd/transparency_log.hpp"

namespace manifestd::audit {

struct AuditConfig {
    double detection_probability = 1.0;  // p, in (0, 1]
    double audit_frequency = 1.0;        // f_a, audits per second
    std::uint64_t rounds = 1;            // n

    // Throws DomainError.
    void validate() const;
};

// (1 - p)^n. Throws DomainError unless p in (0, 1].
double undetected_probability(double p, std::uint64_t n);

// 1 / (p * f_a) seconds. Throws DomainError unless p in (0, 1] and f_a > 0.
double expected_detection_latency(double p, double audit_frequency);

// Timings enter digests as fixed three-decimal milliseconds.
std::string canonical_time(double ms);

struct EvidenceTuple {
    tlog::MerkleRoot merkle_root;
    Digest32 output_digest;
    double exec_time_ms = 0;
    double verify_time_ms = 0;
    Digest32 evidence_digest;
    // Log position the evidence refers to, when it refers to one entry.
    std::optional<std::uint64_t> entry_index;

    friend bool operator==(const EvidenceTuple&, const EvidenceTuple&) = default;
};

// H(R_t || d_o || canonical(T_exec) || canonical(T_verify))
Digest32 evidence_digest(const Digest32& root, const Digest32& output_digest, double exec_time_ms,
                         double verify_time_ms);

// Timings are rounded to their canonical precision so the tuple and its
// serialized form agree exactly. Throws DomainError on negative times.
EvidenceTuple build_evidence(const tlog::MerkleRoot& root, std::span<const std::uint8_t> output,
                             double exec_time_ms, double verify_time_ms,
                             std::optional<std::uint64_t> entry_index = std::nullopt);

bool verify_evidence(const EvidenceTuple& e);

// One JSON object per line: tree_size, root, output_digest, exec_time_ms,
// verify_time_ms, evidence_digest (hex lowercase), optional entry_index.
std::string serialize_evidence(const EvidenceTuple& e);
EvidenceTuple parse_evidence(std::string_view line);
std::vector<EvidenceTuple> read_evidence_file(const std::string& path);

// One executed request as seen by the auditor.
struct Execution {
    tlog::MerkleRoot root;
    Bytes output;
    double exec_time_ms = 0;
    double verify_time_ms = 0;
    std::optional<std::uint64_t> entry_index;
};

// Independent Bernoulli(p) audit decision per execution.
std::vector<bool> sample_audits(std::size_t count, double p, CounterRng& rng);

std::vector<EvidenceTuple> audit_sample(std::span<const Execution> executions, const AuditConfig& cfg,
                                        CounterRng& rng);

struct MetricsRecord {
    std::string workload_id;
    double exec_time_ms = 0;
    double verify_time_ms = 0;
    double baseline_time_ms = 0;
    double secure_time_ms = 0;
    double overhead_delta = 0;
};

// (secure - baseline) / baseline. Negative values are legal. Throws
// DomainError for a nonpositive baseline.
double overhead(double baseline_ms, double secure_ms);

MetricsRecord make_metrics(std::string workload_id, double exec_time_ms, double verify_time_ms,
                           double baseline_ms, double secure_ms);

struct TradeoffWeights {
    double alpha = 0.5;
    double beta = 0.5;
};

// alpha * delta + beta * p_error.
double tradeoff(double delta, double p_error, const TradeoffWeights& w);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> rows);

// Monotonic stopwatch in milliseconds.
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }
    void reset() { start_ = std::chrono::steady_clock::now(); }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace manifestd::audit
