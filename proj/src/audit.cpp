#include "manifestd/audit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "manifestd/error.hpp"

namespace manifestd::audit {

namespace {

bool valid_probability(double p) { return p > 0.0 && p <= 1.0; }

double round_ms(double ms) { return std::stod(canonical_time(ms)); }

}  // namespace

void AuditConfig::validate() const {
    if (!valid_probability(detection_probability)) throw DomainError("detection probability must be in (0, 1]");
    if (!(audit_frequency > 0.0) || !std::isfinite(audit_frequency)) {
        throw DomainError("audit frequency must be positive");
    }
}

double undetected_probability(double p, std::uint64_t n) {
    if (!valid_probability(p)) throw DomainError("detection probability must be in (0, 1]");
    return std::pow(1.0 - p, static_cast<double>(n));
}

double expected_detection_latency(double p, double audit_frequency) {
    if (!valid_probability(p)) throw DomainError("detection probability must be in (0, 1]");
    if (!(audit_frequency > 0.0) || !std::isfinite(audit_frequency)) {
        throw DomainError("audit frequency must be positive");
    }
    return 1.0 / (p * audit_frequency);
}

std::string canonical_time(double ms) {
    if (!std::isfinite(ms)) throw DomainError("timing must be finite");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", ms);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

Digest32 evidence_digest(const Digest32& root, const Digest32& output_digest, double exec_time_ms,
                         double verify_time_ms) {
    Sha256 h;
    h.update(root.bytes).update(output_digest.bytes);
    h.update(canonical_time(exec_time_ms)).update(canonical_time(verify_time_ms));
    return h.finish();
}

EvidenceTuple build_evidence(const tlog::MerkleRoot& root, std::span<const std::uint8_t> output,
                             double exec_time_ms, double verify_time_ms, std::optional<std::uint64_t> entry_index) {
    if (!(exec_time_ms >= 0.0) || !(verify_time_ms >= 0.0)) throw DomainError("timings must be nonnegative");
    EvidenceTuple e;
    e.merkle_root = root;
    e.output_digest = sha256(output);
    e.exec_time_ms = round_ms(exec_time_ms);
    e.verify_time_ms = round_ms(verify_time_ms);
    e.evidence_digest = evidence_digest(root.hash, e.output_digest, e.exec_time_ms, e.verify_time_ms);
    e.entry_index = entry_index;
    return e;
}

bool verify_evidence(const EvidenceTuple& e) {
    return e.evidence_digest == evidence_digest(e.merkle_root.hash, e.output_digest, e.exec_time_ms, e.verify_time_ms);
}

std::string serialize_evidence(const EvidenceTuple& e) {
    // Timings are written as their canonical strings so parsing cannot drift.
    nlohmann::ordered_json j;
    j["tree_size"] = e.merkle_root.tree_size;
    j["root"] = e.merkle_root.hash.hex();
    j["output_digest"] = e.output_digest.hex();
    j["exec_time_ms"] = canonical_time(e.exec_time_ms);
    j["verify_time_ms"] = canonical_time(e.verify_time_ms);
    j["evidence_digest"] = e.evidence_digest.hex();
    if (e.entry_index) j["entry_index"] = *e.entry_index;
    return j.dump();
}

EvidenceTuple parse_evidence(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line.begin(), line.end());
        EvidenceTuple e;
        e.merkle_root.tree_size = j.at("tree_size").get<std::uint64_t>();
        e.merkle_root.hash = Digest32::from_hex(j.at("root").get<std::string>());
        e.output_digest = Digest32::from_hex(j.at("output_digest").get<std::string>());
        e.exec_time_ms = std::stod(j.at("exec_time_ms").get<std::string>());
        e.verify_time_ms = std::stod(j.at("verify_time_ms").get<std::string>());
        e.evidence_digest = Digest32::from_hex(j.at("evidence_digest").get<std::string>());
        if (j.contains("entry_index")) e.entry_index = j.at("entry_index").get<std::uint64_t>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw EncodingError(std::string("malformed evidence record: ") + ex.what());
    } catch (const std::invalid_argument& ex) {
        throw EncodingError(std::string("malformed evidence timing: ") + ex.what());
    }
}

std::vector<EvidenceTuple> read_evidence_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open evidence file " + path);
    std::vector<EvidenceTuple> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(parse_evidence(line));
    }
    return out;
}

std::vector<bool> sample_audits(std::size_t count, double p, CounterRng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("audit probability must be in [0, 1]");
    std::vector<bool> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = rng.bernoulli(p);
    return out;
}

std::vector<EvidenceTuple> audit_sample(std::span<const Execution> executions, const AuditConfig& cfg,
                                        CounterRng& rng) {
    cfg.validate();
    const auto picks = sample_audits(executions.size(), cfg.detection_probability, rng);
    std::vector<EvidenceTuple> out;
    for (std::size_t i = 0; i < executions.size(); ++i) {
        if (!picks[i]) continue;
        const Execution& x = executions[i];
        out.push_back(build_evidence(x.root, x.output, x.exec_time_ms, x.verify_time_ms, x.entry_index));
    }
    return out;
}

double overhead(double baseline_ms, double secure_ms) {
    if (!(baseline_ms > 0.0)) throw DomainError("baseline time must be positive");
    return (secure_ms - baseline_ms) / baseline_ms;
}

MetricsRecord make_metrics(std::string workload_id, double exec_time_ms, double verify_time_ms, double baseline_ms,
                           double secure_ms) {
    return MetricsRecord{std::move(workload_id), exec_time_ms,  verify_time_ms,
                         baseline_ms,            secure_ms,     overhead(baseline_ms, secure_ms)};
}

double tradeoff(double delta, double p_error, const TradeoffWeights& w) {
    if (!(p_error >= 0.0 && p_error <= 1.0)) throw DomainError("error probability must be in [0, 1]");
    if (!(w.alpha >= 0.0 && w.beta >= 0.0 && w.alpha + w.beta > 0.0)) {
        throw DomainError("trade-off weights must be nonnegative and not both zero");
    }
    if (!std::isfinite(delta)) throw DomainError("overhead must be finite");
    return w.alpha * delta + w.beta * p_error;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> rows) {
    out << "workload_id,exec_time_ms,verify_time_ms,baseline_time_ms,secure_time_ms,overhead_delta\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.workload_id.c_str(), r.exec_time_ms,
                      r.verify_time_ms, r.baseline_time_ms, r.secure_time_ms, r.overhead_delta);
        out << buf;
    }
}

}  // namespace manifestd::audit
