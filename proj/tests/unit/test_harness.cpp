#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "manifestd/error.hpp"
#include "manifestd/harness.hpp"
#include "manifestd/stats.hpp"
#include "test_util.hpp"

using namespace manifestd;
using namespace manifestd::harness;

namespace {

WorkloadConfig small(std::vector<std::uint64_t> sizes = {100, 300}) {
    WorkloadConfig cfg;
    cfg.sizes = std::move(sizes);
    return cfg;
}

std::map<std::optional<AttackKind>, int> count_labels(const std::vector<Request>& batch) {
    std::map<std::optional<AttackKind>, int> out;
    for (const auto& r : batch) ++out[r.attack];
    return out;
}

}  // namespace

TEST(GenerateBatch, AllValidWithoutAdversary) {
    auto cfg = small();
    cfg.invalid_fraction = 0;
    CounterRng rng(1);
    const auto batch = generate_batch(cfg, 100, rng);
    ASSERT_EQ(batch.size(), 100u);
    const auto ps = default_policy(cfg.epoch_ms);
    for (const auto& r : batch) {
        EXPECT_FALSE(r.attack);
        const Manifest m = canonical_decode(r.encoded);
        EXPECT_TRUE(policy::evaluate(m, ps, cfg.base_time_ms).passed) << r.encoded;
    }
}

TEST(GenerateBatch, MixProportions) {
    auto cfg = small({1000});
    CounterRng rng(2);
    const auto batch = generate_batch(cfg, 1000, rng);
    ASSERT_EQ(batch.size(), 1000u);
    auto counts = count_labels(batch);
    EXPECT_EQ(counts[std::nullopt], 800);
    // 200 split 1/3 each: largest remainder gives 67/67/66 in kind order.
    EXPECT_EQ(counts[AttackKind::expired_timestamp], 67);
    EXPECT_EQ(counts[AttackKind::forged_signature], 67);
    EXPECT_EQ(counts[AttackKind::malformed_manifest], 66);
    for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(batch[i].index, i);
}

TEST(GenerateBatch, ExpiredFailPolicyOnFreshnessOnly) {
    auto cfg = small({500});
    cfg.adversary_mix = {{AttackKind::expired_timestamp, 1.0}};
    CounterRng rng(3);
    const auto ps = default_policy(cfg.epoch_ms);
    for (const auto& r : generate_batch(cfg, 500, rng)) {
        const auto rep = policy::evaluate(canonical_decode(r.encoded), ps, cfg.base_time_ms);
        ASSERT_EQ(rep.passed, !r.attack.has_value());
        if (r.attack) ASSERT_TRUE(rep.failed_kind(policy::RuleKind::freshness_window));
    }
}

TEST(GenerateBatch, Reproducible) {
    auto cfg = small();
    CounterRng a(9), b(9), c(10);
    const auto x = generate_batch(cfg, 300, a);
    const auto y = generate_batch(cfg, 300, b);
    const auto z = generate_batch(cfg, 300, c);
    ASSERT_EQ(x.size(), y.size());
    bool differs = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(x[i].encoded, y[i].encoded);
        EXPECT_EQ(x[i].attack, y[i].attack);
        EXPECT_EQ(x[i].backend_id, y[i].backend_id);
        differs |= x[i].encoded != z[i].encoded;
    }
    EXPECT_TRUE(differs);
}

TEST(GenerateBatch, ScaleMustBeConfigured) {
    auto cfg = small();
    CounterRng rng(1);
    EXPECT_THROW(generate_batch(cfg, 101, rng), ConfigError);
}

TEST(GenerateBatch, RevokedUseFallsBackToForgeryBeforeRevocation) {
    auto cfg = small({200});
    cfg.adversary_mix = {{AttackKind::revoked_key_use, 1.0}};
    cfg.revoke_at_scale = 0;
    CounterRng a(4), b(4);
    auto before = count_labels(generate_batch(cfg, 200, a, false));
    auto after = count_labels(generate_batch(cfg, 200, b, true));
    EXPECT_EQ(before[AttackKind::forged_signature], 40);
    EXPECT_EQ(after[AttackKind::revoked_key_use], 40);
}

TEST(SelectBackend, UniformAndFair) {
    const auto backends = default_backends();
    CounterRng rng(42);
    std::map<std::string, int> counts;
    for (int i = 0; i < 50000; ++i) ++counts[select_backend(backends, rng)];
    ASSERT_EQ(counts.size(), 3u);
    std::vector<double> freq;
    for (const auto& [id, c] : counts) {
        freq.push_back(c / 50000.0);
        EXPECT_GE(freq.back(), 0.32) << id;
        EXPECT_LE(freq.back(), 0.345) << id;
    }
    EXPECT_GE(stats::fairness_index(freq), 0.97);

    CounterRng one(1);
    const std::vector<SimulatedBackend> single{{"solo", {}, {}}};
    for (int i = 0; i < 100; ++i) EXPECT_EQ(select_backend(single, one), "solo");
}

TEST(Jitter, VarianceAndSupport) {
    CounterRng rng(6);
    EXPECT_EQ(apply_jitter(12.5, 0.0, rng), 12.5);
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = apply_jitter(1000.0, 3.0, rng) - 1000.0;
        ASSERT_LE(std::abs(x), 3.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    EXPECT_NEAR(sq / n - mean * mean, 3.0, 0.1);
}

TEST(RunPipeline, ConservationAndLogContents) {
    auto cfg = small();
    const RunResult r = run_pipeline(cfg);
    ASSERT_EQ(r.scales.size(), 2u);
    ASSERT_EQ(r.outcomes.size(), 400u);
    std::uint64_t logged = 0;
    for (const auto& s : r.scales) {
        EXPECT_EQ(s.processed, s.scale);
        EXPECT_EQ(s.successes + s.failures, s.scale);
        EXPECT_EQ(s.successes, s.scale * 4 / 5);
        EXPECT_EQ(s.executions, s.successes);
        logged += s.successes;
        EXPECT_EQ(s.log_size, logged);
    }
    for (const auto& o : r.outcomes) {
        EXPECT_EQ(o.status == Status::failure, o.error_kind.has_value());
        if (o.severity == policy::Severity::block) EXPECT_EQ(o.status, Status::failure);
        if (o.attack) EXPECT_EQ(o.status, Status::failure);
        if (o.status == Status::failure) EXPECT_EQ(o.output_bytes, 0u);
    }
    ASSERT_EQ(r.log_growth.size(), 2u);
    EXPECT_EQ(r.log_growth.back().first, logged);
}

TEST(RunPipeline, ExpiredOnlyBatch) {
    auto cfg = small({100});
    cfg.invalid_fraction = 0.01;
    cfg.adversary_mix = {{AttackKind::expired_timestamp, 1.0}};
    keys::Keystore ks;
    ks.keygen("dev-k1");
    ks.keygen("dev-k2");
    tlog::TransparencyLog log;
    const auto r = run_pipeline(cfg, default_policy(cfg.epoch_ms), ks, log);
    int failures = 0;
    for (const auto& o : r.outcomes) {
        if (o.status == Status::failure) {
            ++failures;
            EXPECT_EQ(o.error_kind, ErrorKind::expired_timestamp);
        }
    }
    EXPECT_EQ(failures, 1);
    EXPECT_EQ(log.size(), 99u);
    // The expired request's digest never reaches the log.
    std::set<Digest32> logged;
    for (std::uint64_t i = 0; i < log.size(); ++i) logged.insert(log.entry(i).manifest_digest);
    for (const auto& req : r.batches[0]) {
        if (req.attack) EXPECT_FALSE(logged.contains(digest(canonical_decode(req.encoded))));
    }
}

TEST(RunPipeline, ForgedRequestsRejectedAtVerify) {
    auto cfg = small({200});
    cfg.invalid_fraction = 0.1;
    cfg.adversary_mix = {{AttackKind::forged_signature, 1.0}};
    const auto r = run_pipeline(cfg);
    int forged = 0;
    for (const auto& o : r.outcomes) {
        if (!o.attack) continue;
        ++forged;
        EXPECT_EQ(o.error_kind, ErrorKind::signature_invalid);
        EXPECT_EQ(o.exec_time_ms, 0.0);
    }
    EXPECT_EQ(forged, 20);
    EXPECT_EQ(r.scales[0].executions, 180u);
}

TEST(RunPipeline, RevocationScenario) {
    auto cfg = small({100, 400});
    cfg.adversary_mix = {{AttackKind::revoked_key_use, 0.5}, {AttackKind::forged_signature, 0.5}};
    cfg.revoke_at_scale = 1;
    const auto r = run_pipeline(cfg);
    EXPECT_FALSE(r.scales[0].revocation_active);
    EXPECT_TRUE(r.scales[1].revocation_active);
    EXPECT_EQ(r.scales[0].failures_by_kind.count("key-revoked"), 0u);
    EXPECT_EQ(r.scales[1].failures_by_kind.at("key-revoked"), 40u);
    for (const auto& o : r.outcomes) {
        if (o.scale == 400 && o.status == Status::success) EXPECT_EQ(o.key_id, "dev-k1");
    }
}

TEST(RunPipeline, ReproducibleOutcomes) {
    auto cfg = small();
    cfg.jitter_epsilon_ms = 2.0;
    cfg.workers = 3;
    const auto a = run_pipeline(cfg);
    cfg.workers = 1;
    const auto b = run_pipeline(cfg);
    EXPECT_EQ(a.outcomes, b.outcomes);
    EXPECT_EQ(a.evidence.size(), b.evidence.size());
    std::ostringstream x, y;
    write_outcomes_csv(x, a.outcomes);
    write_outcomes_csv(y, b.outcomes);
    EXPECT_EQ(x.str(), y.str());
}

TEST(RunPipeline, OutputsWritten) {
    testutil::TempDir dir;
    const auto r = run_pipeline(small({100}));
    write_run_outputs(r, dir.path());
    for (const char* f : {"outcomes.csv", "metrics.csv", "evidence.ndjson", "log_growth.csv", "run-report.json"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    // Times are stored with six decimals, so compare the re-serialized text.
    const std::string text = testutil::slurp(dir / "outcomes.csv");
    std::istringstream in(text);
    const auto back = read_outcomes_csv(in, "outcomes.csv");
    ASSERT_EQ(back.size(), r.outcomes.size());
    std::ostringstream again;
    write_outcomes_csv(again, back);
    EXPECT_EQ(again.str(), text);
    EXPECT_NE(run_report_json(r).find("\"seed\""), std::string::npos);
}

TEST(WorkloadFile, ParsesAndReportsLines) {
    const auto cfg = parse_workload(R"(sizes: [10, 20]
invalid_fraction: 0.25
adversary_mix:
  forged-signature: 0.5
  revoked-key-use: 0.5
revoke_at_scale: 1
seed: 7
backends:
  - id: a
    base_ms: 1
  - id: b
audit:
  p: 0.5
)",
                                    "w.yaml");
    EXPECT_EQ(cfg.sizes, (std::vector<std::uint64_t>{10, 20}));
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.backends.size(), 2u);
    EXPECT_EQ(cfg.audit_probability, 0.5);
    EXPECT_EQ(cfg.revoke_at_scale, 1u);

    auto error_of = [](const std::string& text) -> std::string {
        try {
            parse_workload(text, "w.yaml");
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "no error";
    };
    EXPECT_NE(error_of("sizes: [1]\nbogus: 1\n").find("w.yaml:2:"), std::string::npos);
    EXPECT_NE(error_of("adversary_mix:\n  nonsense: 1\n").find("w.yaml:2:"), std::string::npos);
    EXPECT_NE(error_of("sizes: [5, 5]\n").find("increasing"), std::string::npos);
    EXPECT_NE(error_of("adversary_mix:\n  revoked-key-use: 1\n").find("revoke_at_scale"), std::string::npos);
    EXPECT_NE(error_of("adversary_mix:\n  forged-signature: 0.4\n").find("sum to 1"), std::string::npos);
    EXPECT_NE(error_of("sizes: [a]\n").find("w.yaml:1:"), std::string::npos);
}

TEST(WorkloadFile, RelativePolicyResolvedAgainstConfig) {
    testutil::TempDir dir;
    testutil::spit(dir / "policy.yaml", default_policy_yaml(60000));
    testutil::spit(dir / "w.yaml", "sizes: [100]\npolicy: policy.yaml\n");
    const auto cfg = load_workload(dir / "w.yaml");
    EXPECT_EQ(cfg.policy_path, dir / "policy.yaml");
    EXPECT_EQ(run_pipeline(cfg).outcomes.size(), 100u);
    EXPECT_THROW(load_workload(dir / "missing.yaml"), ConfigError);
}
