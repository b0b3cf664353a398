#include "manifestd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <set>
#include <string>

#include <json.hpp>

#include "manifestd/error.hpp"

namespace manifestd::stats {

namespace {

void check_distribution(std::span<const double> p) {
    if (p.empty()) throw DomainError("empty distribution");
    double sum = 0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("probabilities must be finite and nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("probabilities must sum to 1");
}

double half_l1_from_uniform(std::span<const double> p) {
    check_distribution(p);
    const double u = 1.0 / static_cast<double>(p.size());
    double d = 0;
    for (double v : p) d += std::abs(v - u);
    return 1.0 - 0.5 * d;
}

double loglog_slope(std::span<const Point> series) {
    if (series.size() < 2) throw DomainError("need at least two points");
    return loglog_fit(series).slope;
}

}  // namespace

RegressionFit linear_fit(std::span<const Point> points) {
    const std::size_t n = points.size();
    if (n < 2) throw DegenerateInput("linear_fit needs at least two points");
    double mx = 0, my = 0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (sxx == 0.0) throw DegenerateInput("linear_fit needs two distinct x values");
    RegressionFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (const auto& [x, y] : points) {
        const double r = y - (f.slope * x + f.intercept);
        ss_res += r * r;
    }
    // Constant y is fitted exactly by a flat line.
    f.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    f.slope_stderr = n > 2 ? std::sqrt(ss_res / static_cast<double>(n - 2) / sxx) : 0.0;
    return f;
}

RegressionFit loglog_fit(std::span<const Point> points) {
    std::vector<Point> logs;
    logs.reserve(points.size());
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0)) throw DomainError("loglog_fit needs positive values");
        logs.emplace_back(std::log(x), std::log(y));
    }
    return linear_fit(logs);
}

double fairness_index(std::span<const double> p) { return half_l1_from_uniform(p); }

double key_balance_index(std::span<const double> p) { return half_l1_from_uniform(p); }

double selection_variance(std::span<const double> p) {
    check_distribution(p);
    const double k = static_cast<double>(p.size());
    double s = 0;
    for (double v : p) s += (v - 1.0 / k) * (v - 1.0 / k);
    return s / k;
}

double shannon_entropy(std::span<const double> p) {
    check_distribution(p);
    double h = 0;
    for (double v : p) {
        if (v > 0) h -= v * std::log2(v);
    }
    return std::max(0.0, h);
}

double entropy_elasticity(std::span<const Point> series) { return loglog_slope(series); }

double variance_exponent(std::span<const Point> series) { return loglog_slope(series); }

ChiSquare chi_square_gof(std::span<const double> observed, std::span<const double> expected) {
    if (observed.size() != expected.size()) throw DomainError("observed and expected differ in length");
    if (observed.size() < 2) throw DomainError("chi-square needs at least two categories");
    ChiSquare c;
    double n = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!(expected[i] > 0.0)) throw DomainError("expected counts must be positive");
        if (!(observed[i] >= 0.0)) throw DomainError("observed counts must be nonnegative");
        const double d = observed[i] - expected[i];
        c.statistic += d * d / expected[i];
        n += observed[i];
    }
    c.dof = observed.size() - 1;
    c.cramers_v = n > 0 ? std::clamp(std::sqrt(c.statistic / (n * static_cast<double>(c.dof))), 0.0, 1.0) : 0.0;
    return c;
}

std::vector<Point> error_density(std::span<const Point> series) {
    std::vector<Point> out;
    out.reserve(series.size());
    for (const auto& [n, e] : series) {
        if (!(n > 0.0)) throw DomainError("error_density needs N > 0");
        if (!(e >= 0.0)) throw DomainError("error counts must be nonnegative");
        out.emplace_back(n, e / n);
    }
    return out;
}

SuccessRates success_rate_series(std::span<const ExecutionOutcome> outcomes) {
    std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> by_scale;  // successes, total
    for (const auto& o : outcomes) {
        auto& [ok, total] = by_scale[o.scale];
        ++total;
        if (o.status == Status::success) ++ok;
    }
    SuccessRates r;
    for (const auto& [scale, c] : by_scale) {
        if (c.second == 0) continue;
        r.series.emplace_back(static_cast<double>(scale),
                              static_cast<double>(c.first) / static_cast<double>(c.second));
    }
    if (r.series.size() >= 2) r.slope = linear_fit(r.series).slope;
    return r;
}

std::vector<double> to_probabilities(std::span<const double> counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (!(total > 0.0)) throw DomainError("counts sum to zero");
    std::vector<double> p;
    p.reserve(counts.size());
    for (double c : counts) p.push_back(c / total);
    return p;
}

StatsReport compute_report(std::span<const ExecutionOutcome> outcomes,
                           std::span<const std::pair<std::uint64_t, std::uint64_t>> log_growth,
                           std::vector<std::string> backend_ids, std::vector<std::string> key_ids) {
    if (outcomes.empty()) throw DomainError("no outcomes");
    StatsReport r;
    r.outcomes = outcomes.size();

    std::set<std::uint64_t> scales;
    for (const auto& o : outcomes) scales.insert(o.scale);
    const std::uint64_t top = *scales.rbegin();
    r.fairness_scale = top;

    if (backend_ids.empty()) {
        std::set<std::string> ids;
        for (const auto& o : outcomes) ids.insert(o.backend_id);
        backend_ids.assign(ids.begin(), ids.end());
    }
    if (key_ids.empty()) {
        std::set<std::string> ids;
        for (const auto& o : outcomes) {
            if (!o.key_id.empty()) ids.insert(o.key_id);
        }
        key_ids.assign(ids.begin(), ids.end());
    }

    std::map<std::string, double> backend_counts;
    for (const auto& id : backend_ids) backend_counts[id] = 0;
    std::map<std::string, double> key_counts;
    for (const auto& id : key_ids) key_counts[id] = 0;
    for (const auto& o : outcomes) {
        if (o.scale != top) continue;
        if (auto it = backend_counts.find(o.backend_id); it != backend_counts.end()) it->second += 1;
        if (o.status == Status::success) {
            if (auto it = key_counts.find(o.key_id); it != key_counts.end()) it->second += 1;
        }
    }

    std::vector<double> bc;
    for (const auto& [id, c] : backend_counts) bc.push_back(c);
    const auto bp = to_probabilities(bc);
    r.fairness = fairness_index(bp);
    r.selection_variance = selection_variance(bp);
    {
        std::size_t i = 0;
        for (const auto& [id, c] : backend_counts) r.backend_shares[id] = bp[i++];
    }
    if (bc.size() >= 2) {
        const double total = std::accumulate(bc.begin(), bc.end(), 0.0);
        const std::vector<double> expected(bc.size(), total / static_cast<double>(bc.size()));
        r.chi_square = chi_square_gof(bc, expected);
    }

    std::vector<double> kc;
    for (const auto& [id, c] : key_counts) kc.push_back(c);
    if (!kc.empty() && std::accumulate(kc.begin(), kc.end(), 0.0) > 0) {
        const auto kp = to_probabilities(kc);
        r.key_balance = key_balance_index(kp);
        std::size_t i = 0;
        for (const auto& [id, c] : key_counts) r.key_shares[id] = kp[i++];
    }

    // Per-scale series.
    struct Acc {
        double n = 0;
        double verify_failures = 0;
        std::array<double, 3> severity{};
        double ts_sum = 0, ts_sq = 0;
    };
    std::map<std::uint64_t, Acc> acc;
    for (const auto& o : outcomes) {
        Acc& a = acc[o.scale];
        a.n += 1;
        if (o.error_kind && is_verification_failure(*o.error_kind)) a.verify_failures += 1;
        a.severity[static_cast<std::size_t>(o.severity)] += 1;
        a.ts_sum += o.timestamp;
        a.ts_sq += o.timestamp * o.timestamp;
    }
    std::vector<Point> errors, ts_var;
    for (const auto& [scale, a] : acc) {
        errors.emplace_back(static_cast<double>(scale), a.verify_failures);
        const auto sp = to_probabilities(a.severity);
        r.severity_entropy_series.emplace_back(static_cast<double>(scale), shannon_entropy(sp));
        if (a.n >= 2) {
            const double mean = a.ts_sum / a.n;
            const double var = std::max(0.0, (a.ts_sq - a.n * mean * mean) / (a.n - 1));
            if (var > 0) ts_var.emplace_back(static_cast<double>(scale), var);
        }
    }
    r.error_density_series = error_density(errors);
    r.success_rates = success_rate_series(outcomes);
    r.severity_entropy = r.severity_entropy_series.back().second;

    std::vector<Point> positive_h;
    for (const auto& p : r.severity_entropy_series) {
        if (p.second > 0) positive_h.push_back(p);
    }
    if (positive_h.size() >= 2) r.entropy_elasticity = entropy_elasticity(positive_h);
    if (ts_var.size() >= 2) r.timestamp_variance_exponent = variance_exponent(ts_var);

    std::vector<Point> growth;
    for (const auto& [n, b] : log_growth) {
        if (n > 0 && b > 0) growth.emplace_back(static_cast<double>(n), static_cast<double>(b));
    }
    if (growth.size() >= 2) r.loglog_fit = loglog_fit(growth);

    if (acc.size() >= 2) {
        std::vector<Point> processed;
        for (const auto& [scale, a] : acc) processed.emplace_back(static_cast<double>(scale), a.n);
        r.scalability_fit = linear_fit(processed);
    }
    return r;
}

namespace {

nlohmann::json fit_json(const RegressionFit& f) {
    return {{"slope", f.slope},
            {"intercept", f.intercept},
            {"r_squared", f.r_squared},
            {"slope_stderr", f.slope_stderr},
            {"n", f.n}};
}

nlohmann::json series_json(const std::vector<Point>& s) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [x, y] : s) a.push_back({x, y});
    return a;
}

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string to_json(const StatsReport& r) {
    nlohmann::json j;
    j["fairness"] = r.fairness;
    j["selection_variance"] = r.selection_variance;
    j["backend_shares"] = r.backend_shares;
    j["key_balance"] = r.key_balance;
    j["key_shares"] = r.key_shares;
    j["severity_entropy"] = opt(r.severity_entropy);
    j["severity_entropy_series"] = series_json(r.severity_entropy_series);
    j["entropy_elasticity"] = opt(r.entropy_elasticity);
    j["error_density_series"] = series_json(r.error_density_series);
    j["success_rate_series"] = series_json(r.success_rates.series);
    j["success_rate_slope"] = r.success_rates.slope;
    j["chi_square"] = {{"statistic", r.chi_square.statistic},
                       {"dof", r.chi_square.dof},
                       {"cramers_v", r.chi_square.cramers_v}};
    j["timestamp_variance_exponent"] = opt(r.timestamp_variance_exponent);
    j["loglog_fit"] = r.loglog_fit ? fit_json(*r.loglog_fit) : nlohmann::json(nullptr);
    j["scalability_fit"] = r.scalability_fit ? fit_json(*r.scalability_fit) : nlohmann::json(nullptr);
    j["fairness_scale"] = r.fairness_scale;
    j["outcomes"] = r.outcomes;
    j["seed"] = opt(r.seed);
    return j.dump(2) + "\n";
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> read_log_growth_csv(std::istream& in) {
    std::string line;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    if (!std::getline(in, line) || line.rfind("entries,storage_bytes", 0) != 0) {
        throw EncodingError("log growth file has no header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw EncodingError("bad log growth row '" + line + "'");
        try {
            out.emplace_back(std::stoull(line.substr(0, comma)), std::stoull(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw EncodingError("bad log growth row '" + line + "'");
        }
    }
    return out;
}

}  // namespace manifestd::stats
