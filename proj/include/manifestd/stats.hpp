#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "manifestd/outcome.hpp"

namespace manifestd::stats {

using Point = std::pair<double, double>;

struct RegressionFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
    double slope_stderr = 0;
    std::size_t n = 0;
};

// Ordinary least squares. Throws DegenerateInput with fewer than two
// distinct x values.
RegressionFit linear_fit(std::span<const Point> points);

// linear_fit over (ln x, ln y). Throws DomainError on nonpositive values.
RegressionFit loglog_fit(std::span<const Point> points);

// 1 - 1/2 sum |p_i - 1/k|. Throws DomainError unless the p_i are
// nonnegative and sum to 1 within 1e-9.
double fairness_index(std::span<const double> probabilities);
double key_balance_index(std::span<const double> probabilities);

// (1/k) sum (p_i - 1/k)^2.
double selection_variance(std::span<const double> probabilities);

// Bits; 0 log 0 = 0.
double shannon_entropy(std::span<const double> probabilities);

// Log-log slopes over (N, value) series with positive entries.
double entropy_elasticity(std::span<const Point> series);
double variance_exponent(std::span<const Point> series);

struct ChiSquare {
    double statistic = 0;
    std::size_t dof = 0;
    double cramers_v = 0;
};

ChiSquare chi_square_gof(std::span<const double> observed, std::span<const double> expected);

// (N, E/N) per point. Throws DomainError for N <= 0.
std::vector<Point> error_density(std::span<const Point> series);

struct SuccessRates {
    std::vector<Point> series;  // (N, P_s), scales without outcomes omitted
    double slope = 0;           // of P_s against N; 0 with fewer than two scales
};

SuccessRates success_rate_series(std::span<const ExecutionOutcome> outcomes);

std::vector<double> to_probabilities(std::span<const double> counts);

struct StatsReport {
    double fairness = 0;
    double selection_variance = 0;
    std::map<std::string, double> backend_shares;
    double key_balance = 0;
    std::map<std::string, double> key_shares;
    std::optional<double> severity_entropy;
    std::optional<double> entropy_elasticity;
    std::vector<Point> severity_entropy_series;
    std::vector<Point> error_density_series;
    SuccessRates success_rates;
    ChiSquare chi_square;
    std::optional<double> timestamp_variance_exponent;
    std::optional<RegressionFit> loglog_fit;
    std::optional<RegressionFit> scalability_fit;
    std::uint64_t fairness_scale = 0;
    std::uint64_t outcomes = 0;
    std::optional<std::uint64_t> seed;
};

// Backend and key statistics use the largest scale. backend_ids / key_ids
// name categories that may have zero observations; when empty they are
// taken from the outcomes.
StatsReport compute_report(std::span<const ExecutionOutcome> outcomes,
                           std::span<const std::pair<std::uint64_t, std::uint64_t>> log_growth = {},
                           std::vector<std::string> backend_ids = {}, std::vector<std::string> key_ids = {});

std::string to_json(const StatsReport& r);

// Parses the log_growth.csv written by the harness.
std::vector<std::pair<std::uint64_t, std::uint64_t>> read_log_growth_csv(std::istream& in);

}  // namespace manifestd::stats
