#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "manifestd/manifest.hpp"

namespace manifestd::policy {

// Ordered: ok < warn < block.
enum class Severity { ok = 0, warn = 1, block = 2 };

std::string_view to_string(Severity s);
Severity severity_from_string(std::string_view s);

enum class Partition { user, model, any };

struct RequiredField {
    Partition partition = Partition::any;
    std::string field;
};

// Full-match regex over a string field. Absent or non-string fields fail.
struct FieldPattern {
    Partition partition = Partition::any;
    std::string field;
    std::string pattern;
    std::shared_ptr<const std::regex> compiled;
};

// Inclusive numeric bounds. Absent or non-numeric fields fail.
struct ValueRange {
    Partition partition = Partition::any;
    std::string field;
    double min;
    double max;
};

struct MaxFieldCount {
    std::size_t max_fields;
};

struct MaxEncodingSize {
    std::size_t max_bytes;
};

struct ToolAllowlist {
    std::vector<std::string> tools;
};

// Uses the owning PolicySet's epoch and clock-skew allowance.
struct FreshnessWindow {};

using RuleParams = std::variant<RequiredField, FieldPattern, ValueRange, MaxFieldCount, MaxEncodingSize,
                                ToolAllowlist, FreshnessWindow>;

enum class RuleKind {
    required_field,
    field_pattern,
    value_range,
    max_field_count,
    max_encoding_size,
    tool_allowlist,
    freshness_window,
};

std::string_view to_string(RuleKind k);

struct PolicyRule {
    std::string rule_id;
    RuleParams params;
    Severity severity_on_fail = Severity::block;

    RuleKind kind() const { return static_cast<RuleKind>(params.index()); }
};

PolicyRule make_field_pattern(std::string rule_id, Partition partition, std::string field, std::string pattern,
                              Severity severity);

inline constexpr std::uint64_t kDefaultClockSkewMs = 2000;

// Immutable after construction. Rule ids are unique, epoch is positive and
// rule parameters are well-formed for their kind.
class PolicySet {
public:
    PolicySet(std::vector<PolicyRule> rules, std::uint64_t epoch_ms,
              std::uint64_t clock_skew_ms = kDefaultClockSkewMs);

    const std::vector<PolicyRule>& rules() const { return rules_; }
    std::uint64_t epoch_ms() const { return epoch_ms_; }
    std::uint64_t clock_skew_ms() const { return clock_skew_ms_; }

    // Copy with one more rule appended.
    PolicySet with_rule(PolicyRule rule) const;

private:
    std::vector<PolicyRule> rules_;
    std::uint64_t epoch_ms_;
    std::uint64_t clock_skew_ms_;
};

struct FailedRule {
    std::string rule_id;
    RuleKind kind;
    Severity severity;

    friend bool operator==(const FailedRule&, const FailedRule&) = default;
};

struct ComplianceReport {
    bool passed = true;
    Severity severity = Severity::ok;
    std::vector<FailedRule> failed_rules;

    bool failed_kind(RuleKind kind) const;

    friend bool operator==(const ComplianceReport&, const ComplianceReport&) = default;
};

// Evaluates every rule (no short-circuit). passed is the conjunction of the
// block-severity rules; warn failures are recorded but do not reject.
ComplianceReport evaluate(const Manifest& m, const PolicySet& ps, std::uint64_t now_ms);

// Probability that all rules pass when they fail independently.
double pass_probability(std::span<const double> rule_pass_rates);

// Policy files are YAML:
//   epoch_ms: 60000
//   clock_skew_ms: 2000          # optional
//   rules:
//     - id: fresh
//       kind: freshness-window
//       severity: block
//     - id: tools
//       kind: tool-allowlist
//       tools: [search, calc]
// Errors carry file:line:column.
PolicySet parse_policy(std::string_view text, std::string_view origin = "<policy>");
PolicySet load_policy(const std::filesystem::path& path);

}  // namespace manifestd::policy
