#include "manifestd/policy.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "manifestd/error.hpp"
#include "yaml_util.hpp"

namespace manifestd::policy {

namespace {

const FieldValue* find_field(const Manifest& m, Partition partition, const std::string& field) {
    if (partition != Partition::model) {
        if (auto it = m.user_fields().find(field); it != m.user_fields().end()) return &it->second;
    }
    if (partition != Partition::user) {
        if (auto it = m.model_fields().find(field); it != m.model_fields().end()) return &it->second;
    }
    return nullptr;
}

struct RuleContext {
    const Manifest& manifest;
    const PolicySet& policy;
    std::uint64_t now_ms;
    std::size_t encoded_size;
};

bool rule_holds(const RuleParams& params, const RuleContext& ctx) {
    const Manifest& m = ctx.manifest;
    return std::visit(
        [&](const auto& p) -> bool {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RequiredField>) {
                return find_field(m, p.partition, p.field) != nullptr;
            } else if constexpr (std::is_same_v<T, FieldPattern>) {
                const FieldValue* v = find_field(m, p.partition, p.field);
                const auto* s = v ? std::get_if<std::string>(v) : nullptr;
                return s != nullptr && std::regex_match(*s, *p.compiled);
            } else if constexpr (std::is_same_v<T, ValueRange>) {
                const FieldValue* v = find_field(m, p.partition, p.field);
                if (v == nullptr) return false;
                double x;
                if (const auto* i = std::get_if<std::int64_t>(v)) {
                    x = static_cast<double>(*i);
                } else if (const auto* d = std::get_if<double>(v)) {
                    x = *d;
                } else {
                    return false;
                }
                return x >= p.min && x <= p.max;
            } else if constexpr (std::is_same_v<T, MaxFieldCount>) {
                return m.user_fields().size() + m.model_fields().size() <= p.max_fields;
            } else if constexpr (std::is_same_v<T, MaxEncodingSize>) {
                return ctx.encoded_size <= p.max_bytes;
            } else if constexpr (std::is_same_v<T, ToolAllowlist>) {
                return std::find(p.tools.begin(), p.tools.end(), m.tool_id()) != p.tools.end();
            } else {
                const std::uint64_t ts = m.timestamp();
                if (ts > ctx.now_ms) return ts - ctx.now_ms <= ctx.policy.clock_skew_ms();
                return ctx.now_ms - ts <= ctx.policy.epoch_ms();
            }
        },
        params);
}

Partition partition_from_string(std::string_view s, std::string_view origin, const YAML::Mark& mark) {
    if (s == "user") return Partition::user;
    if (s == "model") return Partition::model;
    if (s == "any") return Partition::any;
    detail::config_fail(origin, mark, "partition must be user, model or any");
}

}  // namespace

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::ok: return "ok";
        case Severity::warn: return "warn";
        case Severity::block: return "block";
    }
    return "block";
}

Severity severity_from_string(std::string_view s) {
    if (s == "ok") return Severity::ok;
    if (s == "warn") return Severity::warn;
    if (s == "block") return Severity::block;
    throw ConfigError("unknown severity '" + std::string(s) + "'");
}

std::string_view to_string(RuleKind k) {
    switch (k) {
        case RuleKind::required_field: return "required-field";
        case RuleKind::field_pattern: return "field-pattern";
        case RuleKind::value_range: return "value-range";
        case RuleKind::max_field_count: return "max-field-count";
        case RuleKind::max_encoding_size: return "max-encoding-size";
        case RuleKind::tool_allowlist: return "tool-allowlist";
        case RuleKind::freshness_window: return "freshness-window";
    }
    return "unknown";
}

PolicyRule make_field_pattern(std::string rule_id, Partition partition, std::string field, std::string pattern,
                              Severity severity) {
    FieldPattern p{partition, std::move(field), pattern, nullptr};
    try {
        p.compiled = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw ConfigError("rule '" + rule_id + "': invalid pattern: " + e.what());
    }
    return PolicyRule{std::move(rule_id), std::move(p), severity};
}

PolicySet::PolicySet(std::vector<PolicyRule> rules, std::uint64_t epoch_ms, std::uint64_t clock_skew_ms)
    : rules_(std::move(rules)), epoch_ms_(epoch_ms), clock_skew_ms_(clock_skew_ms) {
    if (epoch_ms_ == 0) throw ConfigError("epoch_ms must be positive");
    std::set<std::string> seen;
    for (const auto& r : rules_) {
        if (r.rule_id.empty()) throw ConfigError("rule id must be nonempty");
        if (!seen.insert(r.rule_id).second) throw ConfigError("duplicate rule id '" + r.rule_id + "'");
        if (r.severity_on_fail == Severity::ok) {
            throw ConfigError("rule '" + r.rule_id + "': failure severity must be warn or block");
        }
        if (const auto* fp = std::get_if<FieldPattern>(&r.params); fp && !fp->compiled) {
            throw ConfigError("rule '" + r.rule_id + "': pattern not compiled");
        }
        if (const auto* vr = std::get_if<ValueRange>(&r.params);
            vr && !(std::isfinite(vr->min) && std::isfinite(vr->max) && vr->min <= vr->max)) {
            throw ConfigError("rule '" + r.rule_id + "': value-range needs finite min <= max");
        }
        if (const auto* rf = std::get_if<RequiredField>(&r.params); rf && rf->field.empty()) {
            throw ConfigError("rule '" + r.rule_id + "': field must be nonempty");
        }
    }
}

PolicySet PolicySet::with_rule(PolicyRule rule) const {
    auto rules = rules_;
    rules.push_back(std::move(rule));
    return PolicySet(std::move(rules), epoch_ms_, clock_skew_ms_);
}

bool ComplianceReport::failed_kind(RuleKind kind) const {
    return std::any_of(failed_rules.begin(), failed_rules.end(),
                       [kind](const FailedRule& f) { return f.kind == kind; });
}

ComplianceReport evaluate(const Manifest& m, const PolicySet& ps, std::uint64_t now_ms) {
    const bool needs_size = std::any_of(ps.rules().begin(), ps.rules().end(), [](const PolicyRule& r) {
        return r.kind() == RuleKind::max_encoding_size;
    });
    const RuleContext ctx{m, ps, now_ms, needs_size ? canonical_encode(m).size() : 0};

    ComplianceReport report;
    for (const auto& rule : ps.rules()) {
        if (rule_holds(rule.params, ctx)) continue;
        report.failed_rules.push_back(FailedRule{rule.rule_id, rule.kind(), rule.severity_on_fail});
        report.severity = std::max(report.severity, rule.severity_on_fail);
    }
    report.passed = report.severity != Severity::block;
    return report;
}

double pass_probability(std::span<const double> rule_pass_rates) {
    double p = 1.0;
    for (double r : rule_pass_rates) {
        if (!(r >= 0.0 && r <= 1.0)) throw DomainError("rule pass rate outside [0, 1]");
        p *= r;
    }
    return p;
}

PolicySet parse_policy(std::string_view text, std::string_view origin) {
    using detail::config_fail;
    using detail::yaml_as;
    using detail::yaml_require;

    const YAML::Node root = detail::parse_yaml(text, origin);
    if (!root.IsMap()) config_fail(origin, root.Mark(), "policy must be a mapping");

    const auto epoch = yaml_as<std::uint64_t>(yaml_require(root, "epoch_ms", origin), origin, "epoch_ms");
    if (epoch == 0) config_fail(origin, root["epoch_ms"].Mark(), "epoch_ms must be positive");
    std::uint64_t skew = kDefaultClockSkewMs;
    if (root["clock_skew_ms"]) skew = yaml_as<std::uint64_t>(root["clock_skew_ms"], origin, "clock_skew_ms");

    std::vector<PolicyRule> rules;
    std::set<std::string> ids;
    if (const YAML::Node list = root["rules"]) {
        if (!list.IsSequence()) config_fail(origin, list.Mark(), "rules must be a list");
        for (const YAML::Node& node : list) {
            if (!node.IsMap()) config_fail(origin, node.Mark(), "rule must be a mapping");
            const auto id = yaml_as<std::string>(yaml_require(node, "id", origin), origin, "id");
            if (!ids.insert(id).second) config_fail(origin, node["id"].Mark(), "duplicate rule id '" + id + "'");
            const auto kind = yaml_as<std::string>(yaml_require(node, "kind", origin), origin, "kind");
            Severity severity = Severity::block;
            if (node["severity"]) {
                const auto s = yaml_as<std::string>(node["severity"], origin, "severity");
                if (s != "warn" && s != "block") {
                    config_fail(origin, node["severity"].Mark(), "severity must be warn or block");
                }
                severity = severity_from_string(s);
            }
            Partition partition = Partition::any;
            if (node["partition"]) {
                partition = partition_from_string(yaml_as<std::string>(node["partition"], origin, "partition"),
                                                  origin, node["partition"].Mark());
            }
            auto field = [&] { return yaml_as<std::string>(yaml_require(node, "field", origin), origin, "field"); };

            if (kind == "required-field") {
                rules.push_back({id, RequiredField{partition, field()}, severity});
            } else if (kind == "field-pattern") {
                const auto pattern = yaml_as<std::string>(yaml_require(node, "pattern", origin), origin, "pattern");
                try {
                    rules.push_back(make_field_pattern(id, partition, field(), pattern, severity));
                } catch (const ConfigError& e) {
                    config_fail(origin, node["pattern"].Mark(), e.what());
                }
            } else if (kind == "value-range") {
                const auto lo = yaml_as<double>(yaml_require(node, "min", origin), origin, "min");
                const auto hi = yaml_as<double>(yaml_require(node, "max", origin), origin, "max");
                if (!(lo <= hi)) config_fail(origin, node.Mark(), "value-range needs min <= max");
                rules.push_back({id, ValueRange{partition, field(), lo, hi}, severity});
            } else if (kind == "max-field-count") {
                rules.push_back({id,
                                 MaxFieldCount{yaml_as<std::size_t>(yaml_require(node, "max", origin), origin, "max")},
                                 severity});
            } else if (kind == "max-encoding-size") {
                rules.push_back(
                    {id, MaxEncodingSize{yaml_as<std::size_t>(yaml_require(node, "max_bytes", origin), origin,
                                                              "max_bytes")},
                     severity});
            } else if (kind == "tool-allowlist") {
                const YAML::Node tools = yaml_require(node, "tools", origin);
                if (!tools.IsSequence()) config_fail(origin, tools.Mark(), "tools must be a list");
                rules.push_back({id, ToolAllowlist{yaml_as<std::vector<std::string>>(tools, origin, "tools")},
                                 severity});
            } else if (kind == "freshness-window") {
                rules.push_back({id, FreshnessWindow{}, severity});
            } else {
                config_fail(origin, node["kind"].Mark(), "unknown rule kind '" + kind + "'");
            }
        }
    }
    return PolicySet(std::move(rules), epoch, skew);
}

PolicySet load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open policy file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_policy(ss.str(), path.string());
}

}  // namespace manifestd::policy
