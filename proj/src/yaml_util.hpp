#pragma once

#include <string>
#include <string_view>

#include <yaml-cpp/yaml.h>

#include "manifestd/error.hpp"

namespace manifestd::detail {

[[noreturn]] inline void config_fail(std::string_view origin, const YAML::Mark& mark, const std::string& msg) {
    std::string where(origin);
    if (!mark.is_null()) {
        where += ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
    }
    throw ConfigError(where + ": " + msg);
}

inline YAML::Node parse_yaml(std::string_view text, std::string_view origin) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        config_fail(origin, e.mark, e.msg);
    }
}

template <typename T>
T yaml_as(const YAML::Node& node, std::string_view origin, std::string_view what) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        config_fail(origin, node.Mark(), "invalid value for '" + std::string(what) + "'");
    }
}

inline YAML::Node yaml_require(const YAML::Node& parent, const char* key, std::string_view origin) {
    YAML::Node child = parent[key];
    if (!child) config_fail(origin, parent.Mark(), std::string("missing required key '") + key + "'");
    return child;
}

}  // namespace manifestd::detail
