#include "manifestd/manifest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "manifestd/error.hpp"

namespace manifestd {

namespace {

void check_field_map(const FieldMap& fields, std::string_view partition) {
    for (const auto& [key, value] : fields) {
        if (key.empty()) throw EncodingError(std::string(partition) + ": empty field key");
        if (!is_valid_utf8(key)) throw EncodingError(std::string(partition) + ": key is not UTF-8");
        if (const auto* s = std::get_if<std::string>(&value); s && !is_valid_utf8(*s)) {
            throw EncodingError(std::string(partition) + "." + key + ": value is not UTF-8");
        }
        if (const auto* d = std::get_if<double>(&value); d && !std::isfinite(*d)) {
            throw EncodingError(std::string(partition) + "." + key + ": non-finite decimal");
        }
    }
}

void append_string(std::string& out, std::string_view s) {
    static constexpr char kDigits[] = "0123456789abcdef";
    out.push_back('"');
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (c == '"' || c == '\\') {
            out.push_back('\\');
            out.push_back(c);
        } else if (u < 0x20 || u == 0x7f) {
            out += "\\u00";
            out.push_back(kDigits[u >> 4]);
            out.push_back(kDigits[u & 0x0f]);
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
}

void append_decimal(std::string& out, double d) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
    if (ec != std::errc{}) throw EncodingError("decimal formatting failed");
    std::string_view text(buf.data(), static_cast<std::size_t>(end - buf.data()));
    out += text;
    // Keep decimals distinguishable from integers after a round trip.
    if (text.find_first_of(".e") == std::string_view::npos) out += ".0";
}

void append_value(std::string& out, const FieldValue& value) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) {
                append_string(out, v);
            } else if constexpr (std::is_same_v<T, bool>) {
                out += v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                out += std::to_string(v);
            } else {
                append_decimal(out, v);
            }
        },
        value);
}

void append_map(std::string& out, const FieldMap& fields) {
    out.push_back('{');
    bool first = true;
    for (const auto& [key, value] : fields) {
        if (!first) out.push_back(',');
        first = false;
        append_string(out, key);
        out.push_back(':');
        append_value(out, value);
    }
    out.push_back('}');
}

FieldMap decode_map(const nlohmann::json& j, std::string_view partition) {
    if (!j.is_object()) throw EncodingError(std::string(partition) + " must be an object");
    FieldMap out;
    for (const auto& [key, value] : j.items()) {
        switch (value.type()) {
            case nlohmann::json::value_t::string:
                out.emplace(key, value.get<std::string>());
                break;
            case nlohmann::json::value_t::boolean:
                out.emplace(key, value.get<bool>());
                break;
            case nlohmann::json::value_t::number_integer:
                out.emplace(key, value.get<std::int64_t>());
                break;
            case nlohmann::json::value_t::number_unsigned: {
                const auto u = value.get<std::uint64_t>();
                if (u > static_cast<std::uint64_t>(INT64_MAX)) {
                    throw EncodingError(std::string(partition) + "." + key + ": integer out of range");
                }
                out.emplace(key, static_cast<std::int64_t>(u));
                break;
            }
            case nlohmann::json::value_t::number_float:
                out.emplace(key, value.get<double>());
                break;
            default:
                throw EncodingError(std::string(partition) + "." + key + ": unsupported value type");
        }
    }
    return out;
}

}  // namespace

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            len = 2;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            len = 3;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3f);
        }
        // Overlong forms, surrogates, out-of-range code points.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
            return false;
        }
        i += len;
    }
    return true;
}

Manifest::Manifest(FieldMap user_fields, FieldMap model_fields, std::uint64_t timestamp_ms,
                   std::string tool_id)
    : user_(std::move(user_fields)),
      model_(std::move(model_fields)),
      timestamp_(timestamp_ms),
      tool_id_(std::move(tool_id)) {
    for (const auto& [key, _] : user_) {
        if (model_.contains(key)) {
            throw DisjointnessViolation("field '" + key + "' present in both user and model partitions");
        }
    }
    if (timestamp_ == 0) throw EncodingError("timestamp must be positive");
    if (!is_valid_utf8(tool_id_)) throw EncodingError("tool_id is not UTF-8");
    check_field_map(user_, "user");
    check_field_map(model_, "model");
}

Manifest Manifest::with_timestamp(std::uint64_t timestamp_ms) const {
    return Manifest(user_, model_, timestamp_ms, tool_id_);
}

std::string canonical_encode(const Manifest& m) {
    std::string out;
    out.reserve(128);
    out += "{\"user\":";
    append_map(out, m.user_fields());
    out += ",\"model\":";
    append_map(out, m.model_fields());
    out += ",\"timestamp\":";
    out += std::to_string(m.timestamp());
    out += ",\"tool_id\":";
    append_string(out, m.tool_id());
    out.push_back('}');
    return out;
}

std::string canonical_encode(const UserView& view) {
    std::string out;
    out += "{\"user\":";
    append_map(out, view.user_fields);
    out += ",\"timestamp\":";
    out += std::to_string(view.timestamp);
    out += ",\"tool_id\":";
    append_string(out, view.tool_id);
    out.push_back('}');
    return out;
}

Manifest canonical_decode(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw EncodingError(std::string("manifest parse error: ") + e.what());
    }
    if (!j.is_object() || j.size() != 4 || !j.contains("user") || !j.contains("model") ||
        !j.contains("timestamp") || !j.contains("tool_id")) {
        throw EncodingError("manifest must have exactly user, model, timestamp, tool_id");
    }
    const auto& ts = j["timestamp"];
    if (!ts.is_number_unsigned()) throw EncodingError("timestamp must be a positive integer");
    if (!j["tool_id"].is_string()) throw EncodingError("tool_id must be a string");

    Manifest m(decode_map(j["user"], "user"), decode_map(j["model"], "model"),
               ts.get<std::uint64_t>(), j["tool_id"].get<std::string>());
    if (canonical_encode(m) != text) throw EncodingError("manifest encoding is not canonical");
    return m;
}

ManifestDigest digest(const Manifest& m) { return sha256(canonical_encode(m)); }

UserView redact_for_user(const Manifest& m) {
    return UserView{m.user_fields(), m.timestamp(), m.tool_id()};
}

EncodingStats byte_entropy(std::span<const std::uint8_t> data) {
    if (data.empty()) throw EmptyEncoding("entropy of an empty encoding is undefined");
    std::array<std::size_t, 256> counts{};
    for (std::uint8_t b : data) ++counts[b];
    const double n = static_cast<double>(data.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    h = std::clamp(h, 0.0, 8.0);
    return EncodingStats{h, 1.0 - h / 8.0};
}

EncodingStats encoding_stats(const Manifest& m) { return byte_entropy(as_bytes(canonical_encode(m))); }

std::vector<Manifest> read_manifest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open manifest file " + path.string());
    std::vector<Manifest> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            out.push_back(canonical_decode(line));
        } catch (const DisjointnessViolation& e) {
            throw DisjointnessViolation(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const EncodingError& e) {
            throw EncodingError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string encode_batch(std::span<const Manifest> batch) {
    std::string out;
    for (const auto& m : batch) {
        out += canonical_encode(m);
        out.push_back('\n');
    }
    return out;
}

}  // namespace manifestd
