#include "manifestd/outcome.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "manifestd/error.hpp"

namespace manifestd {

namespace {

constexpr std::string_view kHeader =
    "scale,request_index,backend_id,key_id,severity,status,error_kind,verify_time_ms,exec_time_ms,"
    "output_bytes,timestamp,attack";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

void check_cell(const std::string& s) {
    if (s.find_first_of(",\n\r\"") != std::string::npos) throw EncodingError("CSV cell contains a separator: " + s);
}

}  // namespace

std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::signature_invalid: return "signature-invalid";
        case ErrorKind::key_revoked: return "key-revoked";
        case ErrorKind::expired_timestamp: return "expired-timestamp";
        case ErrorKind::policy_violation: return "policy-violation";
        case ErrorKind::malformed_encoding: return "malformed-encoding";
    }
    return "policy-violation";
}

ErrorKind error_kind_from_string(std::string_view s) {
    if (s == "signature-invalid") return ErrorKind::signature_invalid;
    if (s == "key-revoked") return ErrorKind::key_revoked;
    if (s == "expired-timestamp") return ErrorKind::expired_timestamp;
    if (s == "policy-violation") return ErrorKind::policy_violation;
    if (s == "malformed-encoding") return ErrorKind::malformed_encoding;
    throw EncodingError("unknown error kind '" + std::string(s) + "'");
}

std::string_view to_string(AttackKind k) {
    switch (k) {
        case AttackKind::expired_timestamp: return "expired-timestamp";
        case AttackKind::forged_signature: return "forged-signature";
        case AttackKind::malformed_manifest: return "malformed-manifest";
        case AttackKind::revoked_key_use: return "revoked-key-use";
    }
    return "forged-signature";
}

AttackKind attack_kind_from_string(std::string_view s) {
    if (s == "expired-timestamp") return AttackKind::expired_timestamp;
    if (s == "forged-signature") return AttackKind::forged_signature;
    if (s == "malformed-manifest") return AttackKind::malformed_manifest;
    if (s == "revoked-key-use") return AttackKind::revoked_key_use;
    throw ConfigError("unknown attack kind '" + std::string(s) + "'");
}

void write_outcomes_csv(std::ostream& out, std::span<const ExecutionOutcome> rows) {
    out << kHeader << '\n';
    char nums[160];
    for (const auto& r : rows) {
        check_cell(r.backend_id);
        check_cell(r.key_id);
        out << r.scale << ',' << r.request_index << ',' << r.backend_id << ',' << r.key_id << ','
            << policy::to_string(r.severity) << ',' << (r.status == Status::success ? "success" : "failure") << ','
            << (r.error_kind ? to_string(*r.error_kind) : std::string_view{}) << ',';
        std::snprintf(nums, sizeof nums, "%.6f,%.6f,%llu,%.6f", r.verify_time_ms, r.exec_time_ms,
                      static_cast<unsigned long long>(r.output_bytes), r.timestamp);
        out << nums << ',' << (r.attack ? to_string(*r.attack) : std::string_view{}) << '\n';
    }
}

std::vector<ExecutionOutcome> read_outcomes_csv(std::istream& in, std::string_view origin) {
    std::string line;
    std::size_t line_no = 1;
    auto fail = [&](const std::string& msg) -> ExecutionOutcome {
        throw EncodingError(std::string(origin) + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (!std::getline(in, line)) throw EncodingError(std::string(origin) + ": empty outcomes file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) throw EncodingError(std::string(origin) + ":1: unexpected header");

    std::vector<ExecutionOutcome> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 12) {
            fail("expected 12 columns, found " + std::to_string(cells.size()));
        }
        ExecutionOutcome o;
        try {
            o.scale = std::stoull(cells[0]);
            o.request_index = std::stoull(cells[1]);
            o.backend_id = cells[2];
            o.key_id = cells[3];
            o.severity = policy::severity_from_string(cells[4]);
            if (cells[5] == "success") {
                o.status = Status::success;
            } else if (cells[5] == "failure") {
                o.status = Status::failure;
            } else {
                fail("bad status '" + cells[5] + "'");
            }
            if (!cells[6].empty()) o.error_kind = error_kind_from_string(cells[6]);
            o.verify_time_ms = std::stod(cells[7]);
            o.exec_time_ms = std::stod(cells[8]);
            o.output_bytes = std::stoull(cells[9]);
            o.timestamp = std::stod(cells[10]);
            if (!cells[11].empty()) o.attack = attack_kind_from_string(cells[11]);
        } catch (const std::logic_error& e) {
            fail(std::string("bad number: ") + e.what());
        } catch (const Error& e) {
            fail(e.what());
        }
        if ((o.status == Status::failure) != o.error_kind.has_value()) fail("status and error_kind disagree");
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace manifestd
