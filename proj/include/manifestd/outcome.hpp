#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "manifestd/policy.hpp"

namespace manifestd {

enum class ErrorKind { signature_invalid, key_revoked, expired_timestamp, policy_violation, malformed_encoding };

std::string_view to_string(ErrorKind k);
ErrorKind error_kind_from_string(std::string_view s);

// Rejections raised by signature verification, as opposed to the ones the
// policy stage raises before signing.
inline bool is_verification_failure(ErrorKind k) {
    return k == ErrorKind::signature_invalid || k == ErrorKind::key_revoked;
}

enum class AttackKind { expired_timestamp, forged_signature, malformed_manifest, revoked_key_use };

std::string_view to_string(AttackKind k);
AttackKind attack_kind_from_string(std::string_view s);

enum class Status { success, failure };

// One processed request. status == failure iff error_kind is set;
// severity == block implies failure.
struct ExecutionOutcome {
    std::uint64_t scale = 0;
    std::uint64_t request_index = 0;
    std::string backend_id;
    std::string key_id;
    policy::Severity severity = policy::Severity::ok;
    Status status = Status::success;
    std::optional<ErrorKind> error_kind;
    double verify_time_ms = 0;
    double exec_time_ms = 0;
    std::uint64_t output_bytes = 0;
    double timestamp = 0;
    std::optional<AttackKind> attack;

    friend bool operator==(const ExecutionOutcome&, const ExecutionOutcome&) = default;
};

// CSV with header row:
// scale,request_index,backend_id,key_id,severity,status,error_kind,
// verify_time_ms,exec_time_ms,output_bytes,timestamp,attack
void write_outcomes_csv(std::ostream& out, std::span<const ExecutionOutcome> rows);
std::vector<ExecutionOutcome> read_outcomes_csv(std::istream& in, std::string_view origin = "<outcomes>");

}  // namespace manifestd
