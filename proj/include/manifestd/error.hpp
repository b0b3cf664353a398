#pragma once

#include <stdexcept>
#include <string>

namespace manifestd {

// Base for every error raised by the library. Rejections that are part of
// normal operation (verify, inclusion checks, policy outcomes) are values,
// not exceptions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MANIFESTD_DEFINE_ERROR(Name)         \
    class Name : public Error {              \
    public:                                  \
        using Error::Error;                  \
    }

MANIFESTD_DEFINE_ERROR(DisjointnessViolation);
MANIFESTD_DEFINE_ERROR(EncodingError);
MANIFESTD_DEFINE_ERROR(EmptyEncoding);
MANIFESTD_DEFINE_ERROR(DomainError);
MANIFESTD_DEFINE_ERROR(DegenerateInput);
MANIFESTD_DEFINE_ERROR(DuplicateKeyId);
MANIFESTD_DEFINE_ERROR(UnknownKey);
MANIFESTD_DEFINE_ERROR(KeyRevoked);
MANIFESTD_DEFINE_ERROR(NoUsableKey);
MANIFESTD_DEFINE_ERROR(CryptoError);
MANIFESTD_DEFINE_ERROR(StorageError);
MANIFESTD_DEFINE_ERROR(OutOfRange);
MANIFESTD_DEFINE_ERROR(ConfigError);

#undef MANIFESTD_DEFINE_ERROR

}  // namespace manifestd
