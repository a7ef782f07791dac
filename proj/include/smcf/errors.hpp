#pragma once

#include <stdexcept>
#include <string>

namespace smcf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SMCF_ERROR_TYPE(Name)                        \
    struct Name : Error {                            \
        using Error::Error;                          \
    }

SMCF_ERROR_TYPE(AxisOutOfRange);
SMCF_ERROR_TYPE(NonFiniteField);
SMCF_ERROR_TYPE(RankDeficient);
SMCF_ERROR_TYPE(FrameMismatch);
SMCF_ERROR_TYPE(NotNormal);
SMCF_ERROR_TYPE(SeedNotNormal);
SMCF_ERROR_TYPE(NotTransversal);
SMCF_ERROR_TYPE(NonInteger);
SMCF_ERROR_TYPE(Obstructed);
SMCF_ERROR_TYPE(Degenerate);
SMCF_ERROR_TYPE(Unstable);
SMCF_ERROR_TYPE(InsufficientSamples);
SMCF_ERROR_TYPE(NotDiffeomorphism);
SMCF_ERROR_TYPE(NoNearestPoint);
SMCF_ERROR_TYPE(NotGraphLike);
SMCF_ERROR_TYPE(CapExceeded);
SMCF_ERROR_TYPE(FamilyTooShort);
SMCF_ERROR_TYPE(BadDelta);
SMCF_ERROR_TYPE(UnknownGenerator);
SMCF_ERROR_TYPE(ParseError);
SMCF_ERROR_TYPE(ValidationError);

#undef SMCF_ERROR_TYPE

}  // namespace smcf
