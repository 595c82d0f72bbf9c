#pragma once

#include <stdexcept>
#include <string>

namespace selfbias {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SELFBIAS_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(what) {}      \
    }

// Scoring
SELFBIAS_DEFINE_ERROR(OffGridScore);
SELFBIAS_DEFINE_ERROR(OutOfRange);
SELFBIAS_DEFINE_ERROR(UnparseableOutput);
SELFBIAS_DEFINE_ERROR(MissingDimension);
SELFBIAS_DEFINE_ERROR(OverallMismatch);
SELFBIAS_DEFINE_ERROR(EmptyInput);

// Pairing
SELFBIAS_DEFINE_ERROR(MissingScore);
SELFBIAS_DEFINE_ERROR(InsufficientHighContrastPairs);

// Judging
SELFBIAS_DEFINE_ERROR(EmptyField);
SELFBIAS_DEFINE_ERROR(AmbiguousOutput);
SELFBIAS_DEFINE_ERROR(BackendFailure);
SELFBIAS_DEFINE_ERROR(StoreCorruption);

// Statistics
SELFBIAS_DEFINE_ERROR(InvalidParams);
SELFBIAS_DEFINE_ERROR(DegenerateVariance);
SELFBIAS_DEFINE_ERROR(DegenerateInput);
SELFBIAS_DEFINE_ERROR(PerfectExpectedAgreement);
SELFBIAS_DEFINE_ERROR(NoData);
SELFBIAS_DEFINE_ERROR(ZeroBaseline);

// Pipeline
SELFBIAS_DEFINE_ERROR(MissingTaskLabel);
SELFBIAS_DEFINE_ERROR(MissingBaseline);
SELFBIAS_DEFINE_ERROR(MissingPhase);
SELFBIAS_DEFINE_ERROR(ConfigError);

#undef SELFBIAS_DEFINE_ERROR

} // namespace selfbias
