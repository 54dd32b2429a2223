#pragma once

#include <stdexcept>
#include <string>

namespace eto {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define ETO_DEFINE_ERROR(NAME)                                              \
    class NAME : public Error {                                             \
    public:                                                                 \
        explicit NAME(const std::string& what) : Error(#NAME ": " + what) {} \
    }

ETO_DEFINE_ERROR(NonFiniteValue);
ETO_DEFINE_ERROR(DuplicateValues);
ETO_DEFINE_ERROR(NotMember);
ETO_DEFINE_ERROR(InsufficientSamples);
ETO_DEFINE_ERROR(KindMismatch);
ETO_DEFINE_ERROR(DimensionMismatch);
ETO_DEFINE_ERROR(NonPSDCovariance);
ETO_DEFINE_ERROR(EmptyPool);
ETO_DEFINE_ERROR(TiedArgmax);
ETO_DEFINE_ERROR(UnsupportedObservable);
ETO_DEFINE_ERROR(NonConvergence);
ETO_DEFINE_ERROR(WeightSumViolation);
ETO_DEFINE_ERROR(LengthMismatch);
ETO_DEFINE_ERROR(ThresholdTie);
ETO_DEFINE_ERROR(LinkNotInvertible);
ETO_DEFINE_ERROR(OutOfRange);
ETO_DEFINE_ERROR(BudgetTooSmall);
ETO_DEFINE_ERROR(SpaceTooLarge);
ETO_DEFINE_ERROR(HorizonTooLarge);
ETO_DEFINE_ERROR(NegativeDeltaU);
ETO_DEFINE_ERROR(UnknownFigure);

#undef ETO_DEFINE_ERROR

/// Configuration file errors carry the offending line for diagnostics.
class ConfigParse : public Error {
public:
    ConfigParse(int line, const std::string& what)
        : Error("ConfigParse: line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

}  // namespace eto
