#pragma once

#include <stdexcept>
#include <string>

namespace jellium {

// Base of every error the library raises. `kind()` is a stable identifier
// used by the CLI for structured error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }
    // Numerical failures map to exit code 2; everything else is a usage error.
    virtual bool numerical() const noexcept { return false; }

private:
    std::string kind_;
};

class NumericalError : public Error {
public:
    using Error::Error;
    bool numerical() const noexcept override { return true; }
};

#define JELLIUM_DEFINE_ERROR(Name, Base)                                   \
    class Name : public Base {                                            \
    public:                                                               \
        explicit Name(const std::string& what) : Base(#Name, what) {}     \
    }

JELLIUM_DEFINE_ERROR(EmptyErosion, Error);
JELLIUM_DEFINE_ERROR(SingularPoint, Error);
JELLIUM_DEFINE_ERROR(GridTooCoarse, Error);
JELLIUM_DEFINE_ERROR(BadPartition, Error);
JELLIUM_DEFINE_ERROR(OutOfRange, Error);
JELLIUM_DEFINE_ERROR(InvalidParams, Error);
JELLIUM_DEFINE_ERROR(UnsupportedDimension, Error);
JELLIUM_DEFINE_ERROR(NotNeutral, NumericalError);
JELLIUM_DEFINE_ERROR(SolverDiverged, NumericalError);
JELLIUM_DEFINE_ERROR(InfeasibleNeutrality, NumericalError);
JELLIUM_DEFINE_ERROR(NoGoodBoundary, NumericalError);
JELLIUM_DEFINE_ERROR(NeutralityBroken, NumericalError);
JELLIUM_DEFINE_ERROR(CellNotNeutral, NumericalError);

#undef JELLIUM_DEFINE_ERROR

}  // namespace jellium
