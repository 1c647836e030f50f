#pragma once

#include <stdexcept>
#include <string>

namespace qarrival {

// Base for every failure the library reports. CLI maps ConfigInvalid to
// exit code 2 and every other Error to exit code 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define QARRIVAL_ERROR_TYPE(Name)                                  \
    class Name final : public Error {                              \
    public:                                                        \
        explicit Name(const std::string& what) : Error(what) {}    \
    }

QARRIVAL_ERROR_TYPE(DirectionalityViolation);
QARRIVAL_ERROR_TYPE(EmptyGrid);
QARRIVAL_ERROR_TYPE(OutOfSupport);
QARRIVAL_ERROR_TYPE(InvalidPacket);
QARRIVAL_ERROR_TYPE(QuadratureUnresolved);
QARRIVAL_ERROR_TYPE(WindowTooNarrow);
QARRIVAL_ERROR_TYPE(EmptyDistribution);
QARRIVAL_ERROR_TYPE(EvanescentOverflow);
QARRIVAL_ERROR_TYPE(NonFiniteSupport);
QARRIVAL_ERROR_TYPE(GridMismatch);
QARRIVAL_ERROR_TYPE(NotAsymptotic);
QARRIVAL_ERROR_TYPE(AliasingRisk);
QARRIVAL_ERROR_TYPE(StabilityViolation);
QARRIVAL_ERROR_TYPE(ZeroThroughput);
QARRIVAL_ERROR_TYPE(ConfigInvalid);
QARRIVAL_ERROR_TYPE(NumericalFault);

#undef QARRIVAL_ERROR_TYPE

} // namespace qarrival
