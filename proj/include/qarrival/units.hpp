#pragma once

#include <numbers>

#include "qarrival/errors.hpp"

namespace qarrival {

// Natural units by default (hbar = m = 1); every formula carries the
// symbols explicitly so other unit choices work unchanged.
struct UnitSystem {
    double hbar = 1.0;
    double mass = 1.0;

    double h() const { return 2.0 * std::numbers::pi * hbar; }

    void validate() const {
        if (!(hbar > 0.0)) throw Error("UnitSystem: hbar must be > 0");
        if (!(mass > 0.0)) throw Error("UnitSystem: mass must be > 0");
    }
};

inline constexpr char kVersion[] = "qarrival 0.1.0";

} // namespace qarrival
