#pragma once

#include <span>
#include <vector>

#include "qarrival/momentum_grid.hpp"
#include "qarrival/units.hpp"

namespace qarrival {

enum class Direction { plus, minus };

inline double direction_sign(Direction d) { return d == Direction::plus ? 1.0 : -1.0; }

// Directed wave packet in momentum representation: amplitudes[i] = psi~(p_i).
// Every grid momentum has the sign of `direction` (the Theta(+-P) projection);
// packets from build_gaussian are normalized, transmitted packets are not.
struct WavePacket {
    MomentumGrid grid;
    std::vector<cdouble> amplitudes;
    Direction direction = Direction::plus;
    UnitSystem units;

    std::size_t size() const { return amplitudes.size(); }

    struct ValidationPolicy {
        bool require_unit_norm = false;
        double norm_tolerance = 1e-10;
        // |psi~(p_edge)| / |p_edge| bound at the grid end nearest p = 0,
        // enforcing the vanishing-faster-than-p behaviour for normalized
        // packets. Constant-amplitude packets score O(1) here, admissible
        // Gaussians O(1e-4) or less.
        double low_momentum_ratio_max = 1e-2;
    };

    void validate(const ValidationPolicy& policy) const;
    void validate() const { validate(ValidationPolicy{}); }
};

struct GaussianSpec {
    double p0 = 0.0;
    double sigma_p = 1.0;
    double x0 = 0.0;           // enters as the phase e^{-i p x0 / hbar}
    UnitSystem units;
    double directionality_threshold = 5.0;   // require |p0| >= threshold * sigma_p
};

struct GaussianDiagnostics {
    double truncated_mass = 0.0;   // probability discarded by the directed cut
    double raw_norm = 0.0;         // discrete norm before renormalization
};

// Sample a minimum-uncertainty Gaussian onto a directed grid, truncate to the
// half-line, renormalize. Throws DirectionalityViolation when the discarded
// mass exceeds 1e-8 (or the p0/sigma_p threshold is missed), EmptyGrid when
// the grid does not cover the packet.
WavePacket build_gaussian(const GaussianSpec& spec, const MomentumGrid& grid,
                          GaussianDiagnostics* diagnostics = nullptr);

// <E,+-|psi> = (m/2E)^{1/4} psi~(+-sqrt(2mE)), cubic off-node lookup.
cdouble energy_amplitude(const WavePacket& packet, double energy);

// Discrete <psi|psi>.
double total_probability(const WavePacket& packet);

// Renormalized same-grid superposition of equal-direction packets.
WavePacket superpose(std::span<const WavePacket> packets, std::span<const double> weights);

// Discrete moments used by auto-windowing and the moment report.
// Position moments come from x^ = i hbar d/dp (central differences).
struct PacketMoments {
    double norm = 0.0;
    double p_mean = 0.0;
    double p_spread = 0.0;
    double inv_p_mean = 0.0;
    double x_mean = 0.0;
    double x_spread = 0.0;
    double energy_mean = 0.0;
    double energy_spread = 0.0;
};

PacketMoments packet_moments(const WavePacket& packet);

} // namespace qarrival
