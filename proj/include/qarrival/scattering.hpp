#pragma once

#include <vector>

#include "qarrival/arrival.hpp"
#include "qarrival/packet.hpp"

namespace qarrival {

struct PotentialSegment {
    double x_left = 0.0;
    double x_right = 0.0;
    double height = 0.0;
};

// Finite-support 1D potential: ordered non-overlapping constant segments, or
// samples of a smooth profile (linearly interpolated, zero outside support).
class PotentialSpec {
public:
    enum class Kind { piecewise, sampled };

    static PotentialSpec piecewise(std::vector<PotentialSegment> segments);
    static PotentialSpec sampled(std::vector<double> xs, std::vector<double> vs);

    Kind kind() const { return kind_; }
    const std::vector<PotentialSegment>& segments() const { return segments_; }
    const std::vector<double>& sample_positions() const { return xs_; }
    const std::vector<double>& sample_values() const { return vs_; }

    double support_left() const { return support_left_; }
    double support_right() const { return support_right_; }
    bool is_zero() const;

    // Node sampling used by the time-domain oracle. Segments are half-open
    // [x_left, x_right).
    double value_at(double x) const;

private:
    PotentialSpec() = default;
    Kind kind_ = Kind::piecewise;
    std::vector<PotentialSegment> segments_;
    std::vector<double> xs_, vs_;
    double support_left_ = 0.0;
    double support_right_ = 0.0;
};

// T(p), R(p) on a positive-momentum grid, plus the support of the potential
// they were solved for (needed by the asymptotic-margin check downstream).
struct ScatteringCoefficients {
    MomentumGrid grid;
    std::vector<cdouble> T;
    std::vector<cdouble> R;
    double support_left = 0.0;
    double support_right = 0.0;
};

struct SolverOptions {
    // Numerov step for sampled potentials: smallest of (sample spacing,
    // shortest wavelength / points_per_wavelength).
    double points_per_wavelength = 40.0;
    double unitarity_tolerance = 1e-10;
};

// Stationary scattering solve. Piecewise-constant potentials use an exact
// transfer-matrix cascade with log-scaled evanescent propagation; sampled
// potentials use Numerov integration matched with the scheme's discrete
// dispersion relation. Asserts |T|^2 + |R|^2 = 1 on every node.
ScatteringCoefficients solve_coefficients(const PotentialSpec& potential,
                                          const MomentumGrid& grid,
                                          const UnitSystem& units,
                                          const SolverOptions& options = {});

// psi~_tr(p) = T(p) psi~_in(p); unnormalized, norm = transmittance.
WavePacket transmitted_packet(const WavePacket& packet_in,
                              const ScatteringCoefficients& coeffs);

struct OutgoingAsymptote {
    WavePacket transmitted;   // direction +
    WavePacket reflected;     // R(p) psi~_in(p) attached to -p, direction -
};

OutgoingAsymptote outgoing_asymptote(const WavePacket& packet_in,
                                     const ScatteringCoefficients& coeffs);

// Int |T|^2 |psi~_in|^2 dp by direct quadrature.
double transmittance(const WavePacket& packet_in, const ScatteringCoefficients& coeffs);

// Smallest detector position admitted by the asymptotic-margin rule
// max(10 hbar / sigma_p, 10 sigma_x) past the support edge.
double min_asymptotic_detector(const WavePacket& packet_in,
                               const ScatteringCoefficients& coeffs,
                               double margin_factor = 10.0);

// Pi_tr(t; X) = |<t,+;X|psi_tr>|^2, unnormalized; total = transmittance.
ArrivalDistribution barrier_arrival_distribution(const WavePacket& packet_in,
                                                 const ScatteringCoefficients& coeffs,
                                                 double X, const TimeGrid& grid,
                                                 const ArrivalOptions& options = {},
                                                 double margin_factor = 10.0);

} // namespace qarrival
