#pragma once

#include <vector>

#include "qarrival/packet.hpp"

namespace qarrival {

struct TimeGrid {
    std::vector<double> samples;
    std::vector<double> weights;

    static TimeGrid uniform(double t_lo, double t_hi, std::size_t n);

    std::size_t size() const { return samples.size(); }
    bool is_uniform(double rel_tol = 1e-12) const;
    void validate() const;
};

// Sampled arrival-time density Pi(t; X) = |<t,dir;X|psi>|^2 against physical
// arrival time. For normalized free packets total integrates to 1; for
// transmitted packets it integrates to the transmittance (= packet norm).
struct ArrivalDistribution {
    TimeGrid time_grid;
    std::vector<double> values;
    double detector = 0.0;
    Direction direction = Direction::plus;
    double total = 0.0;
    double packet_norm = 0.0;
    UnitSystem units;

    // Mass the finite window failed to capture, relative to the packet norm.
    double window_defect() const;
};

struct MomentReport {
    double mean = 0.0;           // <t_X>
    double spread = 0.0;         // Delta t_X
    double energy_mean = 0.0;
    double energy_spread = 0.0;  // Delta E
    double product = 0.0;        // Delta E * Delta t_X
};

struct ArrivalOptions {
    enum class Method { automatic, direct, chirp };
    Method method = Method::automatic;
    bool check_window = true;
    double window_tolerance = 1e-4;   // WindowTooNarrow threshold on 1 - total/norm
};

// <t,dir;X|psi> = h^{-1/2} Int dp sqrt(|p|/m) e^{-i(E_p t - p X)/hbar} psi~(p),
// trapezoid over the packet grid. Throws QuadratureUnresolved when the kernel
// phase advances more than pi between adjacent nodes at the requested (t, X).
cdouble arrival_amplitude(const WavePacket& packet, double X, double t);

// Density on an explicit time grid. Uses the chirp-transform fast path
// (uniform-E resampling + Bluestein) for large uniform grids, direct
// summation otherwise.
ArrivalDistribution arrival_distribution(const WavePacket& packet, double X,
                                         const TimeGrid& grid,
                                         const ArrivalOptions& options = {});

// Uniform window centred on the classical crossing time, widened until the
// captured mass converges. coverage is the relative mass allowed to escape.
TimeGrid auto_time_grid(const WavePacket& packet, double X, std::size_t n = 4096,
                        double coverage = 1e-9, double window_sigmas = 12.0);

ArrivalDistribution auto_arrival_distribution(const WavePacket& packet, double X,
                                              std::size_t n = 4096,
                                              double coverage = 1e-9,
                                              const ArrivalOptions& options = {});

double mean_arrival(const ArrivalDistribution& dist);

MomentReport moment_report(const WavePacket& packet, const ArrivalDistribution& dist);

// psi~ -> e^{+i E_p s / hbar} psi~: delays every arrival by s.
WavePacket time_shift(const WavePacket& packet, double s);

// psi~(p) -> conj(psi~(-p)), direction flips; arrivals mirror in time.
WavePacket time_reverse(const WavePacket& packet);

// psi~ -> e^{+i p X / hbar} psi~: moves the detector frame to the origin.
WavePacket position_shift(const WavePacket& packet, double X);

} // namespace qarrival
