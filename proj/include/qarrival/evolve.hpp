#pragma once

#include <optional>
#include <vector>

#include "qarrival/packet.hpp"
#include "qarrival/scattering.hpp"

namespace qarrival {

struct SpaceGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    std::size_t n = 0;   // power of two, >= 256

    double dx() const { return (x_max - x_min) / static_cast<double>(n); }
    double node(std::size_t j) const { return x_min + dx() * static_cast<double>(j); }
    double nyquist_momentum(const UnitSystem& u) const;
    void validate() const;
};

// Imaginary potential -i W(x): strength sampled uniformly over the region,
// linearly interpolated onto the evolution grid, zero outside.
struct AbsorberSpec {
    double x_left = 0.0;
    double x_right = 0.0;
    std::vector<double> strength;

    void validate() const;
    double value_at(double x) const;
};

AbsorberSpec make_quartic_absorber(double x_left, double x_right, double w0,
                                   std::size_t n_samples = 257);

struct FluxRecord {
    double detector = 0.0;
    std::vector<double> times;
    std::vector<double> current;
};

struct PropagateOptions {
    std::size_t record_stride = 0;        // 0: auto (~64 snapshots)
    std::vector<double> probes;           // dense per-step J sampling positions
    bool spectral_probe_derivative = false;  // default: 4th-order stencil
};

// Time-domain evolution record: decimated state snapshots plus dense
// per-step probe currents and norms.
struct Trajectory {
    SpaceGrid grid;
    UnitSystem units;
    double dt = 0.0;
    std::size_t steps = 0;
    std::vector<double> snapshot_times;
    std::vector<std::vector<cdouble>> snapshots;
    std::vector<double> sample_times;                 // 0, dt, ..., steps*dt
    std::vector<double> probe_positions;
    std::vector<std::vector<double>> probe_currents;  // [probe][sample]
    std::vector<double> norms;                        // per sample

    const std::vector<cdouble>& final_state() const { return snapshots.back(); }
};

// Fourier synthesis of <x|psi(t)> with free kinetic phases.
std::vector<cdouble> to_position(const WavePacket& packet, const SpaceGrid& grid, double t);

// Strang splitting exp(-iK dt/2) exp(-i(V - iW) dt) exp(-iK dt/2) with a
// spectral kinetic step. Norm is conserved to rounding without an absorber.
Trajectory propagate(const std::vector<cdouble>& psi0, const SpaceGrid& grid,
                     const UnitSystem& units, const PotentialSpec* potential,
                     const AbsorberSpec* absorber, double dt, std::size_t steps,
                     const PropagateOptions& options = {});

// J(X, t) = (hbar/m) Im[psi* d_x psi] at the detector. Dense when X matches a
// registered probe, snapshot-sampled otherwise.
FluxRecord flux_at(const Trajectory& trajectory, double X);

double flux_mean_arrival(const FluxRecord& record);
double flux_throughput(const FluxRecord& record);

// J at one point of a single state, 4th-order stencil plus cubic placement.
double current_at(const std::vector<cdouble>& state, const SpaceGrid& grid,
                  const UnitSystem& units, double X);

struct AbsorberTuning {
    AbsorberSpec spec;
    double w0 = 0.0;
    double leakage = 1.0;   // surviving norm after the packet fully enters
};

// Operational tuning: scan the ramp strength over a log range, run the real
// absorption experiment for each candidate, keep the least leaky one.
AbsorberTuning tune_quartic_absorber(const WavePacket& packet, const SpaceGrid& grid,
                                     double x_left, double x_right, double dt,
                                     std::size_t steps, std::size_t scan_points = 9);

} // namespace qarrival
