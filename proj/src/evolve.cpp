#include "qarrival/evolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "qarrival/fft.hpp"

namespace qarrival {

namespace {

cdouble polar_unit(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

double state_norm(const std::vector<cdouble>& psi, double dx) {
    double acc = 0.0;
    for (const cdouble& v : psi) acc += std::norm(v);
    return acc * dx;
}

// FFT-ordered momentum lattice: p_l = 2 pi hbar l~ / L.
std::vector<double> momentum_lattice(const SpaceGrid& grid, const UnitSystem& units) {
    const std::size_t n = grid.n;
    const double dp = 2.0 * std::numbers::pi * units.hbar / (grid.x_max - grid.x_min);
    std::vector<double> p(n);
    for (std::size_t l = 0; l < n; ++l) {
        const auto half = static_cast<std::ptrdiff_t>(n / 2);
        const auto ls = static_cast<std::ptrdiff_t>(l);
        p[l] = dp * static_cast<double>(ls <= half ? ls : ls - static_cast<std::ptrdiff_t>(n));
    }
    return p;
}

// Occupied band limit: largest |p| below which all but 1e-12 of the spectral
// mass lives. The kinetic step is exact on the grid; this is what the dt
// accuracy bound has to resolve.
double occupied_band_limit(const std::vector<cdouble>& psi0, const SpaceGrid& grid,
                           const UnitSystem& units) {
    std::vector<cdouble> spec(psi0.begin(), psi0.end());
    fft::forward(spec);
    const std::vector<double> p = momentum_lattice(grid, units);

    std::vector<std::size_t> order(spec.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(p[a]) > std::abs(p[b]);
    });

    double total = 0.0;
    for (const cdouble& v : spec) total += std::norm(v);
    double tail = 0.0;
    for (std::size_t i : order) {
        tail += std::norm(spec[i]);
        if (tail > 1e-12 * total) return std::abs(p[i]);
    }
    return 0.0;
}

} // namespace

double SpaceGrid::nyquist_momentum(const UnitSystem& u) const {
    return std::numbers::pi * u.hbar / dx();
}

void SpaceGrid::validate() const {
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max))
        throw Error("SpaceGrid: need finite x_min < x_max");
    if (n < 256 || !std::has_single_bit(n))
        throw Error("SpaceGrid: n must be a power of two >= 256");
}

void AbsorberSpec::validate() const {
    if (!(x_left < x_right) || !std::isfinite(x_left) || !std::isfinite(x_right))
        throw Error("AbsorberSpec: need finite x_left < x_right");
    if (strength.size() < 2)
        throw Error("AbsorberSpec: need at least 2 strength samples");
    for (double w : strength)
        if (!(w >= 0.0) || !std::isfinite(w))
            throw Error("AbsorberSpec: strength must be finite and >= 0");
}

double AbsorberSpec::value_at(double x) const {
    if (x <= x_left || x >= x_right) {
        // Region ends carry their sampled values; outside is zero.
        if (x == x_left) return strength.front();
        if (x == x_right) return strength.back();
        return 0.0;
    }
    const double u = (x - x_left) / (x_right - x_left) * static_cast<double>(strength.size() - 1);
    const auto lo = static_cast<std::size_t>(u);
    const std::size_t hi = std::min(lo + 1, strength.size() - 1);
    const double t = u - static_cast<double>(lo);
    return strength[lo] + t * (strength[hi] - strength[lo]);
}

AbsorberSpec make_quartic_absorber(double x_left, double x_right, double w0,
                                   std::size_t n_samples) {
    AbsorberSpec spec;
    spec.x_left = x_left;
    spec.x_right = x_right;
    spec.strength.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(n_samples - 1);
        spec.strength[i] = w0 * u * u * u * u;
    }
    spec.validate();
    return spec;
}

std::vector<cdouble> to_position(const WavePacket& packet, const SpaceGrid& grid, double t) {
    grid.validate();
    const double hbar = packet.units.hbar;
    const double m = packet.units.mass;
    const double p_abs = std::max(std::abs(packet.grid.front()), std::abs(packet.grid.back()));
    if (p_abs > grid.nyquist_momentum(packet.units))
        throw AliasingRisk("to_position: packet momenta exceed the grid Nyquist momentum");

    const std::size_t nx = grid.n;
    const double dx = grid.dx();
    std::vector<cdouble> psi(nx, cdouble{0.0, 0.0});
    const double norm = 1.0 / std::sqrt(packet.units.h());
    for (std::size_t i = 0; i < packet.size(); ++i) {
        const double p = packet.grid.samples[i];
        const double E = p * p / (2.0 * m);
        cdouble term = packet.grid.weights[i] * packet.amplitudes[i] *
                       polar_unit((p * grid.x_min - E * t) / hbar) * norm;
        const cdouble step = polar_unit(p * dx / hbar);
        for (std::size_t j = 0; j < nx; ++j) {
            psi[j] += term;
            term *= step;
        }
    }
    return psi;
}

Trajectory propagate(const std::vector<cdouble>& psi0, const SpaceGrid& grid,
                     const UnitSystem& units, const PotentialSpec* potential,
                     const AbsorberSpec* absorber, double dt, std::size_t steps,
                     const PropagateOptions& options) {
    grid.validate();
    units.validate();
    if (psi0.size() != grid.n)
        throw Error("propagate: psi0 size does not match the grid");
    if (!(dt > 0.0) || steps == 0)
        throw Error("propagate: need dt > 0 and steps >= 1");
    if (absorber) absorber->validate();

    const double band = occupied_band_limit(psi0, grid, units);
    if (dt * band * band / (2.0 * units.mass * units.hbar) >= 0.5)
        throw StabilityViolation("propagate: dt too large for the occupied momentum band");

    const std::size_t n = grid.n;
    const double dx = grid.dx();
    const double hbar = units.hbar;

    const std::vector<double> p = momentum_lattice(grid, units);
    std::vector<cdouble> half_kinetic(n);
    for (std::size_t l = 0; l < n; ++l)
        half_kinetic[l] = polar_unit(-p[l] * p[l] * dt / (4.0 * units.mass * hbar));

    // Piecewise potentials are averaged over the grid cell: plain node
    // sampling jitters the effective segment width by O(dx), which shows up
    // directly in transmittances. Edges stay sharp (no Gibbs smoothing).
    auto cell_value = [&](double x) {
        if (!potential) return 0.0;
        if (potential->kind() == PotentialSpec::Kind::sampled)
            return potential->value_at(x);
        double acc = 0.0;
        for (const PotentialSegment& seg : potential->segments()) {
            const double lo = std::max(x - 0.5 * dx, seg.x_left);
            const double hi = std::min(x + 0.5 * dx, seg.x_right);
            if (hi > lo) acc += seg.height * (hi - lo);
        }
        return acc / dx;
    };
    std::vector<cdouble> potential_factor(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid.node(j);
        const double w = absorber ? absorber->value_at(x) : 0.0;
        potential_factor[j] = polar_unit(-cell_value(x) * dt / hbar) * std::exp(-w * dt / hbar);
    }

    Trajectory traj;
    traj.grid = grid;
    traj.units = units;
    traj.dt = dt;
    traj.steps = steps;
    traj.probe_positions = options.probes;
    traj.probe_currents.assign(options.probes.size(), {});

    const std::size_t stride =
        options.record_stride > 0 ? options.record_stride : std::max<std::size_t>(steps / 64, 1);

    std::vector<cdouble> psi(psi0.begin(), psi0.end());

    auto record_sample = [&](std::size_t k) {
        traj.sample_times.push_back(dt * static_cast<double>(k));
        traj.norms.push_back(state_norm(psi, dx));
        for (std::size_t q = 0; q < traj.probe_positions.size(); ++q)
            traj.probe_currents[q].push_back(current_at(psi, grid, units, traj.probe_positions[q]));
    };
    auto record_snapshot = [&](std::size_t k) {
        traj.snapshot_times.push_back(dt * static_cast<double>(k));
        traj.snapshots.push_back(psi);
    };

    record_sample(0);
    record_snapshot(0);

    for (std::size_t k = 1; k <= steps; ++k) {
        fft::forward(psi);
        for (std::size_t l = 0; l < n; ++l) psi[l] *= half_kinetic[l];
        fft::inverse(psi);
        for (std::size_t j = 0; j < n; ++j) psi[j] *= potential_factor[j];
        fft::forward(psi);
        for (std::size_t l = 0; l < n; ++l) psi[l] *= half_kinetic[l];
        fft::inverse(psi);

        record_sample(k);
        if (k % stride == 0 || k == steps) record_snapshot(k);
    }
    return traj;
}

double current_at(const std::vector<cdouble>& state, const SpaceGrid& grid,
                  const UnitSystem& units, double X) {
    const std::size_t n = grid.n;
    const double dx = grid.dx();
    if (!(X > grid.x_min + 2.0 * dx) || !(X < grid.x_max - 3.0 * dx))
        throw OutOfSupport("current_at: detector must be strictly inside the grid");

    const auto base = static_cast<std::ptrdiff_t>(std::floor((X - grid.x_min) / dx));
    // J at the four nodes around X, then cubic placement.
    double xs[4];
    double js[4];
    for (int q = 0; q < 4; ++q) {
        const std::ptrdiff_t mq = std::clamp<std::ptrdiff_t>(
            base - 1 + q, 2, static_cast<std::ptrdiff_t>(n) - 3);
        const auto mu = static_cast<std::size_t>(mq);
        const cdouble dpsi = (-state[mu + 2] + 8.0 * state[mu + 1] -
                              8.0 * state[mu - 1] + state[mu - 2]) / (12.0 * dx);
        xs[q] = grid.node(mu);
        js[q] = units.hbar / units.mass * (std::conj(state[mu]) * dpsi).imag();
    }
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        double li = 1.0;
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            if (xs[i] == xs[j]) { li = (i == j); break; }
            li *= (X - xs[j]) / (xs[i] - xs[j]);
        }
        acc += li * js[i];
    }
    return acc;
}

FluxRecord flux_at(const Trajectory& trajectory, double X) {
    for (std::size_t q = 0; q < trajectory.probe_positions.size(); ++q) {
        if (std::abs(trajectory.probe_positions[q] - X) <=
            1e-12 * std::max(1.0, std::abs(X))) {
            FluxRecord rec;
            rec.detector = trajectory.probe_positions[q];
            rec.times = trajectory.sample_times;
            rec.current = trajectory.probe_currents[q];
            return rec;
        }
    }
    FluxRecord rec;
    rec.detector = X;
    rec.times = trajectory.snapshot_times;
    rec.current.reserve(trajectory.snapshots.size());
    for (const auto& state : trajectory.snapshots)
        rec.current.push_back(current_at(state, trajectory.grid, trajectory.units, X));
    return rec;
}

namespace {

double trapezoid(const std::vector<double>& t, const std::vector<double>& f,
                 bool weight_by_time) {
    double acc = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double fa = weight_by_time ? t[k - 1] * f[k - 1] : f[k - 1];
        const double fb = weight_by_time ? t[k] * f[k] : f[k];
        acc += 0.5 * (t[k] - t[k - 1]) * (fa + fb);
    }
    return acc;
}

} // namespace

double flux_throughput(const FluxRecord& record) {
    if (record.times.size() < 2 || record.times.size() != record.current.size())
        throw ZeroThroughput("flux_throughput: record too short");
    return trapezoid(record.times, record.current, false);
}

double flux_mean_arrival(const FluxRecord& record) {
    const double denom = flux_throughput(record);
    if (!(denom > 0.0))
        throw ZeroThroughput("flux_mean_arrival: non-positive integrated current");
    return trapezoid(record.times, record.current, true) / denom;
}

AbsorberTuning tune_quartic_absorber(const WavePacket& packet, const SpaceGrid& grid,
                                     double x_left, double x_right, double dt,
                                     std::size_t steps, std::size_t scan_points) {
    const PacketMoments mom = packet_moments(packet);
    const double hbar = packet.units.hbar;
    const double m = packet.units.mass;
    const double length = x_right - x_left;
    const double k_lo = std::max(std::abs(mom.p_mean) - 4.0 * mom.p_spread,
                                 0.2 * std::abs(mom.p_mean)) / hbar;

    // One-pass quartic-ramp suppression e^{-(2m/(hbar^2 k)) W0 L / 5} ~ 1e-9
    // sets the scan centre; the scan settles the reflection trade-off.
    const double w_center = 9.0 * std::numbers::ln10 * 5.0 * hbar * hbar * k_lo /
                            (2.0 * m * length);

    const std::vector<cdouble> psi0 = to_position(packet, grid, 0.0);

    AbsorberTuning best;
    for (std::size_t i = 0; i < scan_points; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(scan_points - 1);
        const double w0 = w_center * std::pow(2.0, 6.0 * f - 3.0);   // w_center * [1/8, 8]
        const AbsorberSpec candidate = make_quartic_absorber(x_left, x_right, w0);
        PropagateOptions opts;
        opts.record_stride = steps;   // endpoints only
        const Trajectory traj = propagate(psi0, grid, packet.units, nullptr, &candidate,
                                          dt, steps, opts);
        const double leakage = traj.norms.back();
        if (leakage < best.leakage) {
            best.leakage = leakage;
            best.w0 = w0;
            best.spec = candidate;
        }
    }
    return best;
}

} // namespace qarrival
