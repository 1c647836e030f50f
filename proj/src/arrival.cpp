#include "qarrival/arrival.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qarrival/fft.hpp"

namespace qarrival {

namespace {

constexpr double kZeroNorm = 1e-300;

cdouble polar_unit(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

double kinetic_energy(double p, const UnitSystem& u) {
    return p * p / (2.0 * u.mass);
}

// Kernel phase advance between adjacent momentum nodes at (t, X); the
// trapezoid sum is meaningless once this exceeds pi.
void check_resolution(const WavePacket& packet, double X, double t) {
    const auto& p = packet.grid.samples;
    const double hbar = packet.units.hbar;
    for (std::size_t i = 1; i < p.size(); ++i) {
        const double dE = kinetic_energy(p[i], packet.units) - kinetic_energy(p[i - 1], packet.units);
        const double dp = p[i] - p[i - 1];
        if (std::abs(dE * t - dp * X) / hbar > std::numbers::pi)
            throw QuadratureUnresolved(
                "arrival amplitude: kernel oscillation exceeds momentum grid resolution");
    }
}

// X = 0 amplitude by direct trapezoid summation.
cdouble amplitude_origin(const WavePacket& packet, double t) {
    const auto& g = packet.grid;
    const double m = packet.units.mass;
    const double hbar = packet.units.hbar;
    cdouble acc{0.0, 0.0};
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = g.samples[i];
        const double phase = -kinetic_energy(p, packet.units) * t / hbar;
        acc += g.weights[i] * std::sqrt(std::abs(p) / m) * packet.amplitudes[i] * polar_unit(phase);
    }
    return acc / std::sqrt(packet.units.h());
}

struct ChirpPlan {
    double e_lo = 0.0;
    double e_hi = 0.0;
    std::size_t n_nodes = 0;
};

ChirpPlan plan_energy_grid(const WavePacket& packet, const TimeGrid& grid) {
    const auto& p = packet.grid.samples;
    const double m = packet.units.mass;
    const double hbar = packet.units.hbar;
    const double p_small = std::min(std::abs(p.front()), std::abs(p.back()));
    const double p_big = std::max(std::abs(p.front()), std::abs(p.back()));

    ChirpPlan plan;
    plan.e_lo = p_small * p_small / (2.0 * m);
    plan.e_hi = p_big * p_big / (2.0 * m);

    // Effective lower support edge: smallest |p| carrying more than 1e-10 of
    // the cumulative mass. Below it the E map may decimate freely; the grid
    // often extends far under the packet band.
    const double norm = total_probability(packet);
    double p_eff = p_big;
    if (norm > kZeroNorm) {
        double acc = 0.0;
        const bool from_front = std::abs(p.front()) < std::abs(p.back());
        for (std::size_t step = 0; step < p.size(); ++step) {
            const std::size_t i = from_front ? step : p.size() - 1 - step;
            acc += packet.grid.weights[i] * std::norm(packet.amplitudes[i]);
            if (acc > 1e-10 * norm) {
                p_eff = std::abs(p[i]);
                break;
            }
        }
    }
    p_eff = std::max(p_eff, p_small);

    double dp_min = p[1] - p[0];
    for (std::size_t i = 1; i < p.size(); ++i)
        dp_min = std::min(dp_min, p[i] - p[i - 1]);

    // Node count: (a) no decimation of the p grid where the packet lives,
    // tightest at p_eff; (b) Nyquist for the largest |t| with a factor of
    // two in hand.
    const double span = plan.e_hi - plan.e_lo;
    const double t_abs = std::max(std::abs(grid.samples.front()), std::abs(grid.samples.back()));
    const double need_p = span * m / (p_eff * dp_min);
    const double need_t = span * t_abs / (hbar * 0.5 * std::numbers::pi) + 2.0;
    const double need = std::max({need_p, need_t, 2.0 * static_cast<double>(p.size()), 256.0});
    if (need > static_cast<double>(std::size_t{1} << 22))
        throw QuadratureUnresolved("arrival distribution: energy grid beyond size cap");
    plan.n_nodes = static_cast<std::size_t>(need) + 1;
    return plan;
}

// Weighted quadratic fit of the unwrapped amplitude phase around the packet
// band: phi(p) ~ b1 (p - p_ref) + b2 (p - p_ref)^2. Position offsets, time
// shifts, and smooth barrier delays live entirely in this component, so
// interpolating the demodulated residual is safe even when the raw phase
// advances by radians per node.
struct PhaseModel {
    double p_ref = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

PhaseModel fit_quadratic_phase(const WavePacket& packet) {
    const auto& a = packet.amplitudes;
    const auto& p = packet.grid.samples;
    double peak = 0.0;
    for (const cdouble& v : a) peak = std::max(peak, std::abs(v));
    if (peak <= 0.0) return {};

    std::size_t lo = 0, hi = a.size() - 1;
    while (lo < hi && std::abs(a[lo]) < 1e-8 * peak) ++lo;
    while (hi > lo && std::abs(a[hi]) < 1e-8 * peak) --hi;
    if (hi - lo < 8) return {};

    PhaseModel model;
    model.p_ref = p[(lo + hi) / 2];

    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, r0 = 0, r1 = 0, r2 = 0;
    double phase = std::arg(a[lo]);
    double previous = phase;
    for (std::size_t i = lo; i <= hi; ++i) {
        if (i > lo) {
            double step = std::arg(a[i]) - previous;
            previous = std::arg(a[i]);
            while (step > std::numbers::pi) step -= 2.0 * std::numbers::pi;
            while (step < -std::numbers::pi) step += 2.0 * std::numbers::pi;
            phase += step;
        }
        const double w = packet.grid.weights[i] * std::norm(a[i]);
        const double q = p[i] - model.p_ref;
        s0 += w;
        s1 += w * q;
        s2 += w * q * q;
        s3 += w * q * q * q;
        s4 += w * q * q * q * q;
        r0 += w * phase;
        r1 += w * phase * q;
        r2 += w * phase * q * q;
    }
    // Normal equations for [b0 b1 b2], Cramer on the symmetric 3x3.
    const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) +
                       s2 * (s1 * s3 - s2 * s2);
    if (std::abs(det) < 1e-30) return {};
    model.b1 = (s0 * (r1 * s4 - s3 * r2) - r0 * (s1 * s4 - s3 * s2) +
                s2 * (s1 * r2 - r1 * s2)) / det;
    model.b2 = (s0 * (s2 * r2 - r1 * s3) - s1 * (s1 * r2 - r1 * s2) +
                r0 * (s1 * s3 - s2 * s2)) / det;
    return model;
}

std::vector<double> densities_chirp(const WavePacket& packet, const TimeGrid& grid) {
    const double m = packet.units.mass;
    const double hbar = packet.units.hbar;
    const double sign = direction_sign(packet.direction);
    const ChirpPlan plan = plan_energy_grid(packet, grid);
    const std::size_t M = plan.n_nodes;
    const double dE = (plan.e_hi - plan.e_lo) / static_cast<double>(M - 1);
    const double t0 = grid.samples.front();
    const double dt = (grid.samples.back() - t0) / static_cast<double>(grid.size() - 1);

    const PhaseModel model = fit_quadratic_phase(packet);
    std::vector<cdouble> residual(packet.size());
    for (std::size_t i = 0; i < packet.size(); ++i) {
        const double q = packet.grid.samples[i] - model.p_ref;
        residual[i] = packet.amplitudes[i] * polar_unit(-(model.b1 + model.b2 * q) * q);
    }

    // Resample (m/2E)^{1/4} psi~(p(E)) onto the uniform E grid: 9-point
    // Lagrange on the demodulated residual, fitted phase re-applied exactly
    // at the target nodes.
    std::vector<cdouble> x(M);
    for (std::size_t n = 0; n < M; ++n) {
        const double E = plan.e_lo + dE * static_cast<double>(n);
        const double pn = sign * std::sqrt(2.0 * m * E);
        const double qn = pn - model.p_ref;
        const cdouble psi = interpolate_or_zero(packet.grid.samples, residual, pn, 8) *
                            polar_unit((model.b1 + model.b2 * qn) * qn);
        const double w = (n == 0 || n == M - 1) ? 0.5 * dE : dE;
        x[n] = w * std::pow(m / (2.0 * E), 0.25) * psi * polar_unit(-dE * static_cast<double>(n) * t0 / hbar);
    }

    const double omega = dE * dt / hbar;
    std::vector<cdouble> s = fft::chirp_transform(x, omega, grid.size());

    std::vector<double> out(grid.size());
    const double scale = 1.0 / packet.units.h();
    for (std::size_t j = 0; j < grid.size(); ++j)
        out[j] = scale * std::norm(s[j]);   // |e^{-i E_lo t/hbar}|^2 = 1
    return out;
}

std::vector<double> densities_direct(const WavePacket& packet, const TimeGrid& grid) {
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j)
        out[j] = std::norm(amplitude_origin(packet, grid.samples[j]));
    return out;
}

} // namespace

TimeGrid TimeGrid::uniform(double t_lo, double t_hi, std::size_t n) {
    if (!(t_lo < t_hi) || n < 2)
        throw Error("TimeGrid::uniform: need t_lo < t_hi and n >= 2");
    TimeGrid g;
    g.samples.resize(n);
    g.weights.resize(n);
    const double dt = (t_hi - t_lo) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        g.samples[j] = t_lo + dt * static_cast<double>(j);
    g.samples.back() = t_hi;
    std::fill(g.weights.begin(), g.weights.end(), dt);
    g.weights.front() = 0.5 * dt;
    g.weights.back() = 0.5 * dt;
    return g;
}

bool TimeGrid::is_uniform(double rel_tol) const {
    if (size() < 2) return false;
    const double dt = (samples.back() - samples.front()) / static_cast<double>(size() - 1);
    for (std::size_t j = 1; j < size(); ++j)
        if (std::abs(samples[j] - samples[j - 1] - dt) > rel_tol * std::abs(dt))
            return false;
    return true;
}

void TimeGrid::validate() const {
    if (samples.size() < 2 || samples.size() != weights.size())
        throw Error("TimeGrid: need >= 2 samples with matching weights");
    for (std::size_t j = 0; j < size(); ++j) {
        if (!std::isfinite(samples[j]) || !(weights[j] > 0.0))
            throw Error("TimeGrid: samples must be finite, weights positive");
        if (j > 0 && !(samples[j] > samples[j - 1]))
            throw Error("TimeGrid: samples must be strictly increasing");
    }
}

double ArrivalDistribution::window_defect() const {
    if (packet_norm < kZeroNorm) return 0.0;
    return std::abs(1.0 - total / packet_norm);
}

cdouble arrival_amplitude(const WavePacket& packet, double X, double t) {
    if (!std::isfinite(X) || !std::isfinite(t))
        throw Error("arrival_amplitude: t and X must be finite");
    check_resolution(packet, X, t);
    if (X == 0.0) return amplitude_origin(packet, t);
    return amplitude_origin(position_shift(packet, X), t);
}

ArrivalDistribution arrival_distribution(const WavePacket& packet, double X,
                                         const TimeGrid& grid,
                                         const ArrivalOptions& options) {
    grid.validate();

    const WavePacket shifted = (X == 0.0) ? packet : position_shift(packet, X);

    bool use_chirp;
    switch (options.method) {
        case ArrivalOptions::Method::direct: use_chirp = false; break;
        case ArrivalOptions::Method::chirp:
            if (!grid.is_uniform())
                throw Error("arrival_distribution: chirp path needs a uniform time grid");
            use_chirp = true;
            break;
        case ArrivalOptions::Method::automatic:
        default:
            use_chirp = grid.is_uniform() &&
                        grid.size() * packet.size() >= (std::size_t{1} << 21);
            break;
    }

    if (!use_chirp) {
        check_resolution(packet, X, grid.samples.front());
        check_resolution(packet, X, grid.samples.back());
    }

    ArrivalDistribution dist;
    dist.time_grid = grid;
    dist.detector = X;
    dist.direction = packet.direction;
    dist.units = packet.units;
    dist.packet_norm = total_probability(packet);
    dist.values = use_chirp ? densities_chirp(shifted, grid) : densities_direct(shifted, grid);

    double total = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
        total += grid.weights[j] * dist.values[j];
    dist.total = total;

    if (options.check_window && dist.packet_norm > kZeroNorm) {
        if (dist.total > dist.packet_norm * (1.0 + 1e-6))
            throw NumericalFault("arrival_distribution: captured mass exceeds packet norm");
        if (dist.total < dist.packet_norm * (1.0 - options.window_tolerance))
            throw WindowTooNarrow("arrival_distribution: time window misses packet mass");
    }
    return dist;
}

TimeGrid auto_time_grid(const WavePacket& packet, double X, std::size_t n,
                        double coverage, double window_sigmas) {
    const PacketMoments mom = packet_moments(packet);
    const double m = packet.units.mass;
    const double hbar = packet.units.hbar;

    const double center = m * (X - mom.x_mean) * mom.inv_p_mean;
    const double drift = m * mom.x_spread / std::abs(mom.p_mean);
    const double chroma = m * std::abs(X - mom.x_mean) * mom.p_spread /
                          (mom.p_mean * mom.p_mean);
    double dt_est = std::hypot(drift, chroma);
    if (mom.energy_spread > 0.0)
        dt_est = std::max(dt_est, 0.5 * hbar / mom.energy_spread);

    double half = window_sigmas * dt_est;
    ArrivalOptions opts;
    opts.check_window = false;
    double defect = 1.0;
    TimeGrid grid;
    for (int iter = 0; iter < 8; ++iter) {
        grid = TimeGrid::uniform(center - half, center + half, n);
        const ArrivalDistribution dist = arrival_distribution(packet, X, grid, opts);
        defect = dist.window_defect();
        if (defect <= coverage) return grid;
        half *= 1.6;
    }
    if (defect <= 1e-4) return grid;
    throw WindowTooNarrow("auto_time_grid: window failed to capture the packet");
}

ArrivalDistribution auto_arrival_distribution(const WavePacket& packet, double X,
                                              std::size_t n, double coverage,
                                              const ArrivalOptions& options) {
    const TimeGrid grid = auto_time_grid(packet, X, n, coverage);
    return arrival_distribution(packet, X, grid, options);
}

double mean_arrival(const ArrivalDistribution& dist) {
    if (!(dist.total > 0.0))
        throw EmptyDistribution("mean_arrival: distribution has zero total");
    double acc = 0.0;
    for (std::size_t j = 0; j < dist.time_grid.size(); ++j)
        acc += dist.time_grid.weights[j] * dist.time_grid.samples[j] * dist.values[j];
    return acc / dist.total;
}

MomentReport moment_report(const WavePacket& packet, const ArrivalDistribution& dist) {
    const PacketMoments mom = packet_moments(packet);
    MomentReport report;
    report.energy_mean = mom.energy_mean;
    report.energy_spread = mom.energy_spread;

    report.mean = mean_arrival(dist);
    double var = 0.0;
    for (std::size_t j = 0; j < dist.time_grid.size(); ++j) {
        const double d = dist.time_grid.samples[j] - report.mean;
        var += dist.time_grid.weights[j] * d * d * dist.values[j];
    }
    report.spread = std::sqrt(std::max(var / dist.total, 0.0));
    report.product = report.energy_spread * report.spread;
    return report;
}

WavePacket time_shift(const WavePacket& packet, double s) {
    WavePacket out = packet;
    if (s == 0.0) return out;
    const double hbar = packet.units.hbar;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.amplitudes[i] *= polar_unit(kinetic_energy(out.grid.samples[i], out.units) * s / hbar);
    return out;
}

WavePacket time_reverse(const WavePacket& packet) {
    const std::size_t n = packet.size();
    WavePacket out;
    out.units = packet.units;
    out.direction = packet.direction == Direction::plus ? Direction::minus : Direction::plus;
    out.grid.samples.resize(n);
    out.grid.weights.resize(n);
    out.amplitudes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.grid.samples[i] = -packet.grid.samples[n - 1 - i];
        out.grid.weights[i] = packet.grid.weights[n - 1 - i];
        out.amplitudes[i] = std::conj(packet.amplitudes[n - 1 - i]);
    }
    return out;
}

WavePacket position_shift(const WavePacket& packet, double X) {
    WavePacket out = packet;
    if (X == 0.0) return out;
    const double hbar = packet.units.hbar;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.amplitudes[i] *= polar_unit(out.grid.samples[i] * X / hbar);
    return out;
}

} // namespace qarrival
