#include "qarrival/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qarrival {

namespace {

cdouble polar_unit(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

// Region wavenumber with the +i0 prescription: real above the barrier,
// +i kappa inside it. A floor keeps grazing energies (E == V) finite; the
// induced error is O((k_floor * width)^2).
cdouble region_wavenumber(double E, double V, double m, double hbar, double width) {
    const cdouble k2 = 2.0 * m * cdouble{E - V, 0.0} / (hbar * hbar);
    cdouble k = std::sqrt(k2);
    if (k.imag() < 0.0) k = -k;
    const double floor = 1e-8 / std::max(width, 1.0);
    if (std::abs(k) < floor) k = cdouble{floor, 0.0};
    return k;
}

struct TransferResult {
    cdouble T;
    cdouble R;
};

// Right-to-left cascade over constant regions. Coefficients are referenced
// to each region's left edge; evanescent growth is absorbed into log_scale,
// which cancels out of R and suppresses T exactly as deep tunneling should.
TransferResult solve_piecewise(const std::vector<PotentialSegment>& segments,
                               double p, const UnitSystem& units) {
    const double hbar = units.hbar;
    const double m = units.mass;
    const double k_free = p / hbar;
    const double s_left = segments.front().x_left;
    const double s_right = segments.back().x_right;

    // Region r = 1..n is segments[r-1]; region 0 and n+1 are free.
    const std::size_t n = segments.size();
    std::vector<cdouble> k(n + 2);
    k[0] = k[n + 1] = cdouble{k_free, 0.0};
    for (std::size_t r = 1; r <= n; ++r) {
        const auto& seg = segments[r - 1];
        const double E = p * p / (2.0 * m);
        k[r] = region_wavenumber(E, seg.height, m, hbar, seg.x_right - seg.x_left);
    }

    cdouble a{1.0, 0.0};
    cdouble b{0.0, 0.0};
    double log_scale = 0.0;

    for (std::size_t r = n + 1; r >= 1; --r) {
        // State of region r at its left edge.
        const cdouble value = a + b;
        const cdouble slope_over_ik = (k[r] / k[r - 1]) * (a - b);
        cdouble alpha = 0.5 * (value + slope_over_ik);
        cdouble beta = 0.5 * (value - slope_over_ik);

        if (r - 1 >= 1) {
            // Undo the propagation across region r-1 to its own left edge.
            const auto& seg = segments[r - 2];
            const double width = seg.x_right - seg.x_left;
            const cdouble chi_a = cdouble{0.0, -1.0} * k[r - 1] * width;
            const cdouble chi_b = cdouble{0.0, 1.0} * k[r - 1] * width;
            const double shift = std::max({chi_a.real(), chi_b.real(), 0.0});
            a = alpha * std::exp(chi_a - shift);
            b = beta * std::exp(chi_b - shift);
            log_scale += shift;

            const double mag = std::max(std::abs(a), std::abs(b));
            if (!std::isfinite(mag))
                throw EvanescentOverflow("solve_coefficients: non-finite cascade state");
            if (mag > 1e250) {
                a /= mag;
                b /= mag;
                log_scale += std::log(mag);
            }
        } else {
            a = alpha;
            b = beta;
        }
    }

    TransferResult out;
    out.R = (b / a) * polar_unit(2.0 * k_free * s_left);
    out.T = std::exp(cdouble{-log_scale, k_free * (s_left - s_right)}) / a;
    return out;
}

double linear_sample(const std::vector<double>& xs, const std::vector<double>& vs, double x) {
    if (x <= xs.front() || x >= xs.back()) return 0.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
    return vs[hi - 1] + t * (vs[hi] - vs[hi - 1]);
}

// Numerov integration of psi'' = f psi from the transmitted side, matched to
// lattice plane waves e^{+-i k~ x} with the scheme's discrete dispersion.
TransferResult solve_numerov(const PotentialSpec& potential, double p,
                             const UnitSystem& units, double h, double x_start,
                             std::size_t n_nodes) {
    const double hbar = units.hbar;
    const double m = units.mass;
    const double E = p * p / (2.0 * m);
    const double k = p / hbar;

    const double h2_12 = h * h / 12.0;
    const double a_free = 1.0 + h2_12 * k * k;        // 1 - h^2 f / 12, f = -k^2
    const double cos_arg = (1.0 - 5.0 * h2_12 * k * k) / a_free;
    if (!(cos_arg > -1.0 && cos_arg < 1.0))
        throw QuadratureUnresolved("solve_coefficients: Numerov step too coarse for momentum");
    const double k_disc = std::acos(cos_arg) / h;

    auto f_at = [&](std::size_t j) {
        const double x = x_start + h * static_cast<double>(j);
        return 2.0 * m * (potential.value_at(x) - E) / (hbar * hbar);
    };

    const double x_last = x_start + h * static_cast<double>(n_nodes - 1);
    cdouble psi_hi = polar_unit(k_disc * x_last);            // j = N-1
    cdouble psi_lo = polar_unit(k_disc * (x_last - h));      // j = N-2
    double f_hi = f_at(n_nodes - 1);
    double f_lo = f_at(n_nodes - 2);
    double log_scale = 0.0;

    for (std::size_t j = n_nodes - 2; j >= 1; --j) {
        const double f_next = f_at(j - 1);
        const cdouble psi_next =
            (2.0 * (1.0 + 5.0 * h2_12 * f_lo) * psi_lo - (1.0 - h2_12 * f_hi) * psi_hi) /
            (1.0 - h2_12 * f_next);
        psi_hi = psi_lo;
        f_hi = f_lo;
        psi_lo = psi_next;
        f_lo = f_next;

        const double mag = std::max(std::abs(psi_lo), std::abs(psi_hi));
        if (!std::isfinite(mag))
            throw EvanescentOverflow("solve_coefficients: Numerov state overflow");
        if (mag > 1e250) {
            psi_lo /= mag;
            psi_hi /= mag;
            log_scale += std::log(mag);
        }
    }

    // psi_lo = psi(x_0), psi_hi = psi(x_1), both in the free zone.
    const double x0 = x_start;
    const double x1 = x_start + h;
    const cdouble det = polar_unit(k_disc * (x0 - x1)) - polar_unit(k_disc * (x1 - x0));
    const cdouble A = (psi_lo * polar_unit(-k_disc * x1) - psi_hi * polar_unit(-k_disc * x0)) / det;
    const cdouble B = (psi_hi * polar_unit(k_disc * x0) - psi_lo * polar_unit(k_disc * x1)) / det;

    TransferResult out;
    out.R = B / A;
    out.T = std::exp(cdouble{-log_scale, 0.0}) / A;
    return out;
}

} // namespace

PotentialSpec PotentialSpec::piecewise(std::vector<PotentialSegment> segments) {
    PotentialSpec spec;
    spec.kind_ = Kind::piecewise;
    for (const auto& seg : segments) {
        if (!std::isfinite(seg.x_left) || !std::isfinite(seg.x_right) || !std::isfinite(seg.height))
            throw NonFiniteSupport("PotentialSpec: segment bounds and height must be finite");
        if (!(seg.x_left < seg.x_right))
            throw NonFiniteSupport("PotentialSpec: segment needs x_left < x_right");
    }
    std::sort(segments.begin(), segments.end(),
              [](const auto& l, const auto& r) { return l.x_left < r.x_left; });
    for (std::size_t i = 1; i < segments.size(); ++i)
        if (segments[i].x_left < segments[i - 1].x_right - 1e-12)
            throw NonFiniteSupport("PotentialSpec: overlapping segments");
    spec.segments_ = std::move(segments);
    if (!spec.segments_.empty()) {
        spec.support_left_ = spec.segments_.front().x_left;
        spec.support_right_ = spec.segments_.back().x_right;
    }
    return spec;
}

PotentialSpec PotentialSpec::sampled(std::vector<double> xs, std::vector<double> vs) {
    PotentialSpec spec;
    spec.kind_ = Kind::sampled;
    if (xs.size() < 2 || xs.size() != vs.size())
        throw NonFiniteSupport("PotentialSpec: need >= 2 samples with matching values");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(vs[i]))
            throw NonFiniteSupport("PotentialSpec: non-finite sample");
        if (i > 0 && !(xs[i] > xs[i - 1]))
            throw NonFiniteSupport("PotentialSpec: sample positions must be strictly increasing");
    }
    spec.support_left_ = xs.front();
    spec.support_right_ = xs.back();
    spec.xs_ = std::move(xs);
    spec.vs_ = std::move(vs);
    return spec;
}

bool PotentialSpec::is_zero() const {
    if (kind_ == Kind::piecewise) {
        for (const auto& seg : segments_)
            if (seg.height != 0.0) return false;
        return true;
    }
    for (double v : vs_)
        if (v != 0.0) return false;
    return true;
}

double PotentialSpec::value_at(double x) const {
    if (kind_ == Kind::sampled) return linear_sample(xs_, vs_, x);
    for (const auto& seg : segments_)
        if (x >= seg.x_left && x < seg.x_right) return seg.height;
    return 0.0;
}

ScatteringCoefficients solve_coefficients(const PotentialSpec& potential,
                                          const MomentumGrid& grid,
                                          const UnitSystem& units,
                                          const SolverOptions& options) {
    grid.validate();
    units.validate();
    if (!(grid.front() > 0.0))
        throw OutOfSupport("solve_coefficients: all grid momenta must be positive");

    ScatteringCoefficients out;
    out.grid = grid;
    out.support_left = potential.support_left();
    out.support_right = potential.support_right();
    out.T.resize(grid.size());
    out.R.resize(grid.size());

    if (potential.is_zero()) {
        std::fill(out.T.begin(), out.T.end(), cdouble{1.0, 0.0});
        std::fill(out.R.begin(), out.R.end(), cdouble{0.0, 0.0});
        return out;
    }

    double h = 0.0;
    double x_start = 0.0;
    std::size_t n_nodes = 0;
    if (potential.kind() == PotentialSpec::Kind::sampled) {
        const auto& xs = potential.sample_positions();
        double spacing = xs[1] - xs[0];
        for (std::size_t i = 1; i < xs.size(); ++i)
            spacing = std::min(spacing, xs[i] - xs[i - 1]);
        const double lambda_min = 2.0 * std::numbers::pi * units.hbar / grid.back();
        const double h_req = lambda_min / options.points_per_wavelength;
        const std::size_t n_sub = spacing > h_req
            ? static_cast<std::size_t>(std::ceil(spacing / h_req)) : 1;
        h = spacing / static_cast<double>(n_sub);
        x_start = xs.front() - 2.0 * h;
        const double x_stop = xs.back() + 2.0 * h;
        n_nodes = static_cast<std::size_t>(std::ceil((x_stop - x_start) / h)) + 1;
    }

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = grid.samples[i];
        TransferResult res = potential.kind() == PotentialSpec::Kind::piecewise
            ? solve_piecewise(potential.segments(), p, units)
            : solve_numerov(potential, p, units, h, x_start, n_nodes);
        out.T[i] = res.T;
        out.R[i] = res.R;
        const double defect = std::abs(std::norm(res.T) + std::norm(res.R) - 1.0);
        if (defect > options.unitarity_tolerance)
            throw NumericalFault("solve_coefficients: |T|^2 + |R|^2 deviates from 1");
    }
    return out;
}

namespace {

// Coefficient lookup on a foreign grid: cubic on |T| and on the unwrapped
// phase; raw interpolation of winding phases would corrupt arrival means.
std::vector<cdouble> resample_coefficients(const ScatteringCoefficients& coeffs,
                                           const std::vector<double>& targets) {
    const std::size_t n = coeffs.grid.size();
    std::vector<double> mag(n);
    std::vector<double> phase(n);
    for (std::size_t i = 0; i < n; ++i) {
        mag[i] = std::abs(coeffs.T[i]);
        phase[i] = std::arg(coeffs.T[i]);
        if (i > 0) {
            while (phase[i] - phase[i - 1] > std::numbers::pi) phase[i] -= 2.0 * std::numbers::pi;
            while (phase[i] - phase[i - 1] < -std::numbers::pi) phase[i] += 2.0 * std::numbers::pi;
        }
    }
    std::vector<cdouble> cm(n), cp(n);
    for (std::size_t i = 0; i < n; ++i) {
        cm[i] = cdouble{mag[i], 0.0};
        cp[i] = cdouble{phase[i], 0.0};
    }
    std::vector<cdouble> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double m = lagrange_interpolate(coeffs.grid.samples, cm, targets[i], 3).real();
        const double ph = lagrange_interpolate(coeffs.grid.samples, cp, targets[i], 3).real();
        out[i] = m * polar_unit(ph);
    }
    return out;
}

} // namespace

WavePacket transmitted_packet(const WavePacket& packet_in,
                              const ScatteringCoefficients& coeffs) {
    if (packet_in.direction != Direction::plus)
        throw InvalidPacket("transmitted_packet: incident packet must move rightward");

    WavePacket out = packet_in;
    if (coeffs.grid.same_nodes(packet_in.grid)) {
        for (std::size_t i = 0; i < out.size(); ++i)
            out.amplitudes[i] = coeffs.T[i] * packet_in.amplitudes[i];
        return out;
    }
    if (coeffs.grid.front() > packet_in.grid.front() ||
        coeffs.grid.back() < packet_in.grid.back())
        throw GridMismatch("transmitted_packet: coefficient grid does not cover the packet");
    const std::vector<cdouble> T = resample_coefficients(coeffs, packet_in.grid.samples);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.amplitudes[i] = T[i] * packet_in.amplitudes[i];
    return out;
}

OutgoingAsymptote outgoing_asymptote(const WavePacket& packet_in,
                                     const ScatteringCoefficients& coeffs) {
    OutgoingAsymptote out;
    out.transmitted = transmitted_packet(packet_in, coeffs);

    if (!coeffs.grid.same_nodes(packet_in.grid) &&
        (coeffs.grid.front() > packet_in.grid.front() ||
         coeffs.grid.back() < packet_in.grid.back()))
        throw GridMismatch("outgoing_asymptote: coefficient grid does not cover the packet");

    std::vector<cdouble> R;
    if (coeffs.grid.same_nodes(packet_in.grid)) {
        R = coeffs.R;
    } else {
        // Same unwrapped-phase treatment for R.
        ScatteringCoefficients swapped = coeffs;
        swapped.T = coeffs.R;
        R = resample_coefficients(swapped, packet_in.grid.samples);
    }

    const std::size_t n = packet_in.size();
    WavePacket refl;
    refl.units = packet_in.units;
    refl.direction = Direction::minus;
    refl.grid.samples.resize(n);
    refl.grid.weights.resize(n);
    refl.amplitudes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = n - 1 - i;
        refl.grid.samples[i] = -packet_in.grid.samples[src];
        refl.grid.weights[i] = packet_in.grid.weights[src];
        refl.amplitudes[i] = R[src] * packet_in.amplitudes[src];
    }
    out.reflected = std::move(refl);
    return out;
}

double transmittance(const WavePacket& packet_in, const ScatteringCoefficients& coeffs) {
    return total_probability(transmitted_packet(packet_in, coeffs));
}

double min_asymptotic_detector(const WavePacket& packet_in,
                               const ScatteringCoefficients& coeffs,
                               double margin_factor) {
    const PacketMoments mom = packet_moments(packet_in);
    const double width = std::max(packet_in.units.hbar / mom.p_spread, mom.x_spread);
    return coeffs.support_right + margin_factor * width;
}

ArrivalDistribution barrier_arrival_distribution(const WavePacket& packet_in,
                                                 const ScatteringCoefficients& coeffs,
                                                 double X, const TimeGrid& grid,
                                                 const ArrivalOptions& options,
                                                 double margin_factor) {
    const double x_min = min_asymptotic_detector(packet_in, coeffs, margin_factor);
    if (X < x_min)
        throw NotAsymptotic("barrier_arrival_distribution: detector at " + std::to_string(X) +
                            " violates the asymptotic margin; minimum allowed X is " +
                            std::to_string(x_min));
    return arrival_distribution(transmitted_packet(packet_in, coeffs), X, grid, options);
}

} // namespace qarrival
