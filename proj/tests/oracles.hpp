#pragma once

// Test-side oracles, kept independent of the library implementation paths
// they check: plain quadrature, textbook closed forms, analytic evolution.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

namespace oracles {

using cdouble = std::complex<double>;

// Composite Simpson on [a, b]; n subintervals (even).
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n = 4096) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        acc += f(a + h * i) * ((i % 2) ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Normal density of the momentum amplitude squared for a Gaussian packet.
inline double gaussian_momentum_density(double p, double p0, double sigma_p) {
    const double z = (p - p0) / sigma_p;
    return std::exp(-0.5 * z * z) / (sigma_p * std::sqrt(2.0 * std::numbers::pi));
}

// Classical ensemble mean arrival: particles at x0 with momentum law
// |psi~(p)|^2 cross X at t = m (X - x0) / p.
inline double classical_mean_arrival(double p0, double sigma_p, double x0, double X,
                                     double mass = 1.0) {
    const double lo = std::max(p0 - 10.0 * sigma_p, 1e-6);
    const double hi = p0 + 10.0 * sigma_p;
    const double norm = simpson([&](double p) {
        return gaussian_momentum_density(p, p0, sigma_p);
    }, lo, hi, 20000);
    const double mean_inv_p = simpson([&](double p) {
        return gaussian_momentum_density(p, p0, sigma_p) / p;
    }, lo, hi, 20000) / norm;
    return mass * (X - x0) * mean_inv_p;
}

// Rectangular barrier on [0, a]: closed-form T and R, complex k' handles
// both the oscillatory and tunneling regimes.
struct BarrierCoefficients {
    cdouble T;
    cdouble R;
};

inline BarrierCoefficients rectangular_barrier(double p, double v0, double a,
                                               double mass = 1.0, double hbar = 1.0) {
    const double E = p * p / (2.0 * mass);
    const double k = p / hbar;
    const cdouble kp = std::sqrt(cdouble{2.0 * mass * (E - v0), 0.0}) / hbar;
    const cdouble cosk = std::cos(kp * a);
    const cdouble sink = std::sin(kp * a);
    const cdouble sum_ratio = 0.5 * (k / kp + kp / k);
    const cdouble diff_ratio = 0.5 * (k / kp - kp / k);
    const cdouble i{0.0, 1.0};
    BarrierCoefficients out;
    out.T = std::exp(-i * k * a) / (cosk - i * sum_ratio * sink);
    out.R = -i * diff_ratio * sink * out.T * std::exp(i * k * a);
    return out;
}

// |T|^2 through the textbook sin^2/sinh^2 form, as a second route.
inline double rectangular_transmission_probability(double p, double v0, double a,
                                                   double mass = 1.0, double hbar = 1.0) {
    const double E = p * p / (2.0 * mass);
    if (E > v0) {
        const double kp = std::sqrt(2.0 * mass * (E - v0)) / hbar;
        const double s = std::sin(kp * a);
        return 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * E * (E - v0)));
    }
    if (E < v0) {
        const double kappa = std::sqrt(2.0 * mass * (v0 - E)) / hbar;
        const double s = std::sinh(kappa * a);
        return 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * E * (v0 - E)));
    }
    return 1.0 / (1.0 + mass * v0 * a * a / (2.0 * hbar * hbar));
}

// Analytic free evolution of the Gaussian packet
// psi~(p) = (2 pi sigma^2)^{-1/4} e^{-(p-p0)^2/(4 sigma^2)} e^{-i p x0 / hbar}.
inline cdouble free_gaussian_position(double x, double t, double p0, double sigma_p,
                                      double x0, double mass = 1.0, double hbar = 1.0) {
    const cdouble i{0.0, 1.0};
    const cdouble a = 1.0 / (4.0 * sigma_p * sigma_p) + i * t / (2.0 * mass * hbar);
    const double xi = x - x0;
    const cdouble b = i * (xi - t * p0 / mass) / hbar;
    const double pref = std::pow(2.0 * std::numbers::pi * sigma_p * sigma_p, -0.25) /
                        std::sqrt(2.0 * std::numbers::pi * hbar);
    return pref * std::sqrt(std::numbers::pi / a) * std::exp(b * b / (4.0 * a)) *
           std::exp(i * p0 * xi / hbar - i * p0 * p0 * t / (2.0 * mass * hbar));
}

} // namespace oracles
