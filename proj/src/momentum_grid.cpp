#include "qarrival/momentum_grid.hpp"

#include <algorithm>
#include <cmath>

namespace qarrival {

MomentumGrid MomentumGrid::uniform(double p_lo, double p_hi, std::size_t n) {
    if (!(p_lo < p_hi) || !std::isfinite(p_lo) || !std::isfinite(p_hi))
        throw EmptyGrid("MomentumGrid::uniform: need finite p_lo < p_hi");
    if (n < 2) throw EmptyGrid("MomentumGrid::uniform: need at least 2 points");

    MomentumGrid g;
    g.samples.resize(n);
    g.weights.resize(n);
    const double dp = (p_hi - p_lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        g.samples[i] = p_lo + dp * static_cast<double>(i);
    g.samples.back() = p_hi;
    std::fill(g.weights.begin(), g.weights.end(), dp);
    g.weights.front() = 0.5 * dp;
    g.weights.back() = 0.5 * dp;
    return g;
}

double MomentumGrid::spacing() const {
    if (!is_uniform())
        throw Error("MomentumGrid::spacing: grid is not uniform");
    return (samples.back() - samples.front()) / static_cast<double>(size() - 1);
}

bool MomentumGrid::is_uniform(double rel_tol) const {
    if (size() < 2) return false;
    const double dp = (samples.back() - samples.front()) / static_cast<double>(size() - 1);
    for (std::size_t i = 1; i < size(); ++i)
        if (std::abs(samples[i] - samples[i - 1] - dp) > rel_tol * std::abs(dp))
            return false;
    return true;
}

bool MomentumGrid::same_nodes(const MomentumGrid& other, double rel_tol) const {
    if (size() != other.size()) return false;
    const double scale = std::max(std::abs(samples.front()), std::abs(samples.back()));
    for (std::size_t i = 0; i < size(); ++i)
        if (std::abs(samples[i] - other.samples[i]) > rel_tol * scale)
            return false;
    return true;
}

void MomentumGrid::validate() const {
    if (samples.empty())
        throw EmptyGrid("MomentumGrid: no samples");
    if (samples.size() != weights.size())
        throw EmptyGrid("MomentumGrid: samples/weights size mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
        if (!std::isfinite(samples[i]))
            throw EmptyGrid("MomentumGrid: non-finite sample");
        if (!(weights[i] > 0.0))
            throw EmptyGrid("MomentumGrid: weights must be positive");
        if (i > 0 && !(samples[i] > samples[i - 1]))
            throw EmptyGrid("MomentumGrid: samples must be strictly increasing");
    }
}

cdouble lagrange_interpolate(std::span<const double> xs,
                             std::span<const cdouble> ys,
                             double x, int order) {
    const std::size_t n = xs.size();
    if (n == 0) throw EmptyGrid("lagrange_interpolate: empty data");
    if (n == 1) return ys[0];

    // Stencil of order+1 nodes centred on the bracketing interval.
    const std::size_t hi = static_cast<std::size_t>(
        std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
    const std::size_t span_pts = std::min<std::size_t>(static_cast<std::size_t>(order) + 1, n);
    std::size_t first = (hi > span_pts / 2) ? hi - span_pts / 2 : 0;
    if (first + span_pts > n) first = n - span_pts;

    // Exact hit keeps node values bit-exact.
    for (std::size_t i = first; i < first + span_pts; ++i)
        if (xs[i] == x) return ys[i];

    cdouble acc{0.0, 0.0};
    for (std::size_t i = first; i < first + span_pts; ++i) {
        double li = 1.0;
        for (std::size_t j = first; j < first + span_pts; ++j) {
            if (j == i) continue;
            li *= (x - xs[j]) / (xs[i] - xs[j]);
        }
        acc += li * ys[i];
    }
    return acc;
}

cdouble interpolate_or_zero(std::span<const double> xs,
                            std::span<const cdouble> ys,
                            double x, int order) {
    if (xs.empty() || x < xs.front() || x > xs.back()) return {0.0, 0.0};
    return lagrange_interpolate(xs, ys, x, order);
}

} // namespace qarrival
