#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "qarrival/errors.hpp"

namespace qarrival {

using cdouble = std::complex<double>;

// Quadrature grid over momentum. Samples are strictly increasing and
// weights positive; uniform() builds the default trapezoid rule.
struct MomentumGrid {
    std::vector<double> samples;
    std::vector<double> weights;

    static MomentumGrid uniform(double p_lo, double p_hi, std::size_t n);

    std::size_t size() const { return samples.size(); }
    double front() const { return samples.front(); }
    double back() const { return samples.back(); }
    double spacing() const;          // throws unless uniform
    bool is_uniform(double rel_tol = 1e-12) const;
    bool same_nodes(const MomentumGrid& other, double rel_tol = 1e-12) const;

    void validate() const;
};

// Local Lagrange interpolation of sampled complex data. order = 3 is the
// cubic used for public off-node momentum lookups; the chirp-transform
// resampler uses order = 8. Node-exact at sample points. x outside the
// sample range is the caller's problem (see wrappers below).
cdouble lagrange_interpolate(std::span<const double> xs,
                             std::span<const cdouble> ys,
                             double x, int order = 3);

// Clamp-to-zero wrapper: data is treated as compactly supported on the grid.
cdouble interpolate_or_zero(std::span<const double> xs,
                            std::span<const cdouble> ys,
                            double x, int order = 3);

} // namespace qarrival
