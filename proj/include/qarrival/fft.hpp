#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qarrival::fft {

using cdouble = std::complex<double>;

// In-place complex DFT, forward kernel e^{-i 2 pi j k / n}. inverse() is the
// unitary partner (scaled by 1/n). Backed by FFTW with cached plans; safe to
// call from multiple threads.
void forward(std::span<cdouble> data);
void inverse(std::span<cdouble> data);

// Chirp (fractional) DFT via Bluestein: out[j] = sum_n x[n] e^{-i omega n j},
// j = 0..n_out-1, for arbitrary real omega. O((n + n_out) log) using
// power-of-two FFTs.
std::vector<cdouble> chirp_transform(std::span<const cdouble> x, double omega,
                                     std::size_t n_out);

} // namespace qarrival::fft
