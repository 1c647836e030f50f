#include "qarrival/fft.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "qarrival/errors.hpp"

namespace qarrival::fft {

namespace {

// FFTW plan creation is not thread safe; execution via fftw_execute_dft on
// caller buffers is. Plans are created FFTW_UNALIGNED so they accept any
// std::vector storage.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    void execute(std::span<cdouble> data, int sign) {
        fftw_plan plan = nullptr;
        {
            std::scoped_lock lock(mutex_);
            auto key = std::make_pair(data.size(), sign);
            auto it = plans_.find(key);
            if (it == plans_.end()) {
                auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
                plan = fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
                if (!plan) throw NumericalFault("fft: plan creation failed");
                plans_.emplace(key, plan);
            } else {
                plan = it->second;
            }
        }
        auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan, ptr, ptr);
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

cdouble polar_unit(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

} // namespace

void forward(std::span<cdouble> data) {
    if (data.empty()) return;
    PlanCache::instance().execute(data, FFTW_FORWARD);
}

void inverse(std::span<cdouble> data) {
    if (data.empty()) return;
    PlanCache::instance().execute(data, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (cdouble& v : data) v *= scale;
}

std::vector<cdouble> chirp_transform(std::span<const cdouble> x, double omega,
                                     std::size_t n_out) {
    const std::size_t n_in = x.size();
    if (n_in == 0 || n_out == 0) return std::vector<cdouble>(n_out, cdouble{0.0, 0.0});
    if (n_in + n_out > (std::size_t{1} << 23))
        throw QuadratureUnresolved("chirp_transform: transform size beyond cap");

    // Bluestein: n*j = (n^2 + j^2 - (j-n)^2) / 2 turns the chirp DFT into a
    // linear convolution with the conjugate chirp.
    const double half = 0.5 * omega;
    const double two_pi = 2.0 * std::numbers::pi;
    auto chirp_phase = [&](std::size_t k) {
        const double kd = static_cast<double>(k);
        return std::fmod(half * kd * kd, two_pi);
    };

    const std::size_t conv_len = n_in + n_out - 1;
    const std::size_t padded = std::bit_ceil(conv_len);

    std::vector<cdouble> a(padded, cdouble{0.0, 0.0});
    std::vector<cdouble> b(padded, cdouble{0.0, 0.0});
    for (std::size_t n = 0; n < n_in; ++n)
        a[n] = x[n] * polar_unit(-chirp_phase(n));
    for (std::size_t k = 0; k < n_out; ++k)
        b[k] = polar_unit(chirp_phase(k));
    for (std::size_t n = 1; n < n_in; ++n)
        b[padded - n] = polar_unit(chirp_phase(n));

    forward(a);
    forward(b);
    for (std::size_t i = 0; i < padded; ++i) a[i] *= b[i];
    inverse(a);

    std::vector<cdouble> out(n_out);
    for (std::size_t j = 0; j < n_out; ++j)
        out[j] = a[j] * polar_unit(-chirp_phase(j));
    return out;
}

} // namespace qarrival::fft
