#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qarrival/evolve.hpp"
#include "qarrival/scattering.hpp"

namespace qarrival {

enum class RunMode { free_run, barrier, compare, uncertainty };
enum class OutputFormat { csv, json };

// Flat dotted-key experiment description. Parsing is strict: unknown or
// duplicate keys are ConfigInvalid, values must consume their whole token.
struct ExperimentConfig {
    UnitSystem units;

    // packet
    double p0 = 0.0;
    double sigma_p = 0.0;
    double x0 = 0.0;
    Direction direction = Direction::plus;
    double directionality_threshold = 5.0;

    // optional second mode (backflow demonstrations)
    bool mode2_enabled = false;
    double mode2_p0 = 0.0;
    double mode2_sigma_p = 0.0;
    double mode2_x0 = 0.0;
    double mode2_weight = 1.0;

    // momentum grid
    std::size_t grid_n = 4096;
    double span_sigmas = 8.0;
    std::optional<double> p_min;
    std::optional<double> p_max;

    // time grid
    bool time_auto = true;
    std::size_t time_n = 4096;
    double t_min = 0.0;
    double t_max = 0.0;
    double coverage = 1e-9;
    double window_sigmas = 12.0;

    std::vector<double> detectors;

    // potential
    enum class PotentialKind { none, rectangular, piecewise, gaussian_bump, samples };
    PotentialKind potential_kind = PotentialKind::none;
    double pot_v0 = 0.0;
    double pot_width = 0.0;
    double pot_x_left = 0.0;
    std::vector<PotentialSegment> pot_segments;
    double bump_center = 0.0;
    double bump_sigma = 1.0;
    double bump_cutoff_sigmas = 6.0;
    std::size_t bump_samples = 4001;
    std::string pot_file;
    double asymptotic_margin_factor = 10.0;

    // time-domain oracle
    bool oracle_enabled = false;
    double oracle_dt = 0.0;        // 0: auto
    std::size_t oracle_n = 0;      // 0: auto (8192 for sharp piecewise potentials)
    double oracle_t_end = 0.0;     // 0: auto
    bool oracle_spectral_derivative = false;

    // compare extras
    bool backflow = false;

    // uncertainty ensemble
    std::size_t ensemble_count = 0;
    double ensemble_p0_min = 4.0;
    double ensemble_p0_max = 12.0;
    double ensemble_ratio_min = 7.0;
    double ensemble_ratio_max = 20.0;
    double ensemble_x0_min = -30.0;
    double ensemble_x0_max = -10.0;
    double ensemble_detector_span = 10.0;
    bool ensemble_barrier = true;

    // tolerances (verdict thresholds)
    double tol_normalization = 1e-6;
    double tol_mean_gap = 0.01;
    double tol_window = 1e-4;
    double tol_throughput = 1e-3;
    double tol_uncertainty_slack = 1e-6;

    static ExperimentConfig parse_file(const std::string& path);
    static ExperimentConfig parse_string(const std::string& text);

    // Field-level diagnostics; throws ConfigInvalid naming the key.
    void validate(RunMode mode) const;

    // Effective configuration in emission order, for provenance blocks.
    std::vector<std::pair<std::string, std::string>> echo() const;

    MomentumGrid build_grid() const;
    WavePacket build_packet() const;
    std::optional<PotentialSpec> build_potential() const;
};

// %.17g, the round-trip-exact formatting used for every emitted number.
std::string format_double(double v);

} // namespace qarrival
