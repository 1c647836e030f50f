#include "qarrival/runner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "json.hpp"

namespace qarrival {

namespace {

namespace fs = std::filesystem;

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot open output file: " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
}

std::string table_csv(const Table& table) {
    std::string text;
    for (const auto& [k, v] : table.header)
        text += "# " + k + ": " + v + "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) text += ",";
        text += table.columns[c];
    }
    text += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) text += ",";
            text += format_double(row[c]);
        }
        text += "\n";
    }
    return text;
}

nlohmann::ordered_json table_json(const Table& table) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json header;
    for (const auto& [k, v] : table.header) header[k] = v;
    j["header"] = header;
    j["columns"] = table.columns;
    j["rows"] = table.rows;
    return j;
}

// Window and moment evaluation for one packet at one detector.
struct DetectorAnalysis {
    TimeGrid grid;
    ArrivalDistribution dist;
    MomentReport report;
};

TimeGrid detector_time_grid(const ExperimentConfig& cfg, const WavePacket& packet, double X) {
    if (cfg.time_auto)
        return auto_time_grid(packet, X, cfg.time_n, cfg.coverage, cfg.window_sigmas);
    return TimeGrid::uniform(cfg.t_min, cfg.t_max, cfg.time_n);
}

DetectorAnalysis analyze_detector(const ExperimentConfig& cfg, const WavePacket& packet,
                                  double X) {
    DetectorAnalysis a{detector_time_grid(cfg, packet, X), {}, {}};
    ArrivalOptions opts;
    opts.window_tolerance = cfg.tol_window;
    a.dist = arrival_distribution(packet, X, a.grid, opts);
    a.report = moment_report(packet, a.dist);
    return a;
}

Table distribution_table(std::size_t index, const ArrivalDistribution& dist) {
    Table t;
    t.name = "dist_" + std::to_string(index);
    t.header = {
        {"schema", "arrival_distribution/v1"},
        {"detector", format_double(dist.detector)},
        {"direction", dist.direction == Direction::plus ? "+" : "-"},
        {"n", std::to_string(dist.time_grid.size())},
        {"total", format_double(dist.total)},
        {"window_defect", format_double(dist.window_defect())},
    };
    t.columns = {"tau", "density"};
    t.rows.reserve(dist.time_grid.size());
    for (std::size_t j = 0; j < dist.time_grid.size(); ++j)
        t.rows.push_back({dist.time_grid.samples[j], dist.values[j]});
    return t;
}

Table moments_table(const std::vector<double>& detectors,
                    const std::vector<DetectorAnalysis>& analyses) {
    Table t;
    t.name = "moments";
    t.header = {{"schema", "moments/v1"}};
    t.columns = {"detector", "mean", "spread", "energy_mean", "energy_spread",
                 "product", "window_defect"};
    for (std::size_t k = 0; k < detectors.size(); ++k) {
        const MomentReport& r = analyses[k].report;
        t.rows.push_back({detectors[k], r.mean, r.spread, r.energy_mean, r.energy_spread,
                          r.product, analyses[k].dist.window_defect()});
    }
    return t;
}

Table coefficient_table(const ScatteringCoefficients& cs) {
    Table t;
    t.name = "coefficients";
    t.header = {{"schema", "coefficients/v1"},
                {"n", std::to_string(cs.grid.size())}};
    t.columns = {"p", "T_re", "T_im", "R_re", "R_im"};
    for (std::size_t i = 0; i < cs.grid.size(); ++i)
        t.rows.push_back({cs.grid.samples[i], cs.T[i].real(), cs.T[i].imag(),
                          cs.R[i].real(), cs.R[i].imag()});
    return t;
}

struct OracleResult {
    std::vector<double> flux_means;
    std::vector<double> throughputs;
    std::vector<double> min_currents;
};

// One propagation serves every detector through dense probe records.
OracleResult run_oracle(const ExperimentConfig& cfg, const WavePacket& packet,
                        const PotentialSpec* potential) {
    const PacketMoments mom = packet_moments(packet);
    const double m = cfg.units.mass;
    const double hbar = cfg.units.hbar;
    const double sigma_x = std::max(mom.x_spread, 1e-3);

    double t_end = cfg.oracle_t_end;
    if (t_end <= 0.0) {
        for (double X : cfg.detectors) {
            const double centre = m * (X - mom.x_mean) * mom.inv_p_mean;
            const double drift = m * sigma_x / std::abs(mom.p_mean);
            const double chroma = m * std::abs(X - mom.x_mean) * mom.p_spread /
                                  (mom.p_mean * mom.p_mean);
            t_end = std::max(t_end, centre + 16.0 * std::hypot(drift, chroma));
        }
        t_end = std::max(t_end, 1.0);
    }

    // Core box: initial packet, every detector, the potential, plus working
    // room around the detectors. Quartic absorbing ramps damp whatever runs
    // off either end, so the box never has to contain the full free flight.
    double core_lo = std::min(mom.x_mean - 15.0 * sigma_x,
                              *std::min_element(cfg.detectors.begin(), cfg.detectors.end()) - 8.0);
    double core_hi = std::max(mom.x_mean + 15.0 * sigma_x,
                              *std::max_element(cfg.detectors.begin(), cfg.detectors.end()) + 8.0);
    if (potential) {
        core_lo = std::min(core_lo, potential->support_left() - 2.0);
        core_hi = std::max(core_hi, potential->support_right() + 2.0);
    }
    const double ramp = 25.0 * std::max(hbar / std::abs(mom.p_mean), 1.0);
    // Sharp piecewise potentials leave an O(dx^2) floor in transmitted
    // throughputs (~1e-3 at dx ~ 0.03); default them to the finer grid.
    std::size_t n = cfg.oracle_n;
    if (n == 0)
        n = (potential && !potential->is_zero() &&
             potential->kind() == PotentialSpec::Kind::piecewise) ? 8192 : 4096;
    const SpaceGrid grid{core_lo - ramp, core_hi + ramp, n};

    const double k_lo = std::max(std::abs(mom.p_mean) - 4.0 * mom.p_spread,
                                 0.2 * std::abs(mom.p_mean)) / hbar;
    const double w0 = 9.0 * std::numbers::ln10 * 5.0 * hbar * hbar * k_lo / (2.0 * m * ramp);
    AbsorberSpec damping;
    damping.x_left = grid.x_min;
    damping.x_right = grid.x_max;
    damping.strength.resize(4097);
    for (std::size_t i = 0; i < damping.strength.size(); ++i) {
        const double x = grid.x_min + (grid.x_max - grid.x_min) * static_cast<double>(i) /
                                          static_cast<double>(damping.strength.size() - 1);
        double u = 0.0;
        if (x < core_lo) u = (core_lo - x) / ramp;
        if (x > core_hi) u = (x - core_hi) / ramp;
        damping.strength[i] = w0 * u * u * u * u;
    }

    double dt = cfg.oracle_dt;
    if (dt <= 0.0) {
        const double p_band = std::abs(mom.p_mean) + 7.0 * mom.p_spread;
        dt = 0.35 * 2.0 * m * hbar / (p_band * p_band);
        // Dense enough flux sampling around the narrowest crossing.
        const double dt_cross = m * sigma_x / std::abs(mom.p_mean) / 40.0;
        dt = std::min(dt, dt_cross);
        if (potential && !potential->is_zero()) {
            // Sharp potentials put Gibbs components at the grid Nyquist;
            // keep their kinetic phase advance per step moderate.
            const double p_nyq = grid.nyquist_momentum(cfg.units);
            dt = std::min(dt, 10.0 * m * hbar / (p_nyq * p_nyq));
        }
    }
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt));

    const std::vector<cdouble> psi0 = to_position(packet, grid, 0.0);
    PropagateOptions opts;
    opts.probes = cfg.detectors;
    opts.record_stride = std::max<std::size_t>(steps / 8, 1);
    opts.spectral_probe_derivative = cfg.oracle_spectral_derivative;
    const Trajectory traj =
        propagate(psi0, grid, cfg.units, potential, &damping, dt, steps, opts);

    OracleResult out;
    for (double X : cfg.detectors) {
        const FluxRecord rec = flux_at(traj, X);
        out.flux_means.push_back(flux_mean_arrival(rec));
        out.throughputs.push_back(flux_throughput(rec));
        out.min_currents.push_back(*std::min_element(rec.current.begin(), rec.current.end()));
    }
    return out;
}

Table compare_table(const ExperimentConfig& cfg, const std::vector<double>& analytic,
                    const OracleResult& oracle, bool& verdicts_ok) {
    Table t;
    t.name = "compare";
    t.header = {{"schema", "compare/v1"},
                {"tolerance", format_double(cfg.tol_mean_gap)}};
    t.columns = {"detector", "analytic_mean", "flux_mean", "abs_gap", "rel_gap",
                 "tolerance", "verdict"};
    for (std::size_t k = 0; k < cfg.detectors.size(); ++k) {
        const double gap = std::abs(oracle.flux_means[k] - analytic[k]);
        const double rel = gap / std::max(std::abs(analytic[k]), 1e-300);
        const bool pass = rel <= cfg.tol_mean_gap;
        verdicts_ok = verdicts_ok && pass;
        t.rows.push_back({cfg.detectors[k], analytic[k], oracle.flux_means[k], gap, rel,
                          cfg.tol_mean_gap, pass ? 1.0 : 0.0});
    }
    return t;
}

void common_provenance(ResultBundle& bundle, const ExperimentConfig& cfg,
                       const std::string& mode) {
    bundle.provenance.emplace_back("version", kVersion);
    bundle.provenance.emplace_back("mode", mode);
    for (const auto& [k, v] : cfg.echo())
        bundle.provenance.emplace_back("config." + k, v);
}

void put_summary(ResultBundle& bundle, const std::string& key, const std::string& value) {
    bundle.summary.emplace_back(key, value);
}

void put_summary(ResultBundle& bundle, const std::string& key, double value) {
    bundle.summary.emplace_back(key, format_double(value));
}

void put_verdict(ResultBundle& bundle, const std::string& key, bool pass) {
    bundle.verdicts_ok = bundle.verdicts_ok && pass;
    bundle.summary.emplace_back(key, pass ? "pass" : "fail");
}

} // namespace

void ResultBundle::write(const std::string& directory, OutputFormat format) const {
    fs::create_directories(directory);
    const fs::path dir(directory);

    for (const Table& table : tables) {
        if (format == OutputFormat::csv) {
            write_text_atomic(dir / (table.name + ".csv"), table_csv(table));
        } else {
            write_text_atomic(dir / (table.name + ".json"), table_json(table).dump(2) + "\n");
        }
    }

    if (format == OutputFormat::csv) {
        std::string text;
        for (const auto& [k, v] : provenance) text += "# " + k + ": " + v + "\n";
        text += "key,value\n";
        for (const auto& [k, v] : summary) text += k + "," + v + "\n";
        text += std::string("verdicts,") + (verdicts_ok ? "pass" : "fail") + "\n";
        write_text_atomic(dir / "summary.csv", text);
    } else {
        nlohmann::ordered_json j;
        nlohmann::ordered_json prov;
        for (const auto& [k, v] : provenance) prov[k] = v;
        nlohmann::ordered_json results;
        for (const auto& [k, v] : summary) results[k] = v;
        results["verdicts"] = verdicts_ok ? "pass" : "fail";
        j["provenance"] = prov;
        j["results"] = results;
        write_text_atomic(dir / "summary.json", j.dump(2) + "\n");
    }
}

ResultBundle run_free(const ExperimentConfig& cfg) {
    cfg.validate(RunMode::free_run);
    ResultBundle bundle;
    common_provenance(bundle, cfg, "free");

    const WavePacket packet = cfg.build_packet();
    std::vector<DetectorAnalysis> analyses;
    std::vector<double> analytic_means;
    for (std::size_t k = 0; k < cfg.detectors.size(); ++k) {
        analyses.push_back(analyze_detector(cfg, packet, cfg.detectors[k]));
        analytic_means.push_back(analyses.back().report.mean);
        bundle.tables.push_back(distribution_table(k, analyses.back().dist));
        const bool normalized =
            std::abs(analyses.back().dist.total - 1.0) <= cfg.tol_normalization;
        put_verdict(bundle, "normalization_" + std::to_string(k), normalized);
    }
    bundle.tables.push_back(moments_table(cfg.detectors, analyses));

    if (cfg.oracle_enabled) {
        const OracleResult oracle = run_oracle(cfg, packet, nullptr);
        bundle.tables.push_back(compare_table(cfg, analytic_means, oracle, bundle.verdicts_ok));
        for (std::size_t k = 0; k < cfg.detectors.size(); ++k) {
            const bool pass = std::abs(oracle.throughputs[k] - 1.0) <= cfg.tol_throughput;
            put_verdict(bundle, "throughput_" + std::to_string(k), pass);
        }
    }

    put_summary(bundle, "packet_norm", total_probability(packet));
    return bundle;
}

ResultBundle run_barrier(const ExperimentConfig& cfg) {
    cfg.validate(RunMode::barrier);
    ResultBundle bundle;
    common_provenance(bundle, cfg, "barrier");

    const WavePacket packet = cfg.build_packet();
    const PotentialSpec potential = *cfg.build_potential();
    const ScatteringCoefficients cs = solve_coefficients(potential, packet.grid, cfg.units);
    const WavePacket transmitted = transmitted_packet(packet, cs);
    const double trans = total_probability(transmitted);

    bundle.tables.push_back(coefficient_table(cs));
    put_summary(bundle, "transmittance", trans);
    put_summary(bundle, "min_detector",
                min_asymptotic_detector(packet, cs, cfg.asymptotic_margin_factor));

    std::vector<DetectorAnalysis> analyses;
    std::vector<double> analytic_means;
    for (std::size_t k = 0; k < cfg.detectors.size(); ++k) {
        const double X = cfg.detectors[k];
        DetectorAnalysis a{detector_time_grid(cfg, transmitted, X), {}, {}};
        ArrivalOptions opts;
        opts.window_tolerance = cfg.tol_window;
        a.dist = barrier_arrival_distribution(packet, cs, X, a.grid, opts,
                                              cfg.asymptotic_margin_factor);
        a.report = moment_report(transmitted, a.dist);
        analyses.push_back(std::move(a));
        analytic_means.push_back(analyses.back().report.mean);
        bundle.tables.push_back(distribution_table(k, analyses.back().dist));
        const bool consistent = std::abs(analyses.back().dist.total - trans) <= 1e-6;
        put_verdict(bundle, "transmittance_identity_" + std::to_string(k), consistent);
    }
    bundle.tables.push_back(moments_table(cfg.detectors, analyses));

    if (cfg.oracle_enabled) {
        const OracleResult oracle = run_oracle(cfg, packet, &potential);
        bundle.tables.push_back(compare_table(cfg, analytic_means, oracle, bundle.verdicts_ok));
        for (std::size_t k = 0; k < cfg.detectors.size(); ++k) {
            const bool pass = std::abs(oracle.throughputs[k] - trans) <= cfg.tol_throughput;
            put_verdict(bundle, "throughput_" + std::to_string(k), pass);
        }
    }
    return bundle;
}

ResultBundle run_compare(const ExperimentConfig& cfg) {
    cfg.validate(RunMode::compare);
    ResultBundle bundle;
    common_provenance(bundle, cfg, "compare");

    // Build without the second mode: the main table compares a directed
    // Gaussian; the two-mode packet serves the backflow block below.
    ExperimentConfig main_cfg = cfg;
    main_cfg.mode2_enabled = false;
    const WavePacket packet = main_cfg.build_packet();
    const std::optional<PotentialSpec> potential = cfg.build_potential();

    const ScatteringCoefficients cs =
        potential ? solve_coefficients(*potential, packet.grid, cfg.units)
                  : ScatteringCoefficients{};
    const WavePacket analytic_packet =
        potential ? transmitted_packet(packet, cs) : packet;

    std::vector<double> analytic_means;
    for (double X : cfg.detectors) {
        ArrivalOptions opts;
        opts.window_tolerance = cfg.tol_window;
        const TimeGrid grid = detector_time_grid(cfg, analytic_packet, X);
        const ArrivalDistribution dist = arrival_distribution(analytic_packet, X, grid, opts);
        analytic_means.push_back(mean_arrival(dist));
    }

    const OracleResult oracle = run_oracle(cfg, packet, potential ? &*potential : nullptr);
    bundle.tables.push_back(compare_table(cfg, analytic_means, oracle, bundle.verdicts_ok));

    if (cfg.backflow) {
        const WavePacket two_mode = cfg.build_packet();
        const PacketMoments mom = packet_moments(two_mode);
        const double X = mom.x_mean;

        const ArrivalDistribution dist =
            auto_arrival_distribution(two_mode, X, cfg.time_n, 1e-6);
        const double min_density = *std::min_element(dist.values.begin(), dist.values.end());

        ExperimentConfig oracle_cfg = cfg;
        oracle_cfg.detectors = {X};
        oracle_cfg.oracle_t_end = cfg.oracle_t_end > 0.0 ? cfg.oracle_t_end : 4.0;
        const OracleResult backflow_oracle = run_oracle(oracle_cfg, two_mode, nullptr);

        put_summary(bundle, "backflow.detector", X);
        put_summary(bundle, "backflow.min_density", min_density);
        put_summary(bundle, "backflow.min_current", backflow_oracle.min_currents[0]);
        put_verdict(bundle, "backflow.positivity", min_density >= 0.0);
        put_verdict(bundle, "backflow.negative_current", backflow_oracle.min_currents[0] < 0.0);
    }
    return bundle;
}

ResultBundle run_uncertainty(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate(RunMode::uncertainty);
    ResultBundle bundle;
    common_provenance(bundle, cfg, "uncertainty");
    put_summary(bundle, "seed", std::to_string(seed));

    struct Member {
        double p0, sigma_p, x0, detector_offset;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Member> members(cfg.ensemble_count);
    for (Member& m : members) {
        m.p0 = cfg.ensemble_p0_min + (cfg.ensemble_p0_max - cfg.ensemble_p0_min) * u01(rng);
        const double ratio = cfg.ensemble_ratio_min +
                             (cfg.ensemble_ratio_max - cfg.ensemble_ratio_min) * u01(rng);
        m.sigma_p = m.p0 / ratio;
        m.x0 = cfg.ensemble_x0_min + (cfg.ensemble_x0_max - cfg.ensemble_x0_min) * u01(rng);
        m.detector_offset = cfg.ensemble_detector_span * u01(rng);
    }

    struct Row {
        MomentReport free_report;
        MomentReport transmitted_report;
        double free_detector = 0.0;
        double transmitted_detector = 0.0;
        bool has_transmitted = false;
    };
    std::vector<Row> rows(members.size());

    auto evaluate = [&](std::size_t i) {
        const Member& m = members[i];
        GaussianSpec spec;
        spec.p0 = m.p0;
        spec.sigma_p = m.sigma_p;
        spec.x0 = m.x0;
        spec.units = cfg.units;
        const MomentumGrid grid = MomentumGrid::uniform(
            std::max(m.p0 - 8.0 * m.sigma_p, m.p0 / 8.0), m.p0 + 8.0 * m.sigma_p, 2048);
        const WavePacket packet = build_gaussian(spec, grid);

        Row row;
        row.free_detector = m.detector_offset;
        row.free_report = moment_report(
            packet, auto_arrival_distribution(packet, row.free_detector, 2048, cfg.coverage));

        if (cfg.ensemble_barrier) {
            const double e0 = m.p0 * m.p0 / (2.0 * cfg.units.mass);
            const PotentialSpec barrier = PotentialSpec::piecewise({{0.0, 1.0, 0.5 * e0}});
            const ScatteringCoefficients cs = solve_coefficients(barrier, packet.grid, cfg.units);
            const WavePacket transmitted = transmitted_packet(packet, cs);
            row.transmitted_detector =
                min_asymptotic_detector(packet, cs, cfg.asymptotic_margin_factor) +
                m.detector_offset;
            ArrivalOptions opts;
            opts.window_tolerance = cfg.tol_window;
            const TimeGrid tg = auto_time_grid(transmitted, row.transmitted_detector, 2048,
                                               cfg.coverage, cfg.window_sigmas);
            const ArrivalDistribution dist = barrier_arrival_distribution(
                packet, cs, row.transmitted_detector, tg, opts, cfg.asymptotic_margin_factor);
            row.transmitted_report = moment_report(transmitted, dist);
            row.has_transmitted = true;
        }
        rows[i] = row;
    };

    // Members are independent; chunk them across hardware threads.
    const std::size_t n_threads =
        std::min<std::size_t>(std::max(std::thread::hardware_concurrency(), 1u), rows.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < rows.size(); i += n_threads) evaluate(i);
        });
    for (std::thread& th : pool) th.join();

    Table table;
    table.name = "ensemble";
    table.header = {{"schema", "ensemble/v1"},
                    {"hbar", format_double(cfg.units.hbar)}};
    table.columns = {"index", "p0", "sigma_p", "x0", "detector", "transmitted",
                     "energy_spread", "time_spread", "product_over_hbar"};
    double min_product = std::numeric_limits<double>::infinity();
    bool all_pass = true;
    const double floor = 0.5 * cfg.units.hbar - cfg.tol_uncertainty_slack;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Member& m = members[i];
        const Row& r = rows[i];
        table.rows.push_back({static_cast<double>(i), m.p0, m.sigma_p, m.x0, r.free_detector,
                              0.0, r.free_report.energy_spread, r.free_report.spread,
                              r.free_report.product / cfg.units.hbar});
        min_product = std::min(min_product, r.free_report.product);
        all_pass = all_pass && r.free_report.product >= floor;
        if (r.has_transmitted) {
            table.rows.push_back({static_cast<double>(i), m.p0, m.sigma_p, m.x0,
                                  r.transmitted_detector, 1.0,
                                  r.transmitted_report.energy_spread,
                                  r.transmitted_report.spread,
                                  r.transmitted_report.product / cfg.units.hbar});
            min_product = std::min(min_product, r.transmitted_report.product);
            all_pass = all_pass && r.transmitted_report.product >= floor;
        }
    }
    bundle.tables.push_back(std::move(table));
    put_summary(bundle, "min_product", min_product);
    put_summary(bundle, "min_product_over_hbar", min_product / cfg.units.hbar);
    put_verdict(bundle, "uncertainty_bound", all_pass);
    return bundle;
}

} // namespace qarrival
