#include "qarrival/config.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qarrival {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigInvalid("config key '" + key + "': not a number: '" + value + "'");
    }
    if (used != value.size() || !std::isfinite(out))
        throw ConfigInvalid("config key '" + key + "': not a finite number: '" + value + "'");
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    const double d = parse_double(key, value);
    if (d < 0.0 || d != std::floor(d))
        throw ConfigInvalid("config key '" + key + "': expected a non-negative integer");
    return static_cast<std::size_t>(d);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigInvalid("config key '" + key + "': expected true or false");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigInvalid("config key '" + key + "': empty list element");
        out.push_back(parse_double(key, item));
    }
    if (out.empty())
        throw ConfigInvalid("config key '" + key + "': empty list");
    return out;
}

std::vector<PotentialSegment> parse_segments(const std::string& key, const std::string& value) {
    std::vector<PotentialSegment> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        std::array<std::string, 3> parts;
        std::stringstream triple(item);
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(triple, parts[i], ':'))
                throw ConfigInvalid("config key '" + key + "': segment must be x_left:x_right:V");
            parts[i] = trim(parts[i]);
        }
        std::string extra;
        if (std::getline(triple, extra))
            throw ConfigInvalid("config key '" + key + "': segment must be x_left:x_right:V");
        out.push_back({parse_double(key, parts[0]), parse_double(key, parts[1]),
                       parse_double(key, parts[2])});
    }
    if (out.empty())
        throw ConfigInvalid("config key '" + key + "': empty segment list");
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
    ExperimentConfig cfg;

    const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
        setters{
            {"units.hbar", [&](auto& k, auto& v) { cfg.units.hbar = parse_double(k, v); }},
            {"units.mass", [&](auto& k, auto& v) { cfg.units.mass = parse_double(k, v); }},
            {"packet.p0", [&](auto& k, auto& v) { cfg.p0 = parse_double(k, v); }},
            {"packet.sigma_p", [&](auto& k, auto& v) { cfg.sigma_p = parse_double(k, v); }},
            {"packet.x0", [&](auto& k, auto& v) { cfg.x0 = parse_double(k, v); }},
            {"packet.direction",
             [&](auto& k, auto& v) {
                 if (v == "+") cfg.direction = Direction::plus;
                 else if (v == "-") cfg.direction = Direction::minus;
                 else throw ConfigInvalid("config key '" + k + "': expected + or -");
             }},
            {"packet.directionality_threshold",
             [&](auto& k, auto& v) { cfg.directionality_threshold = parse_double(k, v); }},
            {"packet.mode2.enabled",
             [&](auto& k, auto& v) { cfg.mode2_enabled = parse_bool(k, v); }},
            {"packet.mode2.p0", [&](auto& k, auto& v) { cfg.mode2_p0 = parse_double(k, v); }},
            {"packet.mode2.sigma_p",
             [&](auto& k, auto& v) { cfg.mode2_sigma_p = parse_double(k, v); }},
            {"packet.mode2.x0", [&](auto& k, auto& v) { cfg.mode2_x0 = parse_double(k, v); }},
            {"packet.mode2.weight",
             [&](auto& k, auto& v) { cfg.mode2_weight = parse_double(k, v); }},
            {"grid.n", [&](auto& k, auto& v) { cfg.grid_n = parse_count(k, v); }},
            {"grid.span_sigmas", [&](auto& k, auto& v) { cfg.span_sigmas = parse_double(k, v); }},
            {"grid.p_min", [&](auto& k, auto& v) { cfg.p_min = parse_double(k, v); }},
            {"grid.p_max", [&](auto& k, auto& v) { cfg.p_max = parse_double(k, v); }},
            {"time.policy",
             [&](auto& k, auto& v) {
                 if (v == "auto") cfg.time_auto = true;
                 else if (v == "explicit") cfg.time_auto = false;
                 else throw ConfigInvalid("config key '" + k + "': expected auto or explicit");
             }},
            {"time.n", [&](auto& k, auto& v) { cfg.time_n = parse_count(k, v); }},
            {"time.t_min", [&](auto& k, auto& v) { cfg.t_min = parse_double(k, v); }},
            {"time.t_max", [&](auto& k, auto& v) { cfg.t_max = parse_double(k, v); }},
            {"time.coverage", [&](auto& k, auto& v) { cfg.coverage = parse_double(k, v); }},
            {"time.window_sigmas",
             [&](auto& k, auto& v) { cfg.window_sigmas = parse_double(k, v); }},
            {"detectors", [&](auto& k, auto& v) { cfg.detectors = parse_list(k, v); }},
            {"potential.kind",
             [&](auto& k, auto& v) {
                 if (v == "none") cfg.potential_kind = PotentialKind::none;
                 else if (v == "rectangular") cfg.potential_kind = PotentialKind::rectangular;
                 else if (v == "piecewise") cfg.potential_kind = PotentialKind::piecewise;
                 else if (v == "gaussian_bump") cfg.potential_kind = PotentialKind::gaussian_bump;
                 else if (v == "samples") cfg.potential_kind = PotentialKind::samples;
                 else throw ConfigInvalid("config key '" + k + "': unknown potential kind");
             }},
            {"potential.v0", [&](auto& k, auto& v) { cfg.pot_v0 = parse_double(k, v); }},
            {"potential.width", [&](auto& k, auto& v) { cfg.pot_width = parse_double(k, v); }},
            {"potential.x_left", [&](auto& k, auto& v) { cfg.pot_x_left = parse_double(k, v); }},
            {"potential.segments",
             [&](auto& k, auto& v) { cfg.pot_segments = parse_segments(k, v); }},
            {"potential.center", [&](auto& k, auto& v) { cfg.bump_center = parse_double(k, v); }},
            {"potential.sigma", [&](auto& k, auto& v) { cfg.bump_sigma = parse_double(k, v); }},
            {"potential.cutoff_sigmas",
             [&](auto& k, auto& v) { cfg.bump_cutoff_sigmas = parse_double(k, v); }},
            {"potential.samples_n",
             [&](auto& k, auto& v) { cfg.bump_samples = parse_count(k, v); }},
            {"potential.file", [&](auto&, auto& v) { cfg.pot_file = v; }},
            {"scattering.asymptotic_margin_factor",
             [&](auto& k, auto& v) { cfg.asymptotic_margin_factor = parse_double(k, v); }},
            {"oracle.enabled", [&](auto& k, auto& v) { cfg.oracle_enabled = parse_bool(k, v); }},
            {"oracle.dt", [&](auto& k, auto& v) { cfg.oracle_dt = parse_double(k, v); }},
            {"oracle.n", [&](auto& k, auto& v) { cfg.oracle_n = parse_count(k, v); }},
            {"oracle.t_end", [&](auto& k, auto& v) { cfg.oracle_t_end = parse_double(k, v); }},
            {"oracle.spectral_derivative",
             [&](auto& k, auto& v) { cfg.oracle_spectral_derivative = parse_bool(k, v); }},
            {"compare.backflow", [&](auto& k, auto& v) { cfg.backflow = parse_bool(k, v); }},
            {"uncertainty.count",
             [&](auto& k, auto& v) { cfg.ensemble_count = parse_count(k, v); }},
            {"uncertainty.p0_min",
             [&](auto& k, auto& v) { cfg.ensemble_p0_min = parse_double(k, v); }},
            {"uncertainty.p0_max",
             [&](auto& k, auto& v) { cfg.ensemble_p0_max = parse_double(k, v); }},
            {"uncertainty.ratio_min",
             [&](auto& k, auto& v) { cfg.ensemble_ratio_min = parse_double(k, v); }},
            {"uncertainty.ratio_max",
             [&](auto& k, auto& v) { cfg.ensemble_ratio_max = parse_double(k, v); }},
            {"uncertainty.x0_min",
             [&](auto& k, auto& v) { cfg.ensemble_x0_min = parse_double(k, v); }},
            {"uncertainty.x0_max",
             [&](auto& k, auto& v) { cfg.ensemble_x0_max = parse_double(k, v); }},
            {"uncertainty.detector_span",
             [&](auto& k, auto& v) { cfg.ensemble_detector_span = parse_double(k, v); }},
            {"uncertainty.barrier",
             [&](auto& k, auto& v) { cfg.ensemble_barrier = parse_bool(k, v); }},
            {"tolerances.normalization",
             [&](auto& k, auto& v) { cfg.tol_normalization = parse_double(k, v); }},
            {"tolerances.mean_gap",
             [&](auto& k, auto& v) { cfg.tol_mean_gap = parse_double(k, v); }},
            {"tolerances.window", [&](auto& k, auto& v) { cfg.tol_window = parse_double(k, v); }},
            {"tolerances.throughput",
             [&](auto& k, auto& v) { cfg.tol_throughput = parse_double(k, v); }},
            {"tolerances.uncertainty_slack",
             [&](auto& k, auto& v) { cfg.tol_uncertainty_slack = parse_double(k, v); }},
        };

    std::map<std::string, bool> seen;
    std::stringstream stream(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid("config line " + std::to_string(line_no) +
                                ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigInvalid("config line " + std::to_string(line_no) + ": unknown key '" +
                                key + "'");
        if (seen[key])
            throw ConfigInvalid("config line " + std::to_string(line_no) + ": duplicate key '" +
                                key + "'");
        seen[key] = true;
        it->second(key, value);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigInvalid("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str());
}

void ExperimentConfig::validate(RunMode mode) const {
    if (!(units.hbar > 0.0)) throw ConfigInvalid("units.hbar: must be > 0");
    if (!(units.mass > 0.0)) throw ConfigInvalid("units.mass: must be > 0");

    const bool needs_packet = mode != RunMode::uncertainty;
    if (needs_packet) {
        if (!(sigma_p > 0.0)) throw ConfigInvalid("packet.sigma_p: must be > 0");
        if (p0 == 0.0) throw ConfigInvalid("packet.p0: required and nonzero");
        if ((direction == Direction::plus) != (p0 > 0.0))
            throw ConfigInvalid("packet.direction: inconsistent with the sign of packet.p0");
        if (detectors.empty()) throw ConfigInvalid("detectors: at least one position required");
        if (grid_n < 16) throw ConfigInvalid("grid.n: must be >= 16");
        if (!(span_sigmas > 0.0)) throw ConfigInvalid("grid.span_sigmas: must be > 0");
        if (time_n < 2) throw ConfigInvalid("time.n: must be >= 2");
        if (!time_auto && !(t_min < t_max))
            throw ConfigInvalid("time.t_min/time.t_max: need t_min < t_max for explicit policy");
        if (mode2_enabled && !(mode2_sigma_p > 0.0))
            throw ConfigInvalid("packet.mode2.sigma_p: must be > 0 when mode2 is enabled");
    }

    switch (mode) {
        case RunMode::free_run:
            if (potential_kind != PotentialKind::none)
                throw ConfigInvalid("potential.kind: must be none for the free pipeline");
            break;
        case RunMode::barrier:
            if (potential_kind == PotentialKind::none)
                throw ConfigInvalid("potential.kind: a potential is required for the barrier pipeline");
            break;
        case RunMode::compare:
            if (!oracle_enabled)
                throw ConfigInvalid("oracle.enabled: the compare pipeline requires the oracle");
            if (backflow && !mode2_enabled)
                throw ConfigInvalid("packet.mode2.enabled: backflow comparison needs a second mode");
            break;
        case RunMode::uncertainty:
            if (ensemble_count == 0)
                throw ConfigInvalid("uncertainty.count: ensemble must be non-empty");
            if (!(ensemble_p0_min > 0.0) || !(ensemble_p0_max >= ensemble_p0_min))
                throw ConfigInvalid("uncertainty.p0_min/p0_max: need 0 < p0_min <= p0_max");
            if (!(ensemble_ratio_min >= 5.0))
                throw ConfigInvalid("uncertainty.ratio_min: must be >= 5 (directed packets)");
            break;
    }

    if (oracle_n != 0 && (oracle_n < 256 || (oracle_n & (oracle_n - 1)) != 0))
        throw ConfigInvalid("oracle.n: must be a power of two >= 256 (or 0 for auto)");
    if (potential_kind == PotentialKind::rectangular && !(pot_width > 0.0))
        throw ConfigInvalid("potential.width: must be > 0");
    if (potential_kind == PotentialKind::piecewise && pot_segments.empty())
        throw ConfigInvalid("potential.segments: required for piecewise potentials");
    if (potential_kind == PotentialKind::gaussian_bump && !(bump_sigma > 0.0))
        throw ConfigInvalid("potential.sigma: must be > 0");
    if (potential_kind == PotentialKind::samples && pot_file.empty())
        throw ConfigInvalid("potential.file: required for sampled potentials");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    auto put = [&](const std::string& k, const std::string& v) { out.emplace_back(k, v); };
    auto put_d = [&](const std::string& k, double v) { put(k, format_double(v)); };
    auto put_n = [&](const std::string& k, std::size_t v) { put(k, std::to_string(v)); };
    auto put_b = [&](const std::string& k, bool v) { put(k, v ? "true" : "false"); };

    put_d("units.hbar", units.hbar);
    put_d("units.mass", units.mass);
    put_d("packet.p0", p0);
    put_d("packet.sigma_p", sigma_p);
    put_d("packet.x0", x0);
    put("packet.direction", direction == Direction::plus ? "+" : "-");
    put_d("packet.directionality_threshold", directionality_threshold);
    put_b("packet.mode2.enabled", mode2_enabled);
    if (mode2_enabled) {
        put_d("packet.mode2.p0", mode2_p0);
        put_d("packet.mode2.sigma_p", mode2_sigma_p);
        put_d("packet.mode2.x0", mode2_x0);
        put_d("packet.mode2.weight", mode2_weight);
    }
    put_n("grid.n", grid_n);
    put_d("grid.span_sigmas", span_sigmas);
    if (p_min) put_d("grid.p_min", *p_min);
    if (p_max) put_d("grid.p_max", *p_max);
    put("time.policy", time_auto ? "auto" : "explicit");
    put_n("time.n", time_n);
    if (!time_auto) {
        put_d("time.t_min", t_min);
        put_d("time.t_max", t_max);
    }
    put_d("time.coverage", coverage);
    put_d("time.window_sigmas", window_sigmas);
    std::string dets;
    for (std::size_t i = 0; i < detectors.size(); ++i) {
        if (i) dets += ",";
        dets += format_double(detectors[i]);
    }
    put("detectors", dets);
    switch (potential_kind) {
        case PotentialKind::none: put("potential.kind", "none"); break;
        case PotentialKind::rectangular:
            put("potential.kind", "rectangular");
            put_d("potential.v0", pot_v0);
            put_d("potential.width", pot_width);
            put_d("potential.x_left", pot_x_left);
            break;
        case PotentialKind::piecewise: {
            put("potential.kind", "piecewise");
            std::string segs;
            for (std::size_t i = 0; i < pot_segments.size(); ++i) {
                if (i) segs += ",";
                segs += format_double(pot_segments[i].x_left) + ":" +
                        format_double(pot_segments[i].x_right) + ":" +
                        format_double(pot_segments[i].height);
            }
            put("potential.segments", segs);
            break;
        }
        case PotentialKind::gaussian_bump:
            put("potential.kind", "gaussian_bump");
            put_d("potential.v0", pot_v0);
            put_d("potential.center", bump_center);
            put_d("potential.sigma", bump_sigma);
            put_d("potential.cutoff_sigmas", bump_cutoff_sigmas);
            put_n("potential.samples_n", bump_samples);
            break;
        case PotentialKind::samples:
            put("potential.kind", "samples");
            put("potential.file", pot_file);
            break;
    }
    put_d("scattering.asymptotic_margin_factor", asymptotic_margin_factor);
    put_b("oracle.enabled", oracle_enabled);
    if (oracle_enabled) {
        put_d("oracle.dt", oracle_dt);
        put_n("oracle.n", oracle_n);
        put_d("oracle.t_end", oracle_t_end);
        put_b("oracle.spectral_derivative", oracle_spectral_derivative);
    }
    put_b("compare.backflow", backflow);
    if (ensemble_count > 0) {
        put_n("uncertainty.count", ensemble_count);
        put_d("uncertainty.p0_min", ensemble_p0_min);
        put_d("uncertainty.p0_max", ensemble_p0_max);
        put_d("uncertainty.ratio_min", ensemble_ratio_min);
        put_d("uncertainty.ratio_max", ensemble_ratio_max);
        put_d("uncertainty.x0_min", ensemble_x0_min);
        put_d("uncertainty.x0_max", ensemble_x0_max);
        put_d("uncertainty.detector_span", ensemble_detector_span);
        put_b("uncertainty.barrier", ensemble_barrier);
    }
    put_d("tolerances.normalization", tol_normalization);
    put_d("tolerances.mean_gap", tol_mean_gap);
    put_d("tolerances.window", tol_window);
    put_d("tolerances.throughput", tol_throughput);
    put_d("tolerances.uncertainty_slack", tol_uncertainty_slack);
    return out;
}

MomentumGrid ExperimentConfig::build_grid() const {
    const double sigma = mode2_enabled ? std::max(sigma_p, mode2_sigma_p) : sigma_p;
    const double lo_centre = mode2_enabled ? std::min(p0, mode2_p0) : p0;
    const double hi_centre = mode2_enabled ? std::max(p0, mode2_p0) : p0;
    double lo = lo_centre - span_sigmas * sigma;
    double hi = hi_centre + span_sigmas * sigma;
    if (direction == Direction::plus) {
        if (lo <= 0.0) lo = std::min(lo_centre, std::abs(lo_centre) / 8.0);
        lo = std::max(lo, 1e-6);
    } else {
        if (hi >= 0.0) hi = std::max(hi_centre, -std::abs(hi_centre) / 8.0);
        hi = std::min(hi, -1e-6);
    }
    if (p_min) lo = *p_min;
    if (p_max) hi = *p_max;
    return MomentumGrid::uniform(lo, hi, grid_n);
}

WavePacket ExperimentConfig::build_packet() const {
    const MomentumGrid grid = build_grid();
    GaussianSpec spec;
    spec.p0 = p0;
    spec.sigma_p = sigma_p;
    spec.x0 = x0;
    spec.units = units;
    spec.directionality_threshold = directionality_threshold;
    WavePacket main = build_gaussian(spec, grid);
    if (!mode2_enabled) return main;

    GaussianSpec second = spec;
    second.p0 = mode2_p0;
    second.sigma_p = mode2_sigma_p;
    second.x0 = mode2_x0;
    const WavePacket other = build_gaussian(second, grid);
    return superpose(std::array{main, other}, std::array{1.0, mode2_weight});
}

std::optional<PotentialSpec> ExperimentConfig::build_potential() const {
    switch (potential_kind) {
        case PotentialKind::none:
            return std::nullopt;
        case PotentialKind::rectangular:
            return PotentialSpec::piecewise({{pot_x_left, pot_x_left + pot_width, pot_v0}});
        case PotentialKind::piecewise:
            return PotentialSpec::piecewise(pot_segments);
        case PotentialKind::gaussian_bump: {
            std::vector<double> xs(bump_samples), vs(bump_samples);
            const double half = bump_cutoff_sigmas * bump_sigma;
            for (std::size_t i = 0; i < bump_samples; ++i) {
                const double u = static_cast<double>(i) / static_cast<double>(bump_samples - 1);
                const double x = bump_center - half + 2.0 * half * u;
                xs[i] = x;
                const double z = (x - bump_center) / bump_sigma;
                vs[i] = pot_v0 * std::exp(-0.5 * z * z);
            }
            return PotentialSpec::sampled(std::move(xs), std::move(vs));
        }
        case PotentialKind::samples: {
            std::ifstream in(pot_file);
            if (!in)
                throw ConfigInvalid("potential.file: cannot open '" + pot_file + "'");
            std::vector<double> xs, vs;
            std::string line;
            while (std::getline(in, line)) {
                line = trim(line);
                if (line.empty() || line.front() == '#') continue;
                const auto comma = line.find(',');
                if (comma == std::string::npos)
                    throw ConfigInvalid("potential.file: expected 'x,V' lines");
                xs.push_back(parse_double("potential.file", trim(line.substr(0, comma))));
                vs.push_back(parse_double("potential.file", trim(line.substr(comma + 1))));
            }
            return PotentialSpec::sampled(std::move(xs), std::move(vs));
        }
    }
    return std::nullopt;
}

} // namespace qarrival
