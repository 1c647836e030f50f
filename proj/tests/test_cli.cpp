#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qarrival/runner.hpp"

using namespace qarrival;
namespace fs = std::filesystem;

namespace {

const char* kFreeConfig = R"(
packet.p0 = 5.0
packet.sigma_p = 0.5
packet.x0 = -20.0
detectors = 0.0, 10.0
)";

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("qarrival_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct ParsedTable {
    std::map<std::string, std::string> header;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

ParsedTable parse_csv(const fs::path& path) {
    ParsedTable out;
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    bool columns_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            REQUIRE(colon != std::string::npos);
            out.header[line.substr(2, colon - 2)] = line.substr(colon + 2);
            continue;
        }
        std::stringstream ss(line);
        std::string item;
        if (!columns_seen) {
            while (std::getline(ss, item, ',')) out.columns.push_back(item);
            columns_seen = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, item, ',')) row.push_back(std::stod(item));
        out.rows.push_back(std::move(row));
    }
    return out;
}

double summary_value(const fs::path& dir, const std::string& key) {
    std::ifstream in(dir / "summary.csv");
    REQUIRE(in.good());
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + ",", 0) == 0) return std::stod(line.substr(key.size() + 1));
    }
    FAIL("summary key not found: ", key);
    return 0.0;
}

} // namespace

TEST_CASE("free pipeline emits the documented CSV schema") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(kFreeConfig);
    const ResultBundle bundle = run_free(cfg);
    CHECK(bundle.verdicts_ok);

    const fs::path dir = fresh_dir("schema");
    bundle.write(dir.string(), OutputFormat::csv);

    const ParsedTable dist = parse_csv(dir / "dist_0.csv");
    CHECK(dist.columns == std::vector<std::string>{"tau", "density"});
    CHECK(dist.header.at("schema") == "arrival_distribution/v1");
    CHECK(std::abs(std::stod(dist.header.at("total")) - 1.0) < 1e-6);
    CHECK(dist.rows.size() == cfg.time_n);

    // Emitted rows integrate back to the emitted total (trapezoid weights
    // derived from the tau column).
    const double total = std::stod(dist.header.at("total"));
    double acc = 0.0;
    for (std::size_t j = 1; j < dist.rows.size(); ++j)
        acc += 0.5 * (dist.rows[j][0] - dist.rows[j - 1][0]) *
               (dist.rows[j][1] + dist.rows[j - 1][1]);
    CHECK(std::abs(acc - total) < 1e-9);
}

TEST_CASE("two detectors are separated by m dX <1/p>") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(kFreeConfig);
    const ResultBundle bundle = run_free(cfg);
    const fs::path dir = fresh_dir("detectors");
    bundle.write(dir.string(), OutputFormat::csv);

    const ParsedTable moments = parse_csv(dir / "moments.csv");
    REQUIRE(moments.rows.size() == 2);
    const double gap = moments.rows[1][1] - moments.rows[0][1];
    const PacketMoments mom = packet_moments(cfg.build_packet());
    CHECK(std::abs(gap - 10.0 * mom.inv_p_mean) / gap < 0.01);
}

TEST_CASE("malformed configs name the offending field") {
    CHECK_THROWS_WITH_AS(
        (void)run_free(ExperimentConfig::parse_string("packet.p0 = 5\npacket.sigma_p = -1\n"
                                                      "detectors = 0\n")),
        doctest::Contains("packet.sigma_p"), ConfigInvalid);
    CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse_string("packet.momentum = 5\n"),
                         doctest::Contains("unknown key"), ConfigInvalid);
    CHECK_THROWS_WITH_AS((void)ExperimentConfig::parse_string("packet.p0 = 5\npacket.p0 = 6\n"),
                         doctest::Contains("duplicate key"), ConfigInvalid);
}

TEST_CASE("zero-height barrier reproduces the free table byte for byte") {
    const std::string base = R"(
packet.p0 = 5.0
packet.sigma_p = 0.5
packet.x0 = -20.0
detectors = 25.0
)";
    const ExperimentConfig free_cfg = ExperimentConfig::parse_string(base);
    const ExperimentConfig barrier_cfg = ExperimentConfig::parse_string(
        base + "potential.kind = rectangular\npotential.v0 = 0.0\npotential.width = 1.0\n");

    const fs::path free_dir = fresh_dir("free_limit_a");
    const fs::path barrier_dir = fresh_dir("free_limit_b");
    run_free(free_cfg).write(free_dir.string(), OutputFormat::csv);
    run_barrier(barrier_cfg).write(barrier_dir.string(), OutputFormat::csv);

    CHECK(slurp(free_dir / "dist_0.csv") == slurp(barrier_dir / "dist_0.csv"));
}

TEST_CASE("barrier summary transmittance equals the coefficient quadrature") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(R"(
packet.p0 = 5.0
packet.sigma_p = 0.5
packet.x0 = -20.0
detectors = 25.0
potential.kind = rectangular
potential.v0 = 1.0
potential.width = 1.0
)");
    const ResultBundle bundle = run_barrier(cfg);
    CHECK(bundle.verdicts_ok);
    const fs::path dir = fresh_dir("transmittance");
    bundle.write(dir.string(), OutputFormat::csv);

    const WavePacket packet = cfg.build_packet();
    const ScatteringCoefficients cs =
        solve_coefficients(*cfg.build_potential(), packet.grid, cfg.units);
    double quad = 0.0;
    for (std::size_t i = 0; i < packet.size(); ++i)
        quad += packet.grid.weights[i] * std::norm(cs.T[i]) * std::norm(packet.amplitudes[i]);
    CHECK(std::abs(summary_value(dir, "transmittance") - quad) < 1e-6);

    const ParsedTable coeffs = parse_csv(dir / "coefficients.csv");
    CHECK(coeffs.columns ==
          std::vector<std::string>{"p", "T_re", "T_im", "R_re", "R_im"});
}

TEST_CASE("deep tunneling still reports a finite conditional mean") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(R"(
packet.p0 = 5.0
packet.sigma_p = 0.5
packet.x0 = -20.0
detectors = 25.0
potential.kind = rectangular
potential.v0 = 50.0
potential.width = 1.0
)");
    const ResultBundle bundle = run_barrier(cfg);
    const fs::path dir = fresh_dir("tunneling");
    bundle.write(dir.string(), OutputFormat::csv);
    CHECK(summary_value(dir, "transmittance") < 1e-4);
    const ParsedTable moments = parse_csv(dir / "moments.csv");
    CHECK(std::isfinite(moments.rows[0][1]));
    CHECK(moments.rows[0][1] > 0.0);
}

TEST_CASE("compare pipeline: quasi-classical gap within tolerance") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(R"(
packet.p0 = 5.0
packet.sigma_p = 0.5
packet.x0 = -20.0
detectors = 0.0
oracle.enabled = true
)");
    const ResultBundle bundle = run_compare(cfg);
    CHECK(bundle.verdicts_ok);
    const fs::path dir = fresh_dir("compare");
    bundle.write(dir.string(), OutputFormat::csv);
    const ParsedTable table = parse_csv(dir / "compare.csv");
    CHECK(table.rows[0][4] <= 0.01);   // rel_gap
    CHECK(table.rows[0][6] == 1.0);    // verdict
}

TEST_CASE("compare pipeline reports backflow") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(R"(
packet.p0 = 3.0
packet.sigma_p = 0.18
packet.x0 = -10.0
packet.mode2.enabled = true
packet.mode2.p0 = 1.2
packet.mode2.sigma_p = 0.18
packet.mode2.x0 = -10.0
detectors = 0.0
oracle.enabled = true
compare.backflow = true
)");
    const ResultBundle bundle = run_compare(cfg);
    CHECK(bundle.verdicts_ok);
    const fs::path dir = fresh_dir("backflow");
    bundle.write(dir.string(), OutputFormat::csv);
    CHECK(summary_value(dir, "backflow.min_current") < 0.0);
    CHECK(summary_value(dir, "backflow.min_density") >= 0.0);
}

TEST_CASE("compare without the oracle is a config error") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(kFreeConfig);
    CHECK_THROWS_AS((void)run_compare(cfg), ConfigInvalid);
}

TEST_CASE("uncertainty ensemble respects the hbar/2 floor") {
    ExperimentConfig cfg = ExperimentConfig::parse_string("uncertainty.count = 30\n");
    const ResultBundle bundle = run_uncertainty(cfg, 42);
    CHECK(bundle.verdicts_ok);
    const fs::path dir = fresh_dir("uncertainty");
    bundle.write(dir.string(), OutputFormat::csv);
    const ParsedTable table = parse_csv(dir / "ensemble.csv");
    CHECK(table.rows.size() == 60);   // free + transmitted per member
    for (const auto& row : table.rows)
        CHECK(row[8] >= 0.5 - 1e-6);
    CHECK(summary_value(dir, "min_product") >= 0.5 - 1e-6);

    CHECK_THROWS_AS((void)run_uncertainty(ExperimentConfig::parse_string(""), 1),
                    ConfigInvalid);
}

TEST_CASE("identical config and seed give byte-identical outputs") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(kFreeConfig);
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    run_free(cfg).write(a.string(), OutputFormat::csv);
    run_free(cfg).write(b.string(), OutputFormat::csv);
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path name = entry.path().filename();
        CHECK(slurp(a / name) == slurp(b / name));
    }

    ExperimentConfig ens = ExperimentConfig::parse_string("uncertainty.count = 8\n");
    const fs::path c = fresh_dir("det_c");
    const fs::path d = fresh_dir("det_d");
    run_uncertainty(ens, 7).write(c.string(), OutputFormat::csv);
    run_uncertainty(ens, 7).write(d.string(), OutputFormat::csv);
    CHECK(slurp(c / "ensemble.csv") == slurp(d / "ensemble.csv"));
}

TEST_CASE("json output mirrors the csv tables") {
    const ExperimentConfig cfg = ExperimentConfig::parse_string(kFreeConfig);
    const ResultBundle bundle = run_free(cfg);
    const fs::path dir = fresh_dir("json");
    bundle.write(dir.string(), OutputFormat::json);

    const auto j = nlohmann::json::parse(slurp(dir / "dist_0.json"));
    CHECK(j["columns"] == nlohmann::json({"tau", "density"}));
    CHECK(j["rows"].size() == cfg.time_n);
    CHECK(j["header"]["schema"] == "arrival_distribution/v1");

    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["results"]["verdicts"] == "pass");
    CHECK(summary["provenance"]["config.packet.p0"] == "5");
}

#ifdef QARRIVAL_CLI
TEST_CASE("binary exit codes") {
    const fs::path dir = fresh_dir("cli");
    const fs::path cfg_path = dir / "run.cfg";
    std::ofstream(cfg_path) << kFreeConfig;

    const std::string cli = QARRIVAL_CLI;
    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };

    CHECK(run("validate --config " + cfg_path.string()) == 0);
    CHECK(run("free --config " + cfg_path.string() + " --out " + (dir / "out").string()) == 0);
    CHECK(run("free --config " + (dir / "missing.cfg").string()) == 2);

    const fs::path bad = dir / "bad.cfg";
    std::ofstream(bad) << "packet.p0 = 5\npacket.sigma_p = -1\ndetectors = 0\n";
    CHECK(run("free --config " + bad.string()) == 2);

    // Absurd tolerance: run succeeds numerically but the verdict fails.
    const fs::path strict = dir / "strict.cfg";
    std::ofstream(strict) << kFreeConfig << "oracle.enabled = true\n"
                          << "tolerances.mean_gap = 1e-12\n";
    CHECK(run("compare --config " + strict.string() + " --out " +
              (dir / "out2").string()) == 1);

    // Numerical failure: an explicit window that misses the packet.
    const fs::path narrow = dir / "narrow.cfg";
    std::ofstream(narrow) << kFreeConfig << "time.policy = explicit\n"
                          << "time.t_min = 30.0\ntime.t_max = 40.0\ntime.n = 64\n";
    CHECK(run("free --config " + narrow.string() + " --out " +
              (dir / "out3").string()) == 3);
}
#endif
