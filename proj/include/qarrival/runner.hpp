#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qarrival/config.hpp"

namespace qarrival {

// One output file: '# key: value' header lines, a column row, data rows.
struct Table {
    std::string name;
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct ResultBundle {
    std::vector<std::pair<std::string, std::string>> provenance;
    std::vector<Table> tables;
    std::vector<std::pair<std::string, std::string>> summary;
    bool verdicts_ok = true;

    // Atomic (write-temp-then-rename), byte-deterministic emission.
    void write(const std::string& directory, OutputFormat format) const;
};

ResultBundle run_free(const ExperimentConfig& config);
ResultBundle run_barrier(const ExperimentConfig& config);
ResultBundle run_compare(const ExperimentConfig& config);
ResultBundle run_uncertainty(const ExperimentConfig& config, std::uint64_t seed);

} // namespace qarrival
