#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coscpmm/config.hpp"
#include "coscpmm/floquet.hpp"
#include "coscpmm/noise_ops.hpp"
#include "coscpmm/oracle.hpp"
#include "coscpmm/spectra.hpp"

namespace coscpmm {

struct NodeSummary {
    std::string node;
    int nu = 1;
    double carrier_power = 0.0;
};

struct McOverlay {
    std::string node;
    int nu = 1;
    oracle::McResult result;
};

struct RunResult {
    std::string model;
    double T0 = 0.0;
    double omega0 = 0.0;
    double c = 0.0;
    int k = 1;
    int L = 0;
    int pss_iterations = 0;
    double pss_defect = 0.0;
    std::vector<cplx> mu;                       // retained exponents
    std::vector<NodeSummary> nodes;
    std::vector<SpectrumDataset> datasets;
    std::vector<McOverlay> mc;
    std::vector<std::filesystem::path> files;   // final locations
};

/// PSS -> Floquet -> operators -> spectra (-> oracle), then writes every file
/// into cfg.output_dir. Files are staged in a temporary directory and moved in
/// only after every stage succeeded. Stage failures are rethrown with the
/// stage name and a remediation hint.
[[nodiscard]] RunResult run_pipeline(const SimulationConfig& cfg);

void print_summary(std::ostream& os, const RunResult& res);

}  // namespace coscpmm
