#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coscpmm/model.hpp"
#include "coscpmm/oracle.hpp"
#include "coscpmm/pss.hpp"
#include "coscpmm/spectra.hpp"

namespace coscpmm {

/// Built-in model selection plus parameters.
struct ModelSpec {
    std::string name = "vdp";            // vdp | ilo2 | ringN
    std::string preset = "normalized";   // normalized | uhf
    double eps = 1.0;
    double noise = 1e-4;
    double gm = 0.02;
    double rc = 10.0;
    std::map<int, std::map<std::string, double>> unit_overrides;   // 1-based unit -> field -> value

    [[nodiscard]] int units() const;
    [[nodiscard]] std::vector<VdpParams> unit_params() const;
};

struct BuiltModel {
    CircuitModel model;
    EnsembleMeta meta;
    PssGuess guess;
};

[[nodiscard]] BuiltModel build_model(const ModelSpec& spec);

struct SimulationConfig {
    ModelSpec model;
    SweepSpec sweep;
    int nf = 16;
    std::vector<std::string> noise_nodes;
    int k = 1;
    std::vector<int> nu_list{1};
    PssOptions pss;
    std::optional<double> T0_guess;
    std::optional<Vec> x0;
    bool mc_enabled = false;
    oracle::McConfig mc;
    std::filesystem::path output_dir = "out";
    bool plot = false;

    /// Enforces every cross-field rule against the built model.
    void validate(const CircuitModel& model) const;
};

/// Parses `key = value` lines; `#` starts a comment. See docs/config.md.
[[nodiscard]] SimulationConfig parse_config_text(const std::string& text);
[[nodiscard]] SimulationConfig parse_config(const std::filesystem::path& path);

}  // namespace coscpmm
