#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coscpmm/spectra.hpp"

namespace coscpmm {

struct OverlayCurve {
    std::string label;
    std::string file;   // CSV with f_offset_hz,pnoise_dbc, relative to the plot directory
    std::vector<double> freqs;
    std::vector<double> dbc;
};

struct PlotFiles {
    std::filesystem::path script;
    std::filesystem::path svg;
};

/// Writes `<stem>.gp` (gnuplot script reading the per-node CSV files) and a
/// self-contained `<stem>.svg`. Log offset axis, dBc vertical axis. With more
/// than one node the first is drawn dashed and the rest solid; oracle overlays
/// are dashed grey with markers. Nodes without amplitude noise get a note
/// instead of an empty curve.
PlotFiles emit_plot(const std::vector<SpectrumDataset>& datasets, const std::vector<OverlayCurve>& overlays,
                    const std::filesystem::path& dir, const std::string& stem);

}  // namespace coscpmm
