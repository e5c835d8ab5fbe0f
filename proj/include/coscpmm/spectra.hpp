#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coscpmm/noise_ops.hpp"
#include "coscpmm/types.hpp"

namespace coscpmm {

enum class SweepKind { lin, log };

struct SweepSpec {
    double start = 1e3;
    double stop = 1e6;
    SweepKind kind = SweepKind::log;
    int n_points = 10;   // total for lin, per decade for log

    void validate() const;
};

/// Offset frequencies in Hz, both endpoints included.
[[nodiscard]] std::vector<double> generate_sweep(const SweepSpec& spec);

// Linear spectral densities around harmonic nu of one observation node, in
// 1/Hz relative to the carrier. omega_m is the offset in rad/s.
[[nodiscard]] double pnoise_at(double omega_m, const NodeOperators& node, const NoiseOperators& ops);
[[nodiscard]] double anoise_at(double omega_m, const NodeOperators& node, const NoiseOperators& ops);
[[nodiscard]] double xnoise_at(double omega_m, const NodeOperators& node, const NoiseOperators& ops);

struct ReducedSpectra {
    double pnoise = 0.0;
    double anoise = 0.0;
    double xnoise = 0.0;
};

/// Single-oscillator (k = 1) closed forms evaluated on their own code path.
[[nodiscard]] ReducedSpectra reduced_single_osc(double omega_m, double c, double omega0, int nu,
                                                const NodeOperators& node, const std::vector<cplx>& mu);
[[nodiscard]] ReducedSpectra reduced_single_osc(double omega_m, const NodeOperators& node,
                                                const NoiseOperators& ops);

struct SpectrumDataset {
    std::string node;
    int nu = 1;
    std::vector<double> freqs;    // Hz offset
    std::vector<double> pnoise;   // linear
    std::vector<double> anoise;   // linear
    std::vector<double> xnoise;   // signed linear

    [[nodiscard]] bool has_anoise() const;
};

/// 10 log10(x); values at or below zero map to kDbFloor.
inline constexpr double kDbFloor = -400.0;
[[nodiscard]] double to_db(double linear);

[[nodiscard]] std::vector<SpectrumDataset> assemble_datasets(const NoiseOperators& ops,
                                                             const std::vector<double>& freqs,
                                                             Exec exec = Exec::parallel);

namespace ref {
[[nodiscard]] std::vector<SpectrumDataset> assemble_datasets(const NoiseOperators& ops,
                                                             const std::vector<double>& freqs);
}  // namespace ref

/// `f_offset_hz,pnoise_dbc,anoise_dbc,xnoise_signed,xnoise_db`
void write_spectrum_csv(std::ostream& os, const SpectrumDataset& ds);

/// File stem for a node/harmonic pair: `v` for nu = 1, `v.h3` otherwise.
[[nodiscard]] std::string dataset_stem(const std::string& node, int nu);

enum class SpectrumKind { pn, an, xn };
/// Single-kind file: `f_offset_hz,pnoise_dbc` / `f_offset_hz,anoise_dbc` /
/// `f_offset_hz,xnoise_signed,xnoise_db`.
void write_kind_csv(std::ostream& os, const SpectrumDataset& ds, SpectrumKind kind);

}  // namespace coscpmm
