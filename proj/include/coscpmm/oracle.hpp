#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "coscpmm/model.hpp"
#include "coscpmm/pss.hpp"
#include "coscpmm/types.hpp"

// Brute-force reference: Euler-Maruyama integration of the noisy nonlinear
// system and segment-averaged periodograms. Uses the model callbacks only.
namespace coscpmm::oracle {

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

struct McConfig {
    int n_paths = 32;
    double dt = 0.0;         // 0: T0 / 200
    double duration = 0.0;   // per path; 0: 200 T0
    std::uint64_t seed = kDefaultSeed;
    int window = 4096;       // periodogram segment length, in decimated samples
    int decimate = 1;        // boxcar average over this many steps per PSD sample

    /// Fills the defaults and enforces dt <= T0/200, duration >= 50 T0, n_paths >= 8.
    [[nodiscard]] McConfig resolved(double T0) const;
};

/// Called once per step with (step index, time, state) including the initial point.
using StepSink = std::function<void(long long, double, const Vec&)>;

/// One Euler-Maruyama path from x0: trapezoidal deterministic part, noise
/// increments B(x_j) dW with dW ~ N(0, dt). The RNG stream is derived from
/// (cfg.seed, path).
void simulate_path(const CircuitModel& model, const Vec& x0, const McConfig& cfg, int path,
                   double amplitude, const StepSink& sink);

/// Per path, (steps / decimate + 1) x n boxcar-averaged states (decimate = 1
/// returns the raw trajectory). Starts on the limit cycle at x_s(0).
[[nodiscard]] std::vector<Mat> simulate_sde(const CircuitModel& model, const PssSolution& pss,
                                            const McConfig& cfg);

/// Streaming Welch estimator: Hann window, 50 % overlap, one-sided PSD per Hz.
class Welch {
public:
    Welch(int segment, double fs);
    Welch(const Welch&) = delete;
    Welch& operator=(const Welch&) = delete;
    Welch(Welch&&) noexcept;
    Welch& operator=(Welch&&) = delete;
    ~Welch();

    void push(double sample);
    /// Adds another estimator's accumulated periodograms.
    void merge(const Welch& other);

    [[nodiscard]] int segments() const noexcept { return count_; }
    [[nodiscard]] double fs() const noexcept { return fs_; }
    [[nodiscard]] int segment_length() const noexcept { return n_; }
    [[nodiscard]] double bin_width() const noexcept { return fs_ / n_; }
    /// Averaged one-sided PSD, bins 0..n/2.
    [[nodiscard]] std::vector<double> psd() const;

private:
    void process();

    int n_;
    double fs_;
    std::vector<double> window_;
    double wsum2_ = 0.0;
    std::vector<double> buf_;
    std::vector<double> acc_;
    int count_ = 0;
    double* in_ = nullptr;
    void* out_ = nullptr;
    void* plan_ = nullptr;
};

/// Linear interpolation of a binned one-sided PSD at frequency f.
[[nodiscard]] double psd_at(const std::vector<double>& psd, double bin_width, double f);

/// Integral of the PSD over [0.5 f0, 1.5 f0] (twice the harmonic power for a line at f0).
[[nodiscard]] double carrier_power(const std::vector<double>& psd, double bin_width, double f0);

struct SpectrumEstimate {
    std::vector<double> offsets;   // Hz
    std::vector<double> density;   // 1/Hz relative to the carrier, sidebands averaged
    double carrier = 0.0;
};

/// Sideband-averaged density around nu f0, normalised by the carrier power.
[[nodiscard]] SpectrumEstimate estimate_spectrum(const std::vector<double>& psd, double bin_width, double f0,
                                                 int nu, const std::vector<double>& offsets);

/// Upward crossings of `level` by linear interpolation between samples. After
/// a crossing the detector re-arms only once the signal has fallen below
/// level - hysteresis, so noise chatter near the level yields one event.
class CrossingDetector {
public:
    explicit CrossingDetector(double level, double hysteresis = 0.0) : level_(level), hyst_(hysteresis) {}
    void push(double t, double value);
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }

private:
    double level_;
    double hyst_;
    bool armed_ = false;
    bool have_prev_ = false;
    double t_prev_ = 0.0;
    double v_prev_ = 0.0;
    std::vector<double> times_;
};

struct DiffusionFit {
    double c = 0.0;          // slope of increment variance vs. elapsed time
    double intercept = 0.0;  // timing measurement noise
    double period = 0.0;     // ensemble mean crossing period
};

/// Regresses Var(t_{n+m} - t_n) on m T for m = 1..max_lag over all paths.
[[nodiscard]] DiffusionFit fit_phase_diffusion(const std::vector<std::vector<double>>& crossings, int max_lag);

/// Least-squares Lorentzian fit 1/L = alpha + beta omega_m^2 over the given
/// points; returns c = 1 / (omega0^2 beta).
[[nodiscard]] double lorentzian_c(const std::vector<double>& offsets, const std::vector<double>& density,
                                  double f0);

struct McResult {
    double f0 = 0.0;
    double carrier = 0.0;
    DiffusionFit diffusion;
    std::vector<double> offsets;
    std::vector<double> density;
    int segments = 0;
    double bin_width = 0.0;
};

/// Full oracle run: paths in parallel, per-path Welch and crossing streams,
/// merged in path order so the result does not depend on thread count.
[[nodiscard]] McResult run_mc(const CircuitModel& model, const PssSolution& pss, const McConfig& cfg, int node,
                              int nu, const std::vector<double>& offsets, int max_lag = 10,
                              Exec exec = Exec::parallel);

}  // namespace coscpmm::oracle
