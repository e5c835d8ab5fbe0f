#include "coscpmm/oracle.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

#include "coscpmm/error.hpp"

namespace coscpmm::oracle {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

McConfig McConfig::resolved(double T0) const {
    McConfig c = *this;
    if (c.dt == 0.0) c.dt = T0 / 200.0;
    if (c.duration == 0.0) c.duration = 200.0 * T0;
    if (!(c.dt > 0.0) || c.dt > T0 / 200.0 * (1.0 + 1e-12)) {
        throw Error(ErrorKind::configuration, "Monte-Carlo step must satisfy 0 < dt <= T0/200");
    }
    if (c.duration < 50.0 * T0 * (1.0 - 1e-12)) {
        throw Error(ErrorKind::configuration, "Monte-Carlo duration must cover at least 50 periods");
    }
    if (c.n_paths < 8) throw Error(ErrorKind::configuration, "Monte-Carlo needs at least 8 paths");
    if (c.window < 16 || (c.window & (c.window - 1)) != 0) {
        throw Error(ErrorKind::configuration, "periodogram window must be a power of two >= 16");
    }
    if (c.decimate < 1) throw Error(ErrorKind::configuration, "decimation factor must be >= 1");
    return c;
}

void simulate_path(const CircuitModel& model, const Vec& x0, const McConfig& cfg, int path, double amplitude,
                   const StepSink& sink) {
    const int p = model.p();
    const double h = cfg.dt;
    const long long steps = static_cast<long long>(std::llround(cfg.duration / h));
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(path), 0x9e3779b9u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sq = std::sqrt(h);
    const double limit = 1e6 * std::max(amplitude, 1e-300);

    Vec x = x0;
    Vec dw(p);
    sink(0, 0.0, x);
    for (long long j = 0; j < steps; ++j) {
        const double t = static_cast<double>(j) * h;
        for (int s = 0; s < p; ++s) dw[s] = sq * normal(rng);
        // q(y) + h/2 i(y) = q(x) - h/2 (i(x) + s(t) + s(t+h)) - B(x) dW
        const Vec rhs = model.q(x) - 0.5 * h * (model.i(x) + model.s(t) + model.s(t + h)) - model.b(x) * dw;
        Vec y = x;
        bool ok = false;
        for (int it = 0; it < 30; ++it) {
            const Vec r = model.q(y) + 0.5 * h * model.i(y) - rhs;
            const Mat jac = model.c(y) + 0.5 * h * model.g(y);
            const Vec d = jac.partialPivLu().solve(r);
            y -= d;
            if (!d.allFinite()) break;
            if (d.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, y.lpNorm<Eigen::Infinity>())) {
                ok = true;
                break;
            }
        }
        if (!ok || !y.allFinite() || y.lpNorm<Eigen::Infinity>() > limit) {
            std::ostringstream os;
            os << "Monte-Carlo path " << path << " diverged at t=" << t + h << "; reduce dt";
            throw Error(ErrorKind::instability, os.str());
        }
        x = y;
        sink(j + 1, t + h, x);
    }
}

std::vector<Mat> simulate_sde(const CircuitModel& model, const PssSolution& pss, const McConfig& cfg_in) {
    const McConfig cfg = cfg_in.resolved(pss.T0);
    const long long steps = static_cast<long long>(std::llround(cfg.duration / cfg.dt));
    const double amp = pss.states.lpNorm<Eigen::Infinity>();
    std::vector<Mat> out(static_cast<std::size_t>(cfg.n_paths));
    std::vector<std::string> errs(out.size());
#pragma omp parallel for schedule(dynamic)
    for (int path = 0; path < cfg.n_paths; ++path) {
        Mat rows(steps / cfg.decimate + 1, model.n());
        Vec acc = Vec::Zero(model.n());
        int filled = 0;
        Eigen::Index r = 0;
        try {
            simulate_path(model, pss.state(0), cfg, path, amp, [&](long long j, double, const Vec& x) {
                if (j == 0) {
                    rows.row(r++) = x.transpose();
                    return;
                }
                acc += x;
                if (++filled == cfg.decimate) {
                    rows.row(r++) = (acc / cfg.decimate).transpose();
                    acc.setZero();
                    filled = 0;
                }
            });
        } catch (const Error& e) {
            errs[path] = e.what();
        }
        out[path] = rows.topRows(r);
    }
    for (const auto& e : errs) {
        if (!e.empty()) throw Error(ErrorKind::instability, e);
    }
    return out;
}

// ---------------------------------------------------------------------------

Welch::Welch(int segment, double fs) : n_(segment), fs_(fs) {
    if (segment < 16 || (segment & (segment - 1)) != 0) {
        throw Error(ErrorKind::configuration, "Welch segment must be a power of two >= 16");
    }
    if (!(fs > 0.0)) throw Error(ErrorKind::configuration, "sample rate must be positive");
    window_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        window_[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / n_);
        wsum2_ += window_[i] * window_[i];
    }
    acc_.assign(static_cast<std::size_t>(n_ / 2 + 1), 0.0);
    buf_.reserve(static_cast<std::size_t>(n_));
    in_ = fftw_alloc_real(static_cast<std::size_t>(n_));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n_ / 2 + 1));
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n_, in_, static_cast<fftw_complex*>(out_), FFTW_ESTIMATE);
}

Welch::Welch(Welch&& o) noexcept
    : n_(o.n_), fs_(o.fs_), window_(std::move(o.window_)), wsum2_(o.wsum2_), buf_(std::move(o.buf_)),
      acc_(std::move(o.acc_)), count_(o.count_), in_(o.in_), out_(o.out_), plan_(o.plan_) {
    o.in_ = nullptr;
    o.out_ = nullptr;
    o.plan_ = nullptr;
}

Welch::~Welch() {
    if (plan_ != nullptr) {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(static_cast<fftw_plan>(plan_));
    }
    if (in_ != nullptr) fftw_free(in_);
    if (out_ != nullptr) fftw_free(out_);
}

void Welch::push(double sample) {
    buf_.push_back(sample);
    if (static_cast<int>(buf_.size()) == n_) {
        process();
        buf_.erase(buf_.begin(), buf_.begin() + n_ / 2);
    }
}

void Welch::process() {
    for (int i = 0; i < n_; ++i) in_[i] = buf_[i] * window_[i];
    fftw_execute(static_cast<fftw_plan>(plan_));
    const auto* out = static_cast<const fftw_complex*>(out_);
    const double scale = 1.0 / (fs_ * wsum2_);
    for (int k = 0; k <= n_ / 2; ++k) {
        const double pw = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) * scale;
        acc_[k] += (k == 0 || k == n_ / 2) ? pw : 2.0 * pw;
    }
    ++count_;
}

void Welch::merge(const Welch& other) {
    if (other.n_ != n_ || other.fs_ != fs_) throw Error(ErrorKind::contract, "incompatible Welch estimators");
    for (std::size_t k = 0; k < acc_.size(); ++k) acc_[k] += other.acc_[k];
    count_ += other.count_;
}

std::vector<double> Welch::psd() const {
    if (count_ == 0) throw Error(ErrorKind::configuration, "series shorter than one periodogram segment");
    std::vector<double> out(acc_);
    for (double& v : out) v /= count_;
    return out;
}

double psd_at(const std::vector<double>& psd, double bin_width, double f) {
    const double x = f / bin_width;
    const auto i = static_cast<std::size_t>(std::floor(x));
    if (x < 0.0 || i + 1 >= psd.size()) {
        throw Error(ErrorKind::configuration, "requested frequency lies outside the PSD band (Nyquist)");
    }
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * psd[i] + w * psd[i + 1];
}

double carrier_power(const std::vector<double>& psd, double bin_width, double f0) {
    const auto lo = static_cast<std::size_t>(std::ceil(0.5 * f0 / bin_width));
    const auto hi = static_cast<std::size_t>(std::floor(1.5 * f0 / bin_width));
    if (hi >= psd.size()) throw Error(ErrorKind::configuration, "carrier band exceeds the Nyquist frequency");
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += psd[k];
    return s * bin_width;
}

SpectrumEstimate estimate_spectrum(const std::vector<double>& psd, double bin_width, double f0, int nu,
                                   const std::vector<double>& offsets) {
    const double fc = nu * f0;
    SpectrumEstimate est;
    est.carrier = carrier_power(psd, bin_width, fc);
    if (!(est.carrier > 0.0)) throw Error(ErrorKind::dead_node, "no carrier power in the simulated PSD");
    for (double f : offsets) {
        if (!(f > 0.0) || f >= fc || fc + f >= bin_width * static_cast<double>(psd.size() - 1)) {
            throw Error(ErrorKind::configuration, "offset band is outside (0, Nyquist) around the carrier");
        }
        const double up = psd_at(psd, bin_width, fc + f);
        const double lo = psd_at(psd, bin_width, fc - f);
        est.offsets.push_back(f);
        est.density.push_back(0.5 * (up + lo) / est.carrier);
    }
    return est;
}

void CrossingDetector::push(double t, double value) {
    const double v = value - level_;
    if (v < -hyst_) armed_ = true;
    if (armed_ && have_prev_ && v_prev_ < 0.0 && v >= 0.0) {
        const double w = v_prev_ / (v_prev_ - v);
        times_.push_back(t_prev_ + w * (t - t_prev_));
        armed_ = hyst_ <= 0.0;
    }
    have_prev_ = true;
    t_prev_ = t;
    v_prev_ = v;
}

DiffusionFit fit_phase_diffusion(const std::vector<std::vector<double>>& crossings, int max_lag) {
    if (max_lag < 2) throw Error(ErrorKind::configuration, "diffusion fit needs at least two lags");
    DiffusionFit fit;
    double span = 0.0;
    double count = 0.0;
    for (const auto& c : crossings) {
        if (c.size() < static_cast<std::size_t>(max_lag) + 2) {
            throw Error(ErrorKind::configuration, "too few zero crossings for the diffusion fit");
        }
        span += c.back() - c.front();
        count += static_cast<double>(c.size() - 1);
    }
    fit.period = span / count;

    std::vector<double> xs;
    std::vector<double> ys;
    for (int m = 1; m <= max_lag; ++m) {
        double s1 = 0.0;
        double s2 = 0.0;
        double cnt = 0.0;
        for (const auto& c : crossings) {
            for (std::size_t i = 0; i + static_cast<std::size_t>(m) < c.size(); ++i) {
                const double d = c[i + m] - c[i];
                s1 += d;
                s2 += d * d;
                cnt += 1.0;
            }
        }
        const double mean = s1 / cnt;
        xs.push_back(m * fit.period);
        ys.push_back(s2 / cnt - mean * mean);
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    fit.c = sxy / sxx;
    fit.intercept = my - fit.c * mx;
    return fit;
}

double lorentzian_c(const std::vector<double>& offsets, const std::vector<double>& density, double f0) {
    if (offsets.size() != density.size() || offsets.size() < 2) {
        throw Error(ErrorKind::contract, "Lorentzian fit needs matching arrays of at least two points");
    }
    double mx = 0.0;
    double my = 0.0;
    const double n = static_cast<double>(offsets.size());
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const double w = kTwoPi * offsets[i];
        xs.push_back(w * w);
        ys.push_back(1.0 / density[i]);
        mx += xs.back();
        my += ys.back();
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double beta = sxy / sxx;
    const double w0 = kTwoPi * f0;
    return 1.0 / (w0 * w0 * beta);
}

McResult run_mc(const CircuitModel& model, const PssSolution& pss, const McConfig& cfg_in, int node, int nu,
                const std::vector<double>& offsets, int max_lag, Exec exec) {
    const McConfig cfg = cfg_in.resolved(pss.T0);
    if (node < 0 || node >= model.n()) throw Error(ErrorKind::contract, "observation node out of range");
    const double amp = pss.states.lpNorm<Eigen::Infinity>();
    const double level = pss.states.col(node).mean();
    const double swing = 0.5 * (pss.states.col(node).maxCoeff() - pss.states.col(node).minCoeff());
    const double fs = 1.0 / (cfg.dt * cfg.decimate);

    std::vector<Welch> welch;
    welch.reserve(static_cast<std::size_t>(cfg.n_paths));
    for (int i = 0; i < cfg.n_paths; ++i) welch.emplace_back(cfg.window, fs);
    std::vector<std::vector<double>> crossings(static_cast<std::size_t>(cfg.n_paths));
    std::vector<std::string> errs(static_cast<std::size_t>(cfg.n_paths));

#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (int path = 0; path < cfg.n_paths; ++path) {
        CrossingDetector det(level, 0.25 * swing);
        Welch& w = welch[path];
        double acc = 0.0;
        int filled = 0;
        try {
            simulate_path(model, pss.state(0), cfg, path, amp, [&](long long j, double t, const Vec& x) {
                det.push(t, x[node]);
                if (j == 0) return;
                acc += x[node];
                if (++filled == cfg.decimate) {
                    w.push(acc / cfg.decimate);
                    acc = 0.0;
                    filled = 0;
                }
            });
        } catch (const Error& e) {
            errs[path] = e.what();
        }
        crossings[path] = det.times();
    }
    for (const auto& e : errs) {
        if (!e.empty()) throw Error(ErrorKind::instability, e);
    }

    Welch& total = welch.front();
    for (int i = 1; i < cfg.n_paths; ++i) total.merge(welch[i]);
    if (total.segments() < 4 * cfg.n_paths) {
        throw Error(ErrorKind::configuration, "each path must span at least four periodogram windows");
    }

    McResult res;
    res.diffusion = fit_phase_diffusion(crossings, max_lag);
    res.f0 = 1.0 / res.diffusion.period;
    const std::vector<double> psd = total.psd();
    const SpectrumEstimate est = estimate_spectrum(psd, total.bin_width(), res.f0, nu, offsets);
    res.carrier = est.carrier;
    res.offsets = est.offsets;
    res.density = est.density;
    res.segments = total.segments();
    res.bin_width = total.bin_width();
    return res;
}

}  // namespace coscpmm::oracle
