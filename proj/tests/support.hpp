#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test beyond the
// model callbacks and the stage entry points.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "coscpmm/floquet.hpp"
#include "coscpmm/model.hpp"
#include "coscpmm/noise_ops.hpp"
#include "coscpmm/pss.hpp"
#include "coscpmm/spectra.hpp"

namespace testsupport {

using namespace coscpmm;

struct Solved {
    CircuitModel model;
    EnsembleMeta meta;
    PssSolution pss;
    FloquetSet fs;
    NoiseOperators ops;
};

inline Solved solve(CircuitModel model, EnsembleMeta meta, const PssGuess& guess, int nf = 16, int M = 1024) {
    PssOptions po;
    po.M = M;
    po.nf = nf;
    PssSolution pss = solve_pss(model, guess, po);
    FloquetOptions fo;
    fo.k = meta.k;
    fo.nf = nf;
    FloquetSet fs = build_floquet_set(model, pss, fo);
    std::vector<NodeRequest> req;
    for (const auto& name : meta.observation_nodes) req.push_back({name, *model.node_index(name), meta.nu});
    NoiseOperators ops = build_noise_operators(fs, pss, req);
    return {std::move(model), std::move(meta), std::move(pss), std::move(fs), std::move(ops)};
}

inline Solved vdp(double eps = 1.0, double noise = 1e-4, int nf = 16, double g2 = 0.0, int M = 1024) {
    VdpParams p = VdpParams::normalized(eps, noise);
    p.g2 = g2;
    EnsembleMeta meta;
    meta.k = 1;
    meta.observation_nodes = {"v"};
    return solve(builtin_vdp(p), meta, vdp_guess({p}), nf, M);
}

// Unilaterally coupled pair. The secondary is slightly detuned so the two
// amplitude multipliers differ.
inline Solved ilo(double gm = 0.02, double noise1 = 1e-6, double noise2 = 1e-4, double eps = 1.0, int nf = 16,
                  double g2 = 0.0) {
    VdpParams a = VdpParams::normalized(eps, noise1);
    VdpParams b = VdpParams::normalized(eps, noise2);
    b.C = 1.01;
    a.g2 = g2;
    b.g2 = 0.5 * g2;
    CouplingSpec cs;
    cs.kind = CouplingKind::unilateral;
    cs.gm = gm;
    auto [model, meta] = builtin_coupled_ensemble({a, b}, cs);
    return solve(std::move(model), std::move(meta), vdp_guess({a, b}), nf);
}

inline Solved ring3(double rc = 10.0, double noise = 1e-4, double eps = 1.0) {
    std::vector<VdpParams> units;
    for (int u = 0; u < 3; ++u) {
        VdpParams p = VdpParams::normalized(eps, noise);
        p.C *= 1.0 + 0.01 * ((u % 3) - 1);
        units.push_back(p);
    }
    CouplingSpec cs;
    cs.kind = CouplingKind::bilateral_ring;
    cs.rc = rc;
    auto [model, meta] = builtin_coupled_ensemble(units, cs);
    meta.observation_nodes = {"v1"};
    return solve(std::move(model), std::move(meta), vdp_guess(units));
}

inline double rel(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline double rel(cplx a, cplx b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

// Central differences of a vector function.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    const Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double step = h * std::max(1.0, std::abs(x[j]));
        Vec xp = x, xm = x;
        xp[j] += step;
        xm[j] -= step;
        J.col(j) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return J;
}

// Classical RK4 on the explicit form dx/dt = C^{-1}(-i - s); unrelated to the
// trapezoidal scheme under test.
inline Vec rk4_step(const CircuitModel& m, const Vec& x, double t, double h) {
    const Vec k1 = m.rhs(x, t);
    const Vec k2 = m.rhs(x + 0.5 * h * k1, t + 0.5 * h);
    const Vec k3 = m.rhs(x + 0.5 * h * k2, t + 0.5 * h);
    const Vec k4 = m.rhs(x + h * k3, t + h);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Vec rk4(const CircuitModel& m, Vec x, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    for (int i = 0; i < steps; ++i) x = rk4_step(m, x, t0 + i * h, h);
    return x;
}

// Long RK4 transient, then the mean spacing of upward zero crossings of
// state `node`, interpolated linearly.
inline double rk4_period(const CircuitModel& m, Vec x, double h, double settle, int periods, int node = 0) {
    const int n_settle = static_cast<int>(settle / h);
    for (int i = 0; i < n_settle; ++i) x = rk4_step(m, x, i * h, h);
    std::vector<double> times;
    double t = 0.0;
    double prev = x[node];
    while (static_cast<int>(times.size()) < periods + 1) {
        const Vec nx = rk4_step(m, x, t, h);
        if (prev < 0.0 && nx[node] >= 0.0) times.push_back(t + h * (-prev) / (nx[node] - prev));
        prev = nx[node];
        x = nx;
        t += h;
    }
    return (times.back() - times.front()) / periods;
}

// STM by column-wise perturbation of the nonlinear flow, integrated with a
// fine RK4 step.
inline Mat fd_stm(const CircuitModel& m, const Vec& x0, double T, int steps, double eps = 1e-6) {
    const int n = static_cast<int>(x0.size());
    Mat P(n, n);
    for (int j = 0; j < n; ++j) {
        Vec xp = x0, xm = x0;
        xp[j] += eps;
        xm[j] -= eps;
        P.col(j) = (rk4(m, xp, 0.0, T, steps) - rk4(m, xm, 0.0, T, steps)) / (2.0 * eps);
    }
    return P;
}

// Harmonic lookup with the out-of-range-is-zero rule, on the public tables.
inline CVec Uh(const FloquetSet& fs, int mode1, int m) {
    if (m < -fs.nf || m > fs.nf) return CVec::Zero(fs.n);
    return fs.U[static_cast<std::size_t>(mode1 - 1)].col(fs.nf + m);
}

inline CVec Lh(const FloquetSet& fs, int mode1, int m) {
    if (m < -fs.nf || m > fs.nf) return CVec::Zero(fs.p);
    return fs.Lambda[static_cast<std::size_t>(mode1 - 1)].col(fs.nf + m);
}

// Dense n x n evaluation of the operator matrices (all node pairs at once);
// the fast path only forms one diagonal element.
struct DenseOperators {
    const FloquetSet& fs;

    [[nodiscard]] cplx mu(int i) const { return fs.mu[static_cast<std::size_t>(i - 1)]; }

    // U_a Lambda_b^T conj(Lambda_c) U_d^H
    [[nodiscard]] CMat block(const CVec& Ua, const CVec& Lb, const CVec& Lc, const CVec& Ud) const {
        const CMat row = Lb.transpose() * Lc.conjugate();   // 1 x 1
        return Ua * row(0, 0) * Ud.adjoint();
    }

    [[nodiscard]] CMat lead_matrix(int lo, int hi, int nu) const {
        const cplx j{0.0, 1.0};
        CMat acc = CMat::Zero(fs.n, fs.n);
        for (int m = lo; m <= hi; ++m) {
            for (int p = -fs.nf; p <= fs.nf; ++p) {
                acc += block(Uh(fs, 1, nu), Lh(fs, 1, 0), Lh(fs, m, nu - p), Uh(fs, m, p)) /
                       (j * fs.omega0 * double(p - nu) - std::conj(mu(m)));
            }
        }
        return acc;
    }

    [[nodiscard]] CMat pair_sum(int lo, int hi, int r, int rho, int nu) const {
        const cplx j{0.0, 1.0};
        CMat acc = CMat::Zero(fs.n, fs.n);
        for (int i = lo; i <= hi; ++i) {
            for (int p = -fs.nf; p <= fs.nf; ++p) {
                acc += block(Uh(fs, i, p), Lh(fs, i, rho - p), Lh(fs, r, rho - nu), Uh(fs, r, nu)) /
                       (j * fs.omega0 * double(nu - p) - std::conj(mu(r)) - mu(i));
            }
        }
        return acc;
    }

    [[nodiscard]] CMat zero_matrix(int r, int rho, int nu) const {
        const cplx j{0.0, 1.0};
        return block(Uh(fs, 1, rho), Lh(fs, 1, 0), Lh(fs, r, rho - nu), Uh(fs, r, nu)) /
               (j * fs.omega0 * double(nu - rho) - std::conj(mu(r)) - mu(1));
    }

    [[nodiscard]] CMat omega(int nu) const { return lead_matrix(2, fs.k, nu); }
    [[nodiscard]] CMat psi(int nu) const { return lead_matrix(fs.k + 1, fs.L, nu); }
    [[nodiscard]] CMat theta(int l, int rho, int nu) const {
        return zero_matrix(l + 1, rho, nu) + pair_sum(2, fs.k, l + 1, rho, nu);
    }
    [[nodiscard]] CMat pi(int l, int rho, int nu) const { return pair_sum(fs.k + 1, fs.L, l + fs.k, rho, nu); }
    [[nodiscard]] CMat xi(int l, int rho, int nu) const {
        if (l <= fs.k - 1) return pair_sum(fs.k + 1, fs.L, l + 1, rho, nu);
        return zero_matrix(l + 1, rho, nu) + pair_sum(2, fs.k, l + 1, rho, nu);
    }
};

inline cplx normalized(const CMat& M, int q, const PssSolution& pss, int nu) {
    return M(q, q) / std::norm(pss.harmonic(q, nu));
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Lorentzian corner in Hz for harmonic nu.
inline double corner_hz(const NoiseOperators& ops, int nu = 1) {
    return 0.5 * ops.omega0 * ops.omega0 * nu * nu * ops.c / kTwoPi;
}

// Local slope in dB/decade from dB values on a log grid.
inline std::vector<double> local_slopes(const std::vector<double>& f, const std::vector<double>& db) {
    std::vector<double> s;
    for (std::size_t i = 1; i < f.size(); ++i) s.push_back((db[i] - db[i - 1]) / std::log10(f[i] / f[i - 1]));
    return s;
}

}  // namespace testsupport
