#pragma once

#include <iosfwd>
#include <vector>

#include "coscpmm/model.hpp"
#include "coscpmm/pss.hpp"
#include "coscpmm/types.hpp"

namespace coscpmm {

/// Linear-response (LR) dynamics  d/dt(C(t) dx) + G(t) dx = 0  along a PSS,
/// discretised with the same trapezoidal rule that produced the PSS.
///
/// Forward step:  A_{j+1} dx_{j+1} = B_j dx_j,  A = C/h + G/2,  B = C/h - G/2.
/// The adjoint step is the exact discrete adjoint of the forward step in the
/// dual variable v (C^T v is the multiplier of dx), integrated backwards:
///     v_j = C_j^{-T} P_j^T C_{j+1}^T v_{j+1},   P_j = A_{j+1}^{-1} B_j,
/// which conserves v_j^T C_j dx_j from step to step.
class LinearizedPeriod {
public:
    LinearizedPeriod(const CircuitModel& model, const PssSolution& pss);

    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] int M() const noexcept { return M_; }
    [[nodiscard]] double T0() const noexcept { return T0_; }
    [[nodiscard]] double h() const noexcept { return T0_ / M_; }
    [[nodiscard]] const Mat& C(int j) const { return c_[static_cast<std::size_t>(j % M_)]; }
    [[nodiscard]] const Mat& forward_step(int j) const { return fwd_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] const Mat& adjoint_step(int j) const { return adj_[static_cast<std::size_t>(j)]; }

    /// n x (M+1) trajectory from dx(0) = init.
    [[nodiscard]] CMat forward(const CVec& init) const;
    /// n x (M+1) adjoint trajectory from v(T0) = init, integrated back to t = 0.
    [[nodiscard]] CMat adjoint(const CVec& init) const;

private:
    int n_;
    int M_;
    double T0_;
    std::vector<Mat> c_;
    std::vector<Mat> fwd_;
    std::vector<Mat> adj_;
};

/// Forward (adjoint=false) or backward adjoint (adjoint=true) LR trajectory
/// over one period; n x (M+1), column j at t_j.
[[nodiscard]] Mat integrate_lr(const CircuitModel& model, const PssSolution& pss, const Vec& init,
                               bool adjoint);

/// Forward monodromy Phi(T0, 0) or adjoint monodromy Psi(-T0, 0). Columns are
/// propagated independently (in parallel with Exec::parallel).
[[nodiscard]] Mat calc_monodromy(const LinearizedPeriod& lin, bool adjoint, Exec exec = Exec::parallel);
[[nodiscard]] Mat calc_monodromy(const CircuitModel& model, const PssSolution& pss, bool adjoint);

namespace ref {
/// Serial reference: accumulates the ordered product of step matrices.
[[nodiscard]] Mat calc_monodromy(const LinearizedPeriod& lin, bool adjoint);
}  // namespace ref

struct EigenPair {
    cplx lambda;   // Floquet multiplier
    cplx mu;       // log(lambda) / T0, principal branch; Re = -inf when lambda = 0
    CVec vec;
};

/// Dense eigendecomposition (real Schur / shifted QR) sorted by |lambda| descending.
[[nodiscard]] std::vector<EigenPair> eigen_decompose(const Mat& mm, double T0);

/// Relative magnitude below which a multiplier is treated as exactly zero.
inline constexpr double kZeroMultiplier = 1e-13;

struct ModeInit {
    cplx lambda;
    cplx mu;
    CVec u0;
    CVec v0;   // scaled so that v0^T C0 u0 = 1
};

/// Greedy conjugate-aware matching of forward and adjoint eigenpairs followed
/// by biorthonormal scaling. Zero multipliers are dropped first. The forward
/// order is preserved.
[[nodiscard]] std::vector<ModeInit> pair_and_normalize(const std::vector<EigenPair>& forward,
                                                       const std::vector<EigenPair>& adjoint,
                                                       const Mat& C0, double pair_tol = 1e-6);

/// Number of leading modes with |Re mu| <= 10 omega0 (infinite exponents never
/// count). Throws if fewer than k modes survive.
[[nodiscard]] int count_relevant_modes(const std::vector<cplx>& exponents, double omega0, int k);

/// Periodic Floquet vectors u_i(t) = exp(-mu_i t) Phi(t,0) u_i0 and dual vectors
/// v_i(t) = exp(-mu_i (T0 - t)) Psi(t, T0) v_i0, each n x (M+1).
struct FloquetSeries {
    std::vector<CMat> u;
    std::vector<CMat> v;
};

[[nodiscard]] FloquetSeries floquet_time_series(const LinearizedPeriod& lin,
                                                const std::vector<ModeInit>& modes,
                                                Exec exec = Exec::parallel);

/// lambda_i(t_j) = B(x_s(t_j))^T v_i(t_j); returns p x (M+1) per mode.
/// `b_series[j]` holds B at grid point j (j = 0..M-1; the endpoint reuses j = 0).
[[nodiscard]] std::vector<CMat> lambda_series(const std::vector<CMat>& v_series,
                                              const std::vector<Mat>& b_series);

/// Harmonics of an (rows x (M+1)) periodic series, same convention as pss_harmonics.
[[nodiscard]] CMat harmonics(const CMat& series, int nf, Exec exec = Exec::parallel);

struct ModeInfo {
    cplx lambda;
    cplx mu;
    bool retained = false;
};

/// Output of the Floquet stage: exponents, periodic vectors, lambda vectors and
/// their harmonics for the L relevant modes. Mode 0 is the zero mode with
/// mu = 0 exactly and u_0(t) = dx_s/dt.
struct FloquetSet {
    double T0 = 0.0;
    double omega0 = 0.0;
    int n = 0;
    int p = 0;
    int M = 0;
    int nf = 0;
    int k = 1;
    int L = 0;
    std::vector<cplx> mu;
    std::vector<CMat> u_series;
    std::vector<CMat> v_series;
    std::vector<CMat> lambda;
    std::vector<CMat> U;        // n x (2 nf + 1)
    std::vector<CMat> Lambda;   // p x (2 nf + 1)
    std::vector<ModeInfo> all_modes;
    std::vector<Mat> c_series;  // C(t_j), j = 0..M-1

    /// m-th harmonic of mode i (0-based), zero outside [-nf, nf].
    [[nodiscard]] CVec U_h(int i, int m) const;
    [[nodiscard]] CVec Lambda_h(int i, int m) const;
    [[nodiscard]] cplx U_hq(int i, int m, int q) const;
};

struct FloquetOptions {
    int k = 1;
    int nf = 16;
    double pair_tol = 1e-6;
    double zero_mode_tol = 1e-6;     // |mu_1| T0
    double periodicity_tol = 1e-5;   // endpoint mismatch of detrended series
};

[[nodiscard]] FloquetSet build_floquet_set(const CircuitModel& model, const PssSolution& pss,
                                           const FloquetOptions& opts, Exec exec = Exec::parallel);

/// `i,re_mu,im_mu,abs_lambda,retained` for every multiplier.
void write_floquet_csv(std::ostream& os, const FloquetSet& fs);

}  // namespace coscpmm
