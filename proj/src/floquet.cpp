#include "coscpmm/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "coscpmm/error.hpp"
#include "coscpmm/kernels.hpp"

namespace coscpmm {

LinearizedPeriod::LinearizedPeriod(const CircuitModel& model, const PssSolution& pss)
    : n_(model.n()), M_(pss.M), T0_(pss.T0) {
    if (pss.M < 2 || pss.states.rows() != pss.M || pss.states.cols() != n_) {
        throw Error(ErrorKind::contract, "PSS solution does not match the model dimensions");
    }
    const double h = pss.T0 / pss.M;
    std::vector<Mat> g(static_cast<std::size_t>(M_));
    c_.resize(static_cast<std::size_t>(M_));
    for (int j = 0; j < M_; ++j) {
        const Jacobians jac = eval_jacobians(model, pss.state(j));
        c_[j] = jac.C;
        g[j] = jac.G;
    }
    fwd_.resize(static_cast<std::size_t>(M_));
    adj_.resize(static_cast<std::size_t>(M_));
    for (int j = 0; j < M_; ++j) {
        const int jn = (j + 1) % M_;
        const Mat a = c_[jn] / h + 0.5 * g[jn];
        const Mat b = c_[j] / h - 0.5 * g[j];
        Eigen::FullPivLU<Mat> lu_a(a);
        if (!lu_a.isInvertible()) {
            throw Error(ErrorKind::rank_deficiency,
                        "LR step matrix C/h + G/2 is singular at time index " + std::to_string(jn));
        }
        fwd_[j] = lu_a.solve(b);
        Eigen::FullPivLU<Mat> lu_ct(c_[j].transpose());
        if (!lu_ct.isInvertible()) {
            throw Error(ErrorKind::rank_deficiency,
                        "C(t) is singular at time index " + std::to_string(j) +
                            "; dual Floquet vectors cannot be recovered");
        }
        adj_[j] = lu_ct.solve(fwd_[j].transpose() * c_[jn].transpose());
    }
}

CMat LinearizedPeriod::forward(const CVec& init) const {
    if (init.size() != n_) throw Error(ErrorKind::contract, "LR initial vector has the wrong length");
    Mat x(n_, 2);
    x.col(0) = init.real();
    x.col(1) = init.imag();
    CMat out(n_, M_ + 1);
    out.col(0) = init;
    for (int j = 0; j < M_; ++j) {
        x = fwd_[j] * x;
        out.col(j + 1).real() = x.col(0);
        out.col(j + 1).imag() = x.col(1);
    }
    return out;
}

CMat LinearizedPeriod::adjoint(const CVec& init) const {
    if (init.size() != n_) throw Error(ErrorKind::contract, "LR initial vector has the wrong length");
    Mat v(n_, 2);
    v.col(0) = init.real();
    v.col(1) = init.imag();
    CMat out(n_, M_ + 1);
    out.col(M_) = init;
    for (int j = M_ - 1; j >= 0; --j) {
        v = adj_[j] * v;
        out.col(j).real() = v.col(0);
        out.col(j).imag() = v.col(1);
    }
    return out;
}

Mat integrate_lr(const CircuitModel& model, const PssSolution& pss, const Vec& init, bool adjoint) {
    const LinearizedPeriod lin(model, pss);
    const CVec z = init.cast<cplx>();
    return (adjoint ? lin.adjoint(z) : lin.forward(z)).real();
}

Mat calc_monodromy(const LinearizedPeriod& lin, bool adjoint, Exec exec) {
    const int n = lin.n();
    const int M = lin.M();
    Mat mm(n, n);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int col = 0; col < n; ++col) {
        Vec x = Vec::Unit(n, col);
        if (!adjoint) {
            for (int j = 0; j < M; ++j) x = lin.forward_step(j) * x;
        } else {
            for (int j = M - 1; j >= 0; --j) x = lin.adjoint_step(j) * x;
        }
        mm.col(col) = x;
    }
    return mm;
}

Mat calc_monodromy(const CircuitModel& model, const PssSolution& pss, bool adjoint) {
    return calc_monodromy(LinearizedPeriod(model, pss), adjoint);
}

namespace ref {

Mat calc_monodromy(const LinearizedPeriod& lin, bool adjoint) {
    Mat acc = Mat::Identity(lin.n(), lin.n());
    if (!adjoint) {
        for (int j = 0; j < lin.M(); ++j) acc = lin.forward_step(j) * acc;
    } else {
        for (int j = lin.M() - 1; j >= 0; --j) acc = lin.adjoint_step(j) * acc;
    }
    return acc;
}

}  // namespace ref

std::vector<EigenPair> eigen_decompose(const Mat& mm, double T0) {
    if (!mm.allFinite()) throw Error(ErrorKind::numerical, "monodromy matrix has non-finite entries");
    if (mm.rows() != mm.cols()) throw Error(ErrorKind::contract, "monodromy matrix must be square");
    Eigen::EigenSolver<Mat> es(mm, true);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::numerical, "eigenvalue iteration did not converge");
    }
    const CVec vals = es.eigenvalues();
    const CMat vecs = es.eigenvectors();
    double scale = 0.0;
    for (Eigen::Index i = 0; i < vals.size(); ++i) scale = std::max(scale, std::abs(vals[i]));

    std::vector<EigenPair> out;
    out.reserve(static_cast<std::size_t>(vals.size()));
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        EigenPair ep;
        ep.lambda = vals[i];
        if (std::abs(vals[i]) <= kZeroMultiplier * scale || vals[i] == cplx{0.0, 0.0}) {
            ep.lambda = cplx{0.0, 0.0};
            ep.mu = cplx{-std::numeric_limits<double>::infinity(), 0.0};
        } else {
            ep.mu = std::log(vals[i]) / T0;
        }
        ep.vec = vecs.col(i);
        out.push_back(std::move(ep));
    }
    std::stable_sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) {
        const double ma = std::abs(a.lambda);
        const double mb = std::abs(b.lambda);
        if (ma != mb) return ma > mb;
        return a.lambda.imag() > b.lambda.imag();
    });
    return out;
}

namespace {

// Rotates a vector so its largest component is real and positive, then drops
// the (rounding-level) imaginary part.
CVec realify(const CVec& z) {
    Eigen::Index k = 0;
    z.cwiseAbs().maxCoeff(&k);
    const cplx ph = std::abs(z[k]) > 0.0 ? std::conj(z[k]) / std::abs(z[k]) : cplx{1.0, 0.0};
    return (z * ph).real().cast<cplx>();
}

cplx bilinear(const CVec& v, const Mat& c, const CVec& u) {
    return (v.transpose() * (c.cast<cplx>() * u))(0, 0);
}

}  // namespace

std::vector<ModeInit> pair_and_normalize(const std::vector<EigenPair>& forward,
                                         const std::vector<EigenPair>& adjoint, const Mat& C0,
                                         double pair_tol) {
    std::vector<const EigenPair*> fwd;
    std::vector<const EigenPair*> adj;
    for (const auto& e : forward) if (e.lambda != cplx{0.0, 0.0}) fwd.push_back(&e);
    for (const auto& e : adjoint) if (e.lambda != cplx{0.0, 0.0}) adj.push_back(&e);
    if (fwd.size() != adj.size()) {
        throw Error(ErrorKind::degenerate_spectrum,
                    "forward and adjoint monodromy have different numbers of non-zero multipliers");
    }
    double scale = 0.0;
    for (const auto* e : fwd) scale = std::max(scale, std::abs(e->lambda));
    const double tol = pair_tol * scale;

    const std::size_t L = fwd.size();
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = i + 1; j < L; ++j) {
            if (std::abs(fwd[i]->lambda - fwd[j]->lambda) <= tol) {
                std::ostringstream os;
                os << "multipliers " << fwd[i]->lambda << " and " << fwd[j]->lambda
                   << " coincide within the pairing tolerance; repeated Floquet multipliers are not supported";
                throw Error(ErrorKind::degenerate_spectrum, os.str());
            }
        }
    }

    std::vector<bool> used(L, false);
    auto take_nearest = [&](cplx target) -> std::size_t {
        std::size_t best = L;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < L; ++a) {
            if (used[a]) continue;
            const double d = std::abs(adj[a]->lambda - target);
            if (d < dist) {
                dist = d;
                best = a;
            }
        }
        if (best == L || dist > tol) {
            std::ostringstream os;
            os << "no adjoint multiplier matches " << target << " (closest distance " << dist << ")";
            throw Error(ErrorKind::degenerate_spectrum, os.str());
        }
        used[best] = true;
        return best;
    };

    std::vector<ModeInit> out(L);
    std::vector<bool> done(L, false);
    // Real and upper-half-plane multipliers first; lower-half partners reuse the
    // conjugate so the pairing preserves conjugate symmetry exactly.
    for (std::size_t i = 0; i < L; ++i) {
        const cplx lam = fwd[i]->lambda;
        if (lam.imag() < -tol) continue;
        const std::size_t a = take_nearest(lam);
        ModeInit m;
        m.lambda = lam;
        m.mu = fwd[i]->mu;
        m.u0 = fwd[i]->vec;
        m.v0 = adj[a]->vec;
        if (std::abs(lam.imag()) <= tol) {
            m.lambda = cplx{lam.real(), 0.0};
            m.mu = cplx{m.mu.real(), 0.0};
            m.u0 = realify(m.u0);
            m.v0 = realify(m.v0);
        }
        const cplx s = bilinear(m.v0, C0, m.u0);
        if (!(std::abs(s) > 1e-12 * m.v0.norm() * (C0.cast<cplx>() * m.u0).norm())) {
            throw Error(ErrorKind::degenerate_spectrum,
                        "dual and forward eigenvectors are C-orthogonal; cannot normalise");
        }
        m.v0 /= s;
        out[i] = std::move(m);
        done[i] = true;
    }
    for (std::size_t i = 0; i < L; ++i) {
        if (done[i]) continue;
        const cplx lam = fwd[i]->lambda;
        std::size_t partner = L;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < L; ++j) {
            if (!done[j] || fwd[j]->lambda.imag() <= tol) continue;
            const double d = std::abs(fwd[j]->lambda - std::conj(lam));
            if (d < dist) {
                dist = d;
                partner = j;
            }
        }
        if (partner == L || dist > tol) {
            throw Error(ErrorKind::degenerate_spectrum, "complex multiplier without conjugate partner");
        }
        take_nearest(lam);
        ModeInit m;
        m.lambda = std::conj(out[partner].lambda);
        m.mu = std::conj(out[partner].mu);
        m.u0 = out[partner].u0.conjugate();
        m.v0 = out[partner].v0.conjugate();
        out[i] = std::move(m);
        done[i] = true;
    }

    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            if (i == j) continue;
            const CVec cuj = C0.cast<cplx>() * out[j].u0;
            const double cross = std::abs((out[i].v0.transpose() * cuj)(0, 0)) /
                                 (out[i].v0.norm() * cuj.norm());
            if (cross > 1e-8) {
                std::ostringstream os;
                os << "modes " << i << " and " << j << " are not biorthogonal (" << cross << ")";
                throw Error(ErrorKind::degenerate_spectrum, os.str());
            }
        }
    }
    return out;
}

int count_relevant_modes(const std::vector<cplx>& exponents, double omega0, int k) {
    int L = 0;
    for (const auto& mu : exponents) {
        if (!std::isfinite(mu.real()) || std::abs(mu.real()) > 10.0 * omega0) break;
        ++L;
    }
    if (L < k) {
        throw Error(ErrorKind::floquet_consistency,
                    "only " + std::to_string(L) + " relevant Floquet modes but the ensemble has k=" +
                        std::to_string(k) + " phase modes");
    }
    return L;
}

FloquetSeries floquet_time_series(const LinearizedPeriod& lin, const std::vector<ModeInit>& modes,
                                  Exec exec) {
    const int L = static_cast<int>(modes.size());
    const int M = lin.M();
    const double h = lin.h();
    const double T0 = lin.T0();
    FloquetSeries out;
    out.u.resize(static_cast<std::size_t>(L));
    out.v.resize(static_cast<std::size_t>(L));
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (int i = 0; i < L; ++i) {
        const cplx mu = modes[i].mu;
        CMat u = lin.forward(modes[i].u0);
        CMat v = lin.adjoint(modes[i].v0);
        for (int j = 0; j <= M; ++j) {
            const double t = j * h;
            u.col(j) *= std::exp(-mu * t);
            v.col(j) *= std::exp(-mu * (T0 - t));
        }
        out.u[i] = std::move(u);
        out.v[i] = std::move(v);
    }
    return out;
}

std::vector<CMat> lambda_series(const std::vector<CMat>& v_series, const std::vector<Mat>& b_series) {
    std::vector<CMat> out;
    out.reserve(v_series.size());
    const int M = static_cast<int>(b_series.size());
    for (const auto& v : v_series) {
        if (v.cols() != M + 1) throw Error(ErrorKind::contract, "dual series and B series grids differ");
        const int p = static_cast<int>(b_series.front().cols());
        CMat lam(p, M + 1);
        for (int j = 0; j <= M; ++j) {
            const Mat& b = b_series[static_cast<std::size_t>(j % M)];
            if (b.rows() != v.rows()) throw Error(ErrorKind::contract, "B rows differ from state size");
            lam.col(j) = b.transpose().cast<cplx>() * v.col(j);
        }
        out.push_back(std::move(lam));
    }
    return out;
}

CMat harmonics(const CMat& series, int nf, Exec exec) {
    return truncated_dft(series.leftCols(series.cols() - 1), nf, exec);
}

CVec FloquetSet::U_h(int i, int m) const {
    if (m < -nf || m > nf) return CVec::Zero(n);
    return U[static_cast<std::size_t>(i)].col(nf + m);
}

CVec FloquetSet::Lambda_h(int i, int m) const {
    if (m < -nf || m > nf) return CVec::Zero(p);
    return Lambda[static_cast<std::size_t>(i)].col(nf + m);
}

cplx FloquetSet::U_hq(int i, int m, int q) const {
    if (m < -nf || m > nf) return {0.0, 0.0};
    return U[static_cast<std::size_t>(i)](q, nf + m);
}

FloquetSet build_floquet_set(const CircuitModel& model, const PssSolution& pss,
                             const FloquetOptions& opts, Exec exec) {
    const LinearizedPeriod lin(model, pss);
    const Mat phi = calc_monodromy(lin, false, exec);
    const Mat psi = calc_monodromy(lin, true, exec);
    std::vector<EigenPair> fwd = eigen_decompose(phi, pss.T0);
    const std::vector<EigenPair> adj = eigen_decompose(psi, pss.T0);

    // The zero mode (multiplier nearest 1) leads; the rest keep |lambda| order.
    std::size_t zi = 0;
    for (std::size_t i = 1; i < fwd.size(); ++i) {
        if (std::abs(fwd[i].lambda - 1.0) < std::abs(fwd[zi].lambda - 1.0)) zi = i;
    }
    if (!(std::abs(fwd[zi].mu) * pss.T0 <= opts.zero_mode_tol)) {
        std::ostringstream os;
        os << "no zero mode: closest multiplier " << fwd[zi].lambda << " gives |mu| T0 = "
           << std::abs(fwd[zi].mu) * pss.T0 << " (PSS not converged or not an autonomous oscillator)";
        throw Error(ErrorKind::floquet_consistency, os.str());
    }
    std::rotate(fwd.begin(), fwd.begin() + static_cast<std::ptrdiff_t>(zi),
                fwd.begin() + static_cast<std::ptrdiff_t>(zi) + 1);

    const Mat& C0 = lin.C(0);
    std::vector<ModeInit> modes = pair_and_normalize(fwd, adj, C0, opts.pair_tol);

    // Scale the zero mode to the PSS tangent so the phase variable is in seconds.
    {
        ModeInit& z = modes.front();
        const CVec tangent = model.rhs(pss.state(0), 0.0).cast<cplx>();
        const cplx s = z.u0.dot(tangent) / z.u0.squaredNorm();  // dot conjugates the first argument
        const CVec u = (s * z.u0).real().cast<cplx>();
        CVec v = (z.v0 / s).real().cast<cplx>();
        v /= bilinear(v, C0, u);
        z.u0 = u;
        z.v0 = v;
        z.lambda = cplx{1.0, 0.0};
        z.mu = cplx{0.0, 0.0};
    }

    std::vector<cplx> mus;
    mus.reserve(modes.size());
    for (const auto& m : modes) mus.push_back(m.mu);
    const int L = count_relevant_modes(mus, pss.omega0, opts.k);
    modes.resize(static_cast<std::size_t>(L));

    FloquetSet fs;
    fs.T0 = pss.T0;
    fs.omega0 = pss.omega0;
    fs.n = model.n();
    fs.p = model.p();
    fs.M = pss.M;
    fs.nf = opts.nf;
    fs.k = opts.k;
    fs.L = L;
    fs.mu.assign(mus.begin(), mus.begin() + L);

    int nonzero_rank = 0;
    for (const auto& e : fwd) {
        ModeInfo info{e.lambda, e.mu, false};
        if (e.lambda != cplx{0.0, 0.0}) {
            info.retained = nonzero_rank < L;
            if (nonzero_rank == 0) info.mu = cplx{0.0, 0.0};
            ++nonzero_rank;
        }
        fs.all_modes.push_back(info);
    }

    FloquetSeries series = floquet_time_series(lin, modes, exec);
    for (int i = 0; i < L; ++i) {
        const CMat& u = series.u[static_cast<std::size_t>(i)];
        const CMat& v = series.v[static_cast<std::size_t>(i)];
        const double eu = (u.col(fs.M) - u.col(0)).norm() / u.col(0).norm();
        const double ev = (v.col(fs.M) - v.col(0)).norm() / v.col(0).norm();
        if (!(std::max(eu, ev) <= opts.periodicity_tol)) {
            std::ostringstream os;
            os << "detrended Floquet series of mode " << i + 1 << " is not periodic (endpoint mismatch "
               << std::max(eu, ev) << ")";
            throw Error(ErrorKind::floquet_consistency, os.str());
        }
    }

    std::vector<Mat> b_series(static_cast<std::size_t>(fs.M));
    fs.c_series.resize(static_cast<std::size_t>(fs.M));
    for (int j = 0; j < fs.M; ++j) {
        b_series[j] = model.b(pss.state(j));
        fs.c_series[j] = lin.C(j);
    }
    fs.lambda = lambda_series(series.v, b_series);
    fs.u_series = std::move(series.u);
    fs.v_series = std::move(series.v);

    fs.U.resize(static_cast<std::size_t>(L));
    fs.Lambda.resize(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
        fs.U[i] = harmonics(fs.u_series[i], fs.nf, exec);
        fs.Lambda[i] = harmonics(fs.lambda[i], fs.nf, exec);
    }
    return fs;
}

void write_floquet_csv(std::ostream& os, const FloquetSet& fs) {
    os << "i,re_mu,im_mu,abs_lambda,retained\n";
    os.precision(17);
    int i = 1;
    for (const auto& m : fs.all_modes) {
        os << i++ << ',' << m.mu.real() << ',' << m.mu.imag() << ',' << std::abs(m.lambda) << ','
           << (m.retained ? 1 : 0) << '\n';
    }
}

}  // namespace coscpmm
