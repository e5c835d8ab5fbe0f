#include "coscpmm/pss.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>

#include "coscpmm/error.hpp"
#include "coscpmm/kernels.hpp"

namespace coscpmm {

namespace {

constexpr int kStepNewtonMax = 50;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

double inf_norm(const Vec& v) { return v.lpNorm<Eigen::Infinity>(); }

}  // namespace

Vec trapezoid_step(const CircuitModel& model, const Vec& x, double t, double h) {
    const Vec qx = model.q(x);
    const Vec known = -qx + 0.5 * h * (model.i(x) + model.s(t) + model.s(t + h));
    Vec y = x;
    const double scale = std::max(inf_norm(x), std::numeric_limits<double>::min());
    for (int it = 0; it < kStepNewtonMax; ++it) {
        const Vec r = model.q(y) + 0.5 * h * model.i(y) + known;
        const Mat jac = model.c(y) + 0.5 * h * model.g(y);
        const Vec dy = jac.partialPivLu().solve(r);
        if (!dy.allFinite()) {
            throw Error(ErrorKind::rank_deficiency,
                        "trapezoidal step matrix C + h/2 G is singular at t=" + std::to_string(t));
        }
        y -= dy;
        if (inf_norm(dy) <= 1e-14 * std::max(scale, inf_norm(y))) return y;
    }
    throw Error(ErrorKind::no_convergence,
                "trapezoidal corrector did not converge at t=" + std::to_string(t));
}

Mat integrate_trapezoid(const CircuitModel& model, const Vec& x0, double t0, double h, int steps) {
    Mat traj(steps + 1, model.n());
    traj.row(0) = x0.transpose();
    Vec x = x0;
    for (int j = 0; j < steps; ++j) {
        x = trapezoid_step(model, x, t0 + j * h, h);
        traj.row(j + 1) = x.transpose();
    }
    return traj;
}

namespace {

struct ShootResult {
    Vec xT;      // state after one period
    Mat S;       // d xT / d x0
    Vec zT;      // d xT / d T
    double peak; // max-norm over the trajectory
    Vec amp;     // per-component max |x| over the trajectory
};

ShootResult shoot(const CircuitModel& model, const Vec& x0, double T, int M) {
    const int n = model.n();
    const double h = T / M;
    ShootResult res{x0, Mat::Identity(n, n), Vec::Zero(n), inf_norm(x0), x0.cwiseAbs()};
    Vec x = x0;
    Mat cx = model.c(x);
    Mat gx = model.g(x);
    Vec ix = model.i(x);
    for (int j = 0; j < M; ++j) {
        const double t = j * h;
        const Vec y = trapezoid_step(model, x, t, h);
        const Mat cy = model.c(y);
        const Mat gy = model.g(y);
        const Vec iy = model.i(y);
        const Eigen::PartialPivLU<Mat> lu(cy + 0.5 * h * gy);
        const Mat bm = cx - 0.5 * h * gx;
        res.S = lu.solve(bm * res.S);
        const Vec forcing = 0.5 * (iy + ix + model.s(t + h) + model.s(t)) / static_cast<double>(M);
        res.zT = lu.solve(bm * res.zT - forcing);
        x = y;
        cx = cy;
        gx = gy;
        ix = iy;
        res.peak = std::max(res.peak, inf_norm(x));
        res.amp = res.amp.cwiseMax(x.cwiseAbs());
    }
    res.xT = x;
    return res;
}

double anchor(const CircuitModel& model, const Vec& x) { return model.rhs(x, 0.0)[0]; }

Vec anchor_gradient(const CircuitModel& model, const Vec& x) {
    const int n = model.n();
    Vec grad(n);
    const double base = std::max(inf_norm(x), std::numeric_limits<double>::min());
    for (int k = 0; k < n; ++k) {
        const double d = 1e-7 * std::max(std::abs(x[k]), 1e-3 * base);
        Vec xp = x;
        Vec xm = x;
        xp[k] += d;
        xm[k] -= d;
        grad[k] = (anchor(model, xp) - anchor(model, xm)) / (2.0 * d);
    }
    return grad;
}

// Integrates whole periods of transient, then stops at the next maximum of x_1
// so Newton starts close to the anchored phase.
Vec warm_start(const CircuitModel& model, const Vec& x0, double T, int M, int periods) {
    const double h = T / M;
    Vec x = x0;
    double t = 0.0;
    for (int j = 0; j < periods * M; ++j, t += h) x = trapezoid_step(model, x, t, h);
    double prev = anchor(model, x);
    for (int j = 0; j < 2 * M; ++j, t += h) {
        const Vec y = trapezoid_step(model, x, t, h);
        const double cur = anchor(model, y);
        if (prev > 0.0 && cur <= 0.0) {
            return std::abs(cur) < std::abs(prev) ? y : x;
        }
        x = y;
        prev = cur;
    }
    return x;
}

}  // namespace

PssSolution solve_pss(const CircuitModel& model, const PssGuess& guess, const PssOptions& opts) {
    const int n = model.n();
    if (!is_power_of_two(opts.M) || opts.M < 8) {
        throw Error(ErrorKind::configuration, "PSS grid size M must be a power of two >= 8");
    }
    if (guess.x0.size() != n) {
        throw Error(ErrorKind::configuration, "initial guess has the wrong dimension");
    }
    if (!(guess.T0 > 0.0)) {
        throw Error(ErrorKind::configuration, "period guess must be positive");
    }
    if (!model.autonomous()) {
        throw Error(ErrorKind::contract, "steady-state shooting requires an autonomous model");
    }

    const int M = opts.M;
    Vec x0 = opts.warmup_periods > 0 ? warm_start(model, guess.x0, guess.T0, M, opts.warmup_periods)
                                     : guess.x0;
    double T = guess.T0;

    auto residual = [&](const ShootResult& sr, const Vec& x, double fscale) {
        Vec r(n + 1);
        const double xs = std::max(sr.peak, std::numeric_limits<double>::min());
        r.head(n) = (sr.xT - x) / xs;
        r[n] = anchor(model, x) / fscale;
        return r;
    };

    double fscale = std::max(inf_norm(model.rhs(x0, 0.0)), std::numeric_limits<double>::min());
    ShootResult sr = shoot(model, x0, T, M);
    Vec r = residual(sr, x0, fscale);
    int iter = 0;
    double defect = r.head(n).lpNorm<Eigen::Infinity>();
    for (; iter <= opts.max_iter; ++iter) {
        defect = r.head(n).lpNorm<Eigen::Infinity>();
        if (defect <= opts.tol && std::abs(r[n]) <= 1e-6) break;
        if (iter == opts.max_iter) {
            std::ostringstream os;
            os << "shooting Newton did not converge after " << opts.max_iter
               << " iterations; final relative defect " << defect;
            throw Error(ErrorKind::no_convergence, os.str());
        }

        Mat jac = Mat::Zero(n + 1, n + 1);
        const double xs = std::max(sr.peak, std::numeric_limits<double>::min());
        jac.topLeftCorner(n, n) = (sr.S - Mat::Identity(n, n)) / xs;
        jac.topRightCorner(n, 1) = sr.zT / xs;
        jac.bottomLeftCorner(1, n) = anchor_gradient(model, x0).transpose() / fscale;
        // Equilibrate rows and columns, then drop singular directions below
        // 1e-4 of the largest. An isolated cycle has none and this is plain
        // Newton; a conservative tank or uncoupled units have a family of
        // orbits, and the truncation keeps the iterate on the family member
        // through the current guess instead of sliding towards x = 0.
        Vec colscale(n + 1);
        colscale.head(n) = sr.amp.cwiseMax(1e-3 * xs);
        colscale[n] = T;
        Vec rowscale = Vec::Ones(n + 1);
        rowscale.head(n) = xs * colscale.head(n).cwiseInverse();
        const Mat scaled = rowscale.asDiagonal() * jac * colscale.asDiagonal();
        Eigen::JacobiSVD<Mat> svd(scaled, Eigen::ComputeFullU | Eigen::ComputeFullV);
        svd.setThreshold(1e-4);
        const Vec step = colscale.asDiagonal() * svd.solve(-(rowscale.asDiagonal() * r));
        if (!step.allFinite()) {
            throw Error(ErrorKind::no_convergence, "shooting Jacobian produced a non-finite step");
        }

        const double rnorm = r.norm();
        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 12; ++halving, lambda *= 0.5) {
            const Vec xn = x0 + lambda * step.head(n);
            const double Tn = T + lambda * step[n];
            if (!(Tn > 1e-3 * guess.T0) || !std::isfinite(Tn)) continue;
            try {
                ShootResult trial = shoot(model, xn, Tn, M);
                Vec rn = residual(trial, xn, fscale);
                if (rn.allFinite() && (rn.norm() < rnorm || halving == 11)) {
                    x0 = xn;
                    T = Tn;
                    sr = std::move(trial);
                    r = std::move(rn);
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
                // trial point left the region where the corrector converges; shrink
            }
        }
        if (!accepted) {
            if (!(T + step[n] > 1e-3 * guess.T0)) {
                throw Error(ErrorKind::degenerate_solution,
                            "period collapsed towards zero during shooting");
            }
            throw Error(ErrorKind::no_convergence, "damped Newton could not reduce the residual");
        }
    }
    if (!(T > 0.0) || T < 1e-3 * guess.T0) {
        throw Error(ErrorKind::degenerate_solution, "period collapsed towards zero");
    }

    PssSolution pss;
    pss.T0 = T;
    pss.omega0 = kTwoPi / T;
    pss.M = M;
    pss.iterations = iter;
    const double h = T / M;
    const Mat traj = integrate_trapezoid(model, x0, 0.0, h, M);
    pss.states = traj.topRows(M);
    pss.grid.resize(M);
    for (int j = 0; j < M; ++j) pss.grid[j] = j * h;
    const double peak = std::max(pss.states.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
    pss.defect = (traj.row(M) - traj.row(0)).lpNorm<Eigen::Infinity>() / peak;
    if (!pss.states.allFinite()) {
        throw Error(ErrorKind::numerical, "steady-state trajectory is not finite");
    }
    pss.nf = opts.nf;
    pss.harmonics = pss_harmonics(pss, opts.nf);
    return pss;
}

CMat pss_harmonics(const PssSolution& pss, int nf) {
    return truncated_dft(pss.states.transpose().cast<cplx>(), nf);
}

void write_pss_csv(std::ostream& os, const PssSolution& pss) {
    os << "t";
    for (int c = 0; c < pss.n(); ++c) os << ",x_" << (c + 1);
    os << '\n';
    os.precision(17);
    for (int j = 0; j < pss.M; ++j) {
        os << pss.grid[j];
        for (int c = 0; c < pss.n(); ++c) os << ',' << pss.states(j, c);
        os << '\n';
    }
}

}  // namespace coscpmm
