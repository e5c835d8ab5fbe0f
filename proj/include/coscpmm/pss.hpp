#pragma once

#include <iosfwd>
#include <vector>

#include "coscpmm/model.hpp"
#include "coscpmm/types.hpp"

namespace coscpmm {

struct PssOptions {
    int M = 1024;               // grid points per period (power of two)
    double tol = 1e-9;          // relative periodicity defect
    int max_iter = 50;          // Newton iterations
    int warmup_periods = 10;    // transient periods integrated before shooting
    int nf = 16;                // harmonics stored with the solution
};

/// Sampled periodic steady state on a uniform grid t_j = j T0 / M, j = 0..M-1.
struct PssSolution {
    double T0 = 0.0;
    double omega0 = 0.0;
    int M = 0;
    std::vector<double> grid;   // M sample times
    Mat states;                 // M x n
    int nf = 0;
    CMat harmonics;             // n x (2 nf + 1); column nf + m holds X_{s,m}
    double defect = 0.0;        // final relative periodicity defect
    int iterations = 0;

    [[nodiscard]] int n() const noexcept { return static_cast<int>(states.cols()); }
    [[nodiscard]] Vec state(int j) const { return states.row(j).transpose(); }
    [[nodiscard]] cplx harmonic(int node, int m) const { return harmonics(node, nf + m); }
};

/// One fixed-step trapezoidal step of  d/dt q(x) + i(x) + s(t) = 0  from (x, t) to t + h.
/// This is the single LMS scheme used for the steady state and for every
/// linear-response integration built on top of it.
[[nodiscard]] Vec trapezoid_step(const CircuitModel& model, const Vec& x, double t, double h);

/// Integrates `steps` trapezoidal steps of size h starting at x0; returns the
/// (steps + 1) x n trajectory.
[[nodiscard]] Mat integrate_trapezoid(const CircuitModel& model, const Vec& x0, double t0, double h,
                                      int steps);

/// Shooting-Newton on (x0, T0) with the anchor  dx_1/dt(0) = 0.
[[nodiscard]] PssSolution solve_pss(const CircuitModel& model, const PssGuess& guess,
                                    const PssOptions& opts = {});

/// X_{s,m} = (1/M) sum_j x_s(t_j) exp(-i 2 pi m j / M), m in [-nf, nf].
[[nodiscard]] CMat pss_harmonics(const PssSolution& pss, int nf);

/// Writes `t,x_1,...,x_n` rows for the M grid samples.
void write_pss_csv(std::ostream& os, const PssSolution& pss);

}  // namespace coscpmm
