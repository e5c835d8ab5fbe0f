#pragma once

#include <string>
#include <vector>

#include "coscpmm/floquet.hpp"
#include "coscpmm/pss.hpp"
#include "coscpmm/types.hpp"

namespace coscpmm {

/// c = sum_m Lambda_{1,m} Lambda_{1,m}^H, the variance rate of the phase (s).
/// `lambda1` is p x (2 nf + 1).
[[nodiscard]] double phase_diffusion(const CMat& lambda1);

/// value / |X_{s,nu}[q]|^2. `harmonics` is the n x (2 nf + 1) PSS table.
[[nodiscard]] cplx normalize_diag(cplx value, int q, const CMat& harmonics, int nu);

/// |X_{s,nu}[q]|^2 with the dead-node guard.
[[nodiscard]] double carrier_power(int q, const CMat& harmonics, int nu);

// Unnormalised (q,q) diagonal elements. Mode indices are 1-based as in the
// operator definitions: mode 1 is the zero mode, 2..k the other phase modes,
// k+1..L the amplitude modes.
namespace diag {
[[nodiscard]] cplx omega(const FloquetSet& fs, int q, int nu);
[[nodiscard]] cplx theta(const FloquetSet& fs, int l, int rho, int q, int nu);
[[nodiscard]] cplx pi(const FloquetSet& fs, int l, int rho, int q, int nu);
[[nodiscard]] cplx psi(const FloquetSet& fs, int q, int nu);
[[nodiscard]] cplx xi(const FloquetSet& fs, int l, int rho, int q, int nu);
}  // namespace diag

// Normalised scalars: a+jb, Y+jD, W+jT, t+ju, E+jZ.
[[nodiscard]] cplx omega_scalar(int q, int nu, const FloquetSet& fs, const PssSolution& pss);
[[nodiscard]] cplx theta_scalar(int l, int rho, int q, int nu, const FloquetSet& fs,
                                const PssSolution& pss);
[[nodiscard]] cplx pi_scalar(int l, int rho, int q, int nu, const FloquetSet& fs, const PssSolution& pss);
[[nodiscard]] cplx psi_scalar(int q, int nu, const FloquetSet& fs, const PssSolution& pss);
[[nodiscard]] cplx xi_scalar(int l, int rho, int q, int nu, const FloquetSet& fs, const PssSolution& pss);

/// Operators for one observation node and harmonic. Tables are indexed
/// (l - 1, rho + nf).
struct NodeOperators {
    std::string node;
    int q = 0;
    int nu = 1;
    double carrier_power = 0.0;
    cplx omega{0.0, 0.0};   // a + jb
    cplx psi{0.0, 0.0};     // t + ju
    CMat theta;             // (k - 1) rows
    CMat pi;                // (L - k) rows
    CMat xi;                // (L - 1) rows
};

struct NoiseOperators {
    double c = 0.0;
    double omega0 = 0.0;
    int k = 1;
    int L = 1;
    int nf = 0;
    std::vector<cplx> mu;
    std::vector<NodeOperators> nodes;
};

struct NodeRequest {
    std::string name;
    int q = 0;
    int nu = 1;
};

[[nodiscard]] NoiseOperators build_noise_operators(const FloquetSet& fs, const PssSolution& pss,
                                                   const std::vector<NodeRequest>& nodes,
                                                   Exec exec = Exec::parallel);

namespace ref {
/// Serial reference assembly, same results as the OpenMP path.
[[nodiscard]] NoiseOperators build_noise_operators(const FloquetSet& fs, const PssSolution& pss,
                                                   const std::vector<NodeRequest>& nodes);
}  // namespace ref

}  // namespace coscpmm
