#include "coscpmm/noise_ops.hpp"

#include <cmath>
#include <sstream>

#include "coscpmm/error.hpp"

namespace coscpmm {

double phase_diffusion(const CMat& lambda1) {
    const cplx s = (lambda1.array() * lambda1.conjugate().array()).sum();
    const double scale = lambda1.squaredNorm();
    if (s.real() < -1e-12 * scale || std::abs(s.imag()) > 1e-10 * std::max(scale, 1e-300)) {
        throw Error(ErrorKind::internal_consistency, "phase diffusion constant is not real and non-negative");
    }
    return std::max(s.real(), 0.0);
}

double carrier_power(int q, const CMat& harmonics, int nu) {
    const int nf = static_cast<int>(harmonics.cols() - 1) / 2;
    if (q < 0 || q >= harmonics.rows()) throw Error(ErrorKind::contract, "node index out of range");
    if (nu < -nf || nu > nf) {
        throw Error(ErrorKind::configuration, "harmonic index " + std::to_string(nu) +
                                                  " exceeds the stored harmonics (Nf=" +
                                                  std::to_string(nf) + ")");
    }
    const double pw = std::norm(harmonics(q, nf + nu));
    if (!(pw >= 1e-30)) {
        throw Error(ErrorKind::dead_node, "node " + std::to_string(q) + " has no content at harmonic " +
                                              std::to_string(nu) + "; spectrum undefined there");
    }
    return pw;
}

cplx normalize_diag(cplx value, int q, const CMat& harmonics, int nu) {
    return value / carrier_power(q, harmonics, nu);
}

namespace {

// Zero-based access with 1-based mode numbers.
struct View {
    const FloquetSet& fs;
    int q;

    [[nodiscard]] cplx u(int mode, int m) const { return fs.U_hq(mode - 1, m, q); }
    [[nodiscard]] cplx lam_dot(int b, int y, int c, int z) const {
        if (y < -fs.nf || y > fs.nf || z < -fs.nf || z > fs.nf) return {0.0, 0.0};
        const auto lb = fs.Lambda[static_cast<std::size_t>(b - 1)].col(fs.nf + y);
        const auto lc = fs.Lambda[static_cast<std::size_t>(c - 1)].col(fs.nf + z);
        return (lb.array() * lc.conjugate().array()).sum();
    }
    [[nodiscard]] cplx mu(int mode) const { return fs.mu[static_cast<std::size_t>(mode - 1)]; }

    // [U_{a,x} Lambda_{b,y}^T Lambda*_{c,z} U^H_{d,w}]_{q,q}
    [[nodiscard]] cplx term(int a, int x, int b, int y, int c, int z, int d, int w) const {
        const cplx ua = u(a, x);
        if (ua == cplx{0.0, 0.0}) return {0.0, 0.0};
        const cplx ud = u(d, w);
        if (ud == cplx{0.0, 0.0}) return {0.0, 0.0};
        return ua * lam_dot(b, y, c, z) * std::conj(ud);
    }

    [[nodiscard]] cplx guard(cplx den, const char* op, int mode, int idx) const {
        if (std::abs(den) < 1e-12 * fs.omega0) {
            std::ostringstream os;
            os << op << ": resonant denominator for mode " << mode << " at harmonic " << idx;
            throw Error(ErrorKind::resonant_denominator, os.str());
        }
        return den;
    }

    // sum_{m=lo..hi} sum_p U_{1,nu} L_{1,0}^T L*_{m,nu-p} U^H_{m,p} / (j w0 (p - nu) - mu_m^*)
    [[nodiscard]] cplx phase_lead(int lo, int hi, int nu, const char* op) const {
        const cplx j{0.0, 1.0};
        cplx acc{0.0, 0.0};
        for (int m = lo; m <= hi; ++m) {
            for (int p = -fs.nf; p <= fs.nf; ++p) {
                const cplx den = guard(j * fs.omega0 * double(p - nu) - std::conj(mu(m)), op, m, p);
                acc += term(1, nu, 1, 0, m, nu - p, m, p) / den;
            }
        }
        return acc;
    }

    // sum_{i=lo..hi} sum_p U_{i,p} L_{i,rho-p}^T L*_{r,rho-nu} U^H_{r,nu} / (j w0 (nu - p) - mu_r^* - mu_i)
    [[nodiscard]] cplx cross_sum(int lo, int hi, int r, int rho, int nu, const char* op) const {
        const cplx j{0.0, 1.0};
        cplx acc{0.0, 0.0};
        for (int i = lo; i <= hi; ++i) {
            for (int p = -fs.nf; p <= fs.nf; ++p) {
                const cplx den =
                    guard(j * fs.omega0 * double(nu - p) - std::conj(mu(r)) - mu(i), op, i, p);
                acc += term(i, p, i, rho - p, r, rho - nu, r, nu) / den;
            }
        }
        return acc;
    }

    // Zero-mode term shared by theta and the second xi branch.
    [[nodiscard]] cplx zero_term(int r, int rho, int nu, const char* op) const {
        const cplx j{0.0, 1.0};
        const cplx den = guard(j * fs.omega0 * double(nu - rho) - std::conj(mu(r)) - mu(1), op, 1, rho);
        return term(1, rho, 1, 0, r, rho - nu, r, nu) / den;
    }
};

void check_l(int l, int lo, int hi, const char* op) {
    if (l < lo || l > hi) {
        std::ostringstream os;
        os << op << ": mode offset l=" << l << " outside [" << lo << ", " << hi << "]";
        throw Error(ErrorKind::contract, os.str());
    }
}

}  // namespace

namespace diag {

cplx omega(const FloquetSet& fs, int q, int nu) {
    return View{fs, q}.phase_lead(2, fs.k, nu, "omega");
}

cplx theta(const FloquetSet& fs, int l, int rho, int q, int nu) {
    check_l(l, 1, fs.k - 1, "theta");
    const View v{fs, q};
    return v.zero_term(l + 1, rho, nu, "theta") + v.cross_sum(2, fs.k, l + 1, rho, nu, "theta");
}

cplx pi(const FloquetSet& fs, int l, int rho, int q, int nu) {
    check_l(l, 1, fs.L - fs.k, "pi");
    return View{fs, q}.cross_sum(fs.k + 1, fs.L, l + fs.k, rho, nu, "pi");
}

cplx psi(const FloquetSet& fs, int q, int nu) {
    return View{fs, q}.phase_lead(fs.k + 1, fs.L, nu, "psi");
}

cplx xi(const FloquetSet& fs, int l, int rho, int q, int nu) {
    check_l(l, 1, fs.L - 1, "xi");
    const View v{fs, q};
    if (l <= fs.k - 1) return v.cross_sum(fs.k + 1, fs.L, l + 1, rho, nu, "xi");
    return v.zero_term(l + 1, rho, nu, "xi") + v.cross_sum(2, fs.k, l + 1, rho, nu, "xi");
}

}  // namespace diag

cplx omega_scalar(int q, int nu, const FloquetSet& fs, const PssSolution& pss) {
    return normalize_diag(diag::omega(fs, q, nu), q, pss.harmonics, nu);
}

cplx theta_scalar(int l, int rho, int q, int nu, const FloquetSet& fs, const PssSolution& pss) {
    return normalize_diag(diag::theta(fs, l, rho, q, nu), q, pss.harmonics, nu);
}

cplx pi_scalar(int l, int rho, int q, int nu, const FloquetSet& fs, const PssSolution& pss) {
    return normalize_diag(diag::pi(fs, l, rho, q, nu), q, pss.harmonics, nu);
}

cplx psi_scalar(int q, int nu, const FloquetSet& fs, const PssSolution& pss) {
    return normalize_diag(diag::psi(fs, q, nu), q, pss.harmonics, nu);
}

cplx xi_scalar(int l, int rho, int q, int nu, const FloquetSet& fs, const PssSolution& pss) {
    return normalize_diag(diag::xi(fs, l, rho, q, nu), q, pss.harmonics, nu);
}

namespace {

NoiseOperators assemble(const FloquetSet& fs, const PssSolution& pss, const std::vector<NodeRequest>& nodes,
                        bool parallel) {
    if (fs.Lambda.empty() || fs.L < fs.k) throw Error(ErrorKind::contract, "Floquet set is incomplete");
    NoiseOperators ops;
    ops.c = phase_diffusion(fs.Lambda.front());
    ops.omega0 = fs.omega0;
    ops.k = fs.k;
    ops.L = fs.L;
    ops.nf = fs.nf;
    ops.mu = fs.mu;
    const int width = 2 * fs.nf + 1;
    for (const auto& req : nodes) {
        NodeOperators no;
        no.node = req.name;
        no.q = req.q;
        no.nu = req.nu;
        no.carrier_power = carrier_power(req.q, pss.harmonics, req.nu);
        const double inv = 1.0 / no.carrier_power;
        no.omega = diag::omega(fs, req.q, req.nu) * inv;
        no.psi = diag::psi(fs, req.q, req.nu) * inv;
        no.theta = CMat::Zero(fs.k - 1, width);
        no.pi = CMat::Zero(fs.L - fs.k, width);
        no.xi = CMat::Zero(fs.L - 1, width);
        // Each column is written by exactly one iteration; errors are collected
        // and rethrown outside the parallel region.
        std::vector<std::string> errs(static_cast<std::size_t>(width));
        std::vector<ErrorKind> kinds(static_cast<std::size_t>(width), ErrorKind::numerical);
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (int col = 0; col < width; ++col) {
            const int rho = col - fs.nf;
            try {
                for (int l = 1; l <= fs.k - 1; ++l) no.theta(l - 1, col) = diag::theta(fs, l, rho, req.q, req.nu) * inv;
                for (int l = 1; l <= fs.L - fs.k; ++l) no.pi(l - 1, col) = diag::pi(fs, l, rho, req.q, req.nu) * inv;
                for (int l = 1; l <= fs.L - 1; ++l) no.xi(l - 1, col) = diag::xi(fs, l, rho, req.q, req.nu) * inv;
            } catch (const Error& e) {
                errs[col] = e.what();
                kinds[col] = e.kind();
            }
        }
        for (int col = 0; col < width; ++col) {
            if (!errs[col].empty()) throw Error(kinds[col], errs[col]);
        }
        const bool finite = std::isfinite(no.omega.real()) && std::isfinite(no.omega.imag()) &&
                            std::isfinite(no.psi.real()) && std::isfinite(no.psi.imag()) &&
                            no.theta.allFinite() && no.pi.allFinite() && no.xi.allFinite();
        if (!finite) {
            throw Error(ErrorKind::numerical, "noise operators for node " + req.name + " are not finite");
        }
        ops.nodes.push_back(std::move(no));
    }
    return ops;
}

}  // namespace

NoiseOperators build_noise_operators(const FloquetSet& fs, const PssSolution& pss,
                                     const std::vector<NodeRequest>& nodes, Exec exec) {
    return assemble(fs, pss, nodes, exec == Exec::parallel);
}

namespace ref {

NoiseOperators build_noise_operators(const FloquetSet& fs, const PssSolution& pss,
                                     const std::vector<NodeRequest>& nodes) {
    return assemble(fs, pss, nodes, false);
}

}  // namespace ref

}  // namespace coscpmm
