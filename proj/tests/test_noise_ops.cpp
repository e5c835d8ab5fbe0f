#include <doctest.h>

#include "coscpmm/error.hpp"
#include "support.hpp"

using namespace coscpmm;
using namespace testsupport;

namespace {

const Solved& ilo_asym() {
    static const Solved s = ilo(0.02, 1e-6, 1e-4, 1.0, 16, 0.1);
    return s;
}

const Solved& vdp_asym() {
    static const Solved s = vdp(1.0, 1e-4, 16, 0.1);
    return s;
}

double table_rel_change(const CMat& a, const CMat& b, int nfa, int nfb) {
    // b has the larger truncation; compare on a's index range
    const CMat bb = b.middleCols(nfb - nfa, 2 * nfa + 1);
    return bb.norm() == 0.0 ? a.norm() : (a - bb).norm() / bb.norm();
}

}  // namespace

TEST_CASE("phase diffusion of trivial lambda tables") {
    CHECK(phase_diffusion(CMat::Zero(2, 33)) == 0.0);
    CMat lam = CMat::Zero(1, 33);
    lam(0, 16) = 0.37;
    CHECK(phase_diffusion(lam) == doctest::Approx(0.37 * 0.37));
}

TEST_CASE("phase diffusion: Parseval form equals time-domain quadrature") {
    for (const Solved* s : {&vdp_asym(), &ilo_asym()}) {
        double quad = 0.0;
        for (int j = 0; j < s->fs.M; ++j) quad += s->fs.lambda.front().col(j).squaredNorm();
        quad /= s->fs.M;
        CHECK(rel(quad, s->ops.c) <= 1e-6);
    }
}

TEST_CASE("noiseless model has c = 0 and a noisy one c > 0") {
    const Solved quiet = vdp(1.0, 0.0);
    CHECK(quiet.ops.c == 0.0);
    const Solved loud = vdp(1.0, 1e-4);
    CHECK(loud.ops.c > 0.0);
}

TEST_CASE("normalize_diag") {
    CMat X = CMat::Zero(1, 5);
    X(0, 3) = 0.5;
    CHECK(std::abs(normalize_diag(1.0, 0, X, 1) - cplx(4.0, 0.0)) < 1e-15);
    CHECK(normalize_diag(0.0, 0, X, 1) == cplx(0.0, 0.0));
    try {
        (void)normalize_diag(1.0, 0, X, 2);
        FAIL("expected a dead node");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dead_node);
    }
}

TEST_CASE("VDP carrier power equals a hand-rolled DFT of the node waveform") {
    const Solved& s = vdp_asym();
    cplx acc{0.0, 0.0};
    for (int j = 0; j < s.pss.M; ++j) acc += s.pss.states(j, 0) * std::polar(1.0, -kTwoPi * j / s.pss.M);
    acc /= double(s.pss.M);
    CHECK(rel(s.ops.nodes[0].carrier_power, std::norm(acc)) < 1e-12);
    CHECK(rel(normalize_diag(1.0, 0, s.pss.harmonics, 1).real(), 1.0 / std::norm(acc)) < 1e-12);
}

TEST_CASE("a node without second-harmonic content is rejected") {
    const Solved s = vdp();   // half-wave symmetric: no even harmonics
    try {
        (void)build_noise_operators(s.fs, s.pss, {{"v", 0, 2}});
        FAIL("expected dead node");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dead_node);
    }
}

TEST_CASE("single oscillator: empty phase sums") {
    const Solved& s = vdp_asym();
    const auto& node = s.ops.nodes[0];
    CHECK(node.omega == cplx(0.0, 0.0));
    CHECK(node.theta.rows() == 0);
    CHECK(node.pi.rows() == s.fs.L - 1);
    CHECK(node.xi.rows() == s.fs.L - 1);
}

TEST_CASE("noiseless primary: its modes carry no lambda and no phase diffusion") {
    const Solved s = ilo(0.02, 0.0, 1e-4);
    REQUIRE(s.fs.k == 2);
    // with one-way coupling the duals of the primary's own modes live on the
    // primary rows, where B is zero
    int silent = 0;
    for (int i = 0; i < s.fs.L; ++i) {
        const double vsec = s.fs.v_series[i].bottomRows(2).norm();
        if (vsec <= 1e-12 * s.fs.v_series[i].norm()) {
            CHECK(s.fs.Lambda[i].norm() == 0.0);
            ++silent;
        }
    }
    CHECK(silent >= 2);
    CHECK(s.ops.c == 0.0);
    for (const auto& node : s.ops.nodes) CHECK(node.omega == cplx(0.0, 0.0));
}

TEST_CASE("diagonal fast path equals the dense matrix evaluation") {
    for (const Solved* s : {&ilo_asym(), &vdp_asym()}) {
        const FloquetSet& fs = s->fs;
        const DenseOperators dense{fs};
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<int> rho_d(-fs.nf, fs.nf);
        std::uniform_int_distribution<int> q_d(0, fs.n - 1);
        const int nu = 1;
        auto check = [&](cplx fast, cplx oracle) { CHECK(rel(fast, oracle) <= 1e-10); };
        for (int q = 0; q < fs.n; q += 2) {
            check(omega_scalar(q, nu, fs, s->pss), normalized(dense.omega(nu), q, s->pss, nu));
            check(psi_scalar(q, nu, fs, s->pss), normalized(dense.psi(nu), q, s->pss, nu));
        }
        for (int trial = 0; trial < 10; ++trial) {
            const int rho = rho_d(rng);
            int q = q_d(rng) & ~1;   // tank voltages carry the carrier
            if (fs.k > 1) {
                std::uniform_int_distribution<int> l_d(1, fs.k - 1);
                const int l = l_d(rng);
                check(theta_scalar(l, rho, q, nu, fs, s->pss), normalized(dense.theta(l, rho, nu), q, s->pss, nu));
            }
            if (fs.L > fs.k) {
                std::uniform_int_distribution<int> l_d(1, fs.L - fs.k);
                const int l = l_d(rng);
                check(pi_scalar(l, rho, q, nu, fs, s->pss), normalized(dense.pi(l, rho, nu), q, s->pss, nu));
            }
            std::uniform_int_distribution<int> l_d(1, fs.L - 1);
            const int l = l_d(rng);
            check(xi_scalar(l, rho, q, nu, fs, s->pss), normalized(dense.xi(l, rho, nu), q, s->pss, nu));
        }
    }
}

TEST_CASE("dense evaluation at the named indices") {
    const Solved& s = ilo_asym();
    const DenseOperators dense{s.fs};
    const auto& pss = s.pss;
    // theta at l = 1, rho = 0 and both xi branches
    CHECK(rel(theta_scalar(1, 0, 0, 1, s.fs, pss), normalized(dense.theta(1, 0, 1), 0, pss, 1)) <= 1e-10);
    CHECK(rel(xi_scalar(1, 0, 2, 1, s.fs, pss), normalized(dense.xi(1, 0, 1), 2, pss, 1)) <= 1e-10);
    CHECK(rel(xi_scalar(2, 0, 2, 1, s.fs, pss), normalized(dense.xi(2, 0, 1), 2, pss, 1)) <= 1e-10);
    const Solved& v = vdp_asym();
    const DenseOperators dv{v.fs};
    CHECK(rel(pi_scalar(1, 0, 0, 1, v.fs, v.pss), normalized(dv.pi(1, 0, 1), 0, v.pss, 1)) <= 1e-10);
    CHECK(rel(psi_scalar(0, 1, v.fs, v.pss), normalized(dv.psi(1), 0, v.pss, 1)) <= 1e-10);
}

TEST_CASE("stored tables match the scalar entry points") {
    const Solved& s = ilo_asym();
    for (const auto& node : s.ops.nodes) {
        const int nf = s.fs.nf;
        for (int rho : {-nf, -3, 0, 1, nf}) {
            for (int l = 1; l <= s.fs.L - 1; ++l) {
                CHECK(rel(node.xi(l - 1, nf + rho), xi_scalar(l, rho, node.q, node.nu, s.fs, s.pss)) <= 1e-12);
            }
            for (int l = 1; l <= s.fs.L - s.fs.k; ++l) {
                CHECK(rel(node.pi(l - 1, nf + rho), pi_scalar(l, rho, node.q, node.nu, s.fs, s.pss)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("operator index contracts") {
    const Solved& s = vdp_asym();
    CHECK_THROWS_AS((void)theta_scalar(1, 0, 0, 1, s.fs, s.pss), Error);
    CHECK_THROWS_AS((void)pi_scalar(2, 0, 0, 1, s.fs, s.pss), Error);
    CHECK_THROWS_AS((void)xi_scalar(0, 0, 0, 1, s.fs, s.pss), Error);
}

TEST_CASE("an exponent on a harmonic line triggers the resonance guard") {
    FloquetSet fs = vdp_asym().fs;
    fs.mu[1] = cplx(0.0, fs.omega0);
    try {
        (void)psi_scalar(0, 1, fs, vdp_asym().pss);
        FAIL("expected a resonant denominator");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::resonant_denominator);
    }
}

TEST_CASE("all-zero lambda tables give zero operators") {
    FloquetSet fs = ilo_asym().fs;
    for (auto& l : fs.Lambda) l.setZero();
    const auto ops = build_noise_operators(fs, ilo_asym().pss, {{"v2", 2, 1}});
    const auto& node = ops.nodes[0];
    CHECK(ops.c == 0.0);
    CHECK(node.omega == cplx(0.0, 0.0));
    CHECK(node.psi == cplx(0.0, 0.0));
    CHECK(node.theta.norm() == 0.0);
    CHECK(node.pi.norm() == 0.0);
    CHECK(node.xi.norm() == 0.0);
}

TEST_CASE("c does not depend on the observed node") {
    const Solved& s = ilo_asym();
    const auto a = build_noise_operators(s.fs, s.pss, {{"v1", 0, 1}});
    const auto b = build_noise_operators(s.fs, s.pss, {{"v2", 2, 1}});
    CHECK(a.c == b.c);
}

TEST_CASE("serial and OpenMP operator assembly agree exactly") {
    const Solved& s = ilo_asym();
    const std::vector<NodeRequest> req{{"v1", 0, 1}, {"v2", 2, 1}};
    const auto a = build_noise_operators(s.fs, s.pss, req, Exec::parallel);
    const auto b = ref::build_noise_operators(s.fs, s.pss, req);
    for (std::size_t i = 0; i < req.size(); ++i) {
        CHECK(a.nodes[i].omega == b.nodes[i].omega);
        CHECK((a.nodes[i].theta - b.nodes[i].theta).norm() == 0.0);
        CHECK((a.nodes[i].pi - b.nodes[i].pi).norm() == 0.0);
        CHECK((a.nodes[i].xi - b.nodes[i].xi).norm() == 0.0);
    }
}

TEST_CASE("operators converge when the harmonic truncation is doubled") {
    for (double g2 : {0.0, 0.1}) {
        const Solved a = vdp(1.0, 1e-4, 16, g2);
        const Solved b = vdp(1.0, 1e-4, 32, g2);
        const auto& na = a.ops.nodes[0];
        const auto& nb = b.ops.nodes[0];
        CHECK(rel(a.ops.c, b.ops.c) < 0.01);
        CHECK(std::abs(na.psi - nb.psi) <= 0.01 * std::max(std::abs(nb.psi), 1e-300));
        for (int l = 0; l < na.pi.rows(); ++l) CHECK(table_rel_change(na.pi.row(l), nb.pi.row(l), 16, 32) < 0.01);
        for (int l = 0; l < na.xi.rows(); ++l) CHECK(table_rel_change(na.xi.row(l), nb.xi.row(l), 16, 32) < 0.01);
    }
    const Solved a = ilo(0.02, 1e-6, 1e-4, 1.0, 16, 0.1);
    const Solved b = ilo(0.02, 1e-6, 1e-4, 1.0, 32, 0.1);
    for (std::size_t n = 0; n < a.ops.nodes.size(); ++n) {
        const auto& na = a.ops.nodes[n];
        const auto& nb = b.ops.nodes[n];
        CHECK(rel(na.omega, nb.omega) < 0.01);
        CHECK(rel(na.psi, nb.psi) < 0.01);
        for (int l = 0; l < na.theta.rows(); ++l) CHECK(table_rel_change(na.theta.row(l), nb.theta.row(l), 16, 32) < 0.01);
        for (int l = 0; l < na.pi.rows(); ++l) CHECK(table_rel_change(na.pi.row(l), nb.pi.row(l), 16, 32) < 0.01);
        for (int l = 0; l < na.xi.rows(); ++l) CHECK(table_rel_change(na.xi.row(l), nb.xi.row(l), 16, 32) < 0.01);
    }
}

TEST_CASE("every stored operator is finite") {
    for (const Solved* s : {&ilo_asym(), &vdp_asym()}) {
        for (const auto& node : s->ops.nodes) {
            CHECK(std::isfinite(std::abs(node.omega)));
            CHECK(std::isfinite(std::abs(node.psi)));
            CHECK(node.theta.allFinite());
            CHECK(node.pi.allFinite());
            CHECK(node.xi.allFinite());
        }
    }
}
