#include "coscpmm/spectra.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "coscpmm/error.hpp"

namespace coscpmm {

void SweepSpec::validate() const {
    if (!(start > 0.0) || !std::isfinite(start)) {
        throw Error(ErrorKind::configuration, "sweep start must be a positive offset frequency");
    }
    if (!(stop > start) || !std::isfinite(stop)) {
        throw Error(ErrorKind::configuration, "sweep range invalid: stop must exceed start");
    }
    if (kind == SweepKind::lin && n_points < 10) {
        throw Error(ErrorKind::configuration, "linear sweep needs at least 10 points");
    }
    if (kind == SweepKind::log && n_points < 3) {
        throw Error(ErrorKind::configuration, "log sweep needs at least 3 points per decade");
    }
}

std::vector<double> generate_sweep(const SweepSpec& spec) {
    spec.validate();
    std::vector<double> f;
    if (spec.kind == SweepKind::lin) {
        f.resize(static_cast<std::size_t>(spec.n_points));
        const double step = (spec.stop - spec.start) / (spec.n_points - 1);
        for (int i = 0; i < spec.n_points; ++i) f[i] = spec.start + i * step;
        f.back() = spec.stop;
        return f;
    }
    const double steps = std::log10(spec.stop / spec.start) * spec.n_points;
    const int whole = static_cast<int>(std::floor(steps + 1e-9));
    for (int i = 0; i <= whole; ++i) {
        f.push_back(spec.start * std::pow(10.0, static_cast<double>(i) / spec.n_points));
    }
    if (steps - whole > 1e-9) {
        f.push_back(spec.stop);
    } else {
        f.back() = spec.stop;
    }
    return f;
}

namespace {

// 2 (W a + T b) / (a^2 + b^2) with a = |Re mu| + 0.5 w0^2 rho^2 c, b = w_m + Im mu.
double mode_kernel(cplx z, cplx mu, int rho, double omega_m, double w0sq_c) {
    const double a = std::abs(mu.real()) + 0.5 * w0sq_c * rho * rho;
    const double b = omega_m + mu.imag();
    const double num = z.real() * 2.0 * a + 2.0 * z.imag() * b;
    if (num == 0.0) return 0.0;
    return num / (a * a + b * b);
}

double lorentz_den(double omega_m, double w0sq_c, int nu) {
    const double h = 0.5 * w0sq_c * nu * nu;
    return h * h + omega_m * omega_m;
}

double ratio(double num, double den) { return num == 0.0 ? 0.0 : num / den; }

double table_sum(const CMat& table, int first_mode, double omega_m, const NoiseOperators& ops) {
    const double w0sq_c = ops.omega0 * ops.omega0 * ops.c;
    double acc = 0.0;
    for (Eigen::Index l = 0; l < table.rows(); ++l) {
        const cplx mu = ops.mu[static_cast<std::size_t>(first_mode - 1 + l)];
        for (int col = 0; col < table.cols(); ++col) {
            acc += mode_kernel(table(l, col), mu, col - ops.nf, omega_m, w0sq_c);
        }
    }
    return acc;
}

}  // namespace

double pnoise_at(double omega_m, const NodeOperators& node, const NoiseOperators& ops) {
    const double w0sq_c = ops.omega0 * ops.omega0 * ops.c;
    const double nu2 = static_cast<double>(node.nu) * node.nu;
    const double lead = ratio((1.0 - node.omega.real()) * w0sq_c * nu2 - 2.0 * node.omega.imag() * omega_m,
                              lorentz_den(omega_m, w0sq_c, node.nu));
    // theta row l-1 pairs with mode l+1
    return lead + table_sum(node.theta, 2, omega_m, ops);
}

double anoise_at(double omega_m, const NodeOperators& node, const NoiseOperators& ops) {
    // pi row l-1 pairs with mode l+k
    return table_sum(node.pi, ops.k + 1, omega_m, ops);
}

double xnoise_at(double omega_m, const NodeOperators& node, const NoiseOperators& ops) {
    const double w0sq_c = ops.omega0 * ops.omega0 * ops.c;
    const double nu2 = static_cast<double>(node.nu) * node.nu;
    const double lead = -ratio(node.psi.real() * w0sq_c * nu2 + 2.0 * node.psi.imag() * omega_m,
                               lorentz_den(omega_m, w0sq_c, node.nu));
    return lead + table_sum(node.xi, 2, omega_m, ops);
}

ReducedSpectra reduced_single_osc(double omega_m, double c, double omega0, int nu, const NodeOperators& node,
                                  const std::vector<cplx>& mu) {
    if (node.theta.rows() != 0) {
        throw Error(ErrorKind::contract, "single-oscillator reduction requires k = 1");
    }
    const int L = static_cast<int>(mu.size());
    if (node.pi.rows() != L - 1 || node.xi.rows() != L - 1) {
        throw Error(ErrorKind::contract, "operator tables do not match the mode count");
    }
    const int nf = static_cast<int>(node.pi.cols() - 1) / 2;
    const double D = omega0 * omega0 * static_cast<double>(nu) * nu * c;
    const double den = 0.25 * D * D + omega_m * omega_m;

    ReducedSpectra out;
    out.pnoise = D == 0.0 ? 0.0 : D / den;

    double amp = 0.0;
    double cross = 0.0;
    for (int l = 1; l <= L - 1; ++l) {
        const double mr = std::abs(mu[static_cast<std::size_t>(l)].real());
        const double mi = mu[static_cast<std::size_t>(l)].imag();
        for (int rho = -nf; rho <= nf; ++rho) {
            const double r2c = omega0 * omega0 * rho * rho * c;
            const double dd = (mr + 0.5 * r2c) * (mr + 0.5 * r2c) + (omega_m + mi) * (omega_m + mi);
            const cplx w = node.pi(l - 1, nf + rho);
            const cplx e = node.xi(l - 1, nf + rho);
            const double na = w.real() * (2.0 * mr + r2c) + 2.0 * w.imag() * (omega_m + mi);
            const double nx = e.real() * (2.0 * mr + r2c) + 2.0 * e.imag() * (omega_m + mi);
            if (na != 0.0) amp += na / dd;
            if (nx != 0.0) cross += nx / dd;
        }
    }
    out.anoise = amp;
    const double nlead = node.psi.real() * D + 2.0 * node.psi.imag() * omega_m;
    out.xnoise = (nlead == 0.0 ? 0.0 : -nlead / den) + cross;
    return out;
}

ReducedSpectra reduced_single_osc(double omega_m, const NodeOperators& node, const NoiseOperators& ops) {
    if (ops.k != 1) throw Error(ErrorKind::contract, "single-oscillator reduction requires k = 1");
    return reduced_single_osc(omega_m, ops.c, ops.omega0, node.nu, node, ops.mu);
}

bool SpectrumDataset::has_anoise() const {
    for (double v : anoise) {
        if (v != 0.0) return true;
    }
    return false;
}

double to_db(double linear) {
    if (!(linear > 0.0)) return kDbFloor;
    return std::max(10.0 * std::log10(linear), kDbFloor);
}

namespace {

std::vector<SpectrumDataset> assemble(const NoiseOperators& ops, const std::vector<double>& freqs,
                                      bool parallel) {
    std::vector<SpectrumDataset> out;
    const int nfreq = static_cast<int>(freqs.size());
    for (const auto& node : ops.nodes) {
        SpectrumDataset ds;
        ds.node = node.node;
        ds.nu = node.nu;
        ds.freqs = freqs;
        ds.pnoise.resize(freqs.size());
        ds.anoise.resize(freqs.size());
        ds.xnoise.resize(freqs.size());
#pragma omp parallel for schedule(static) if (parallel)
        for (int i = 0; i < nfreq; ++i) {
            const double wm = kTwoPi * freqs[i];
            ds.pnoise[i] = pnoise_at(wm, node, ops);
            ds.anoise[i] = anoise_at(wm, node, ops);
            ds.xnoise[i] = xnoise_at(wm, node, ops);
        }
        for (int i = 0; i < nfreq; ++i) {
            if (!std::isfinite(ds.pnoise[i]) || !std::isfinite(ds.anoise[i]) || !std::isfinite(ds.xnoise[i])) {
                throw Error(ErrorKind::numerical, "non-finite spectrum value at node " + node.node);
            }
        }
        out.push_back(std::move(ds));
    }
    return out;
}

}  // namespace

std::vector<SpectrumDataset> assemble_datasets(const NoiseOperators& ops, const std::vector<double>& freqs,
                                               Exec exec) {
    return assemble(ops, freqs, exec == Exec::parallel);
}

namespace ref {

std::vector<SpectrumDataset> assemble_datasets(const NoiseOperators& ops, const std::vector<double>& freqs) {
    return assemble(ops, freqs, false);
}

}  // namespace ref

std::string dataset_stem(const std::string& node, int nu) {
    return nu == 1 ? node : node + ".h" + std::to_string(nu);
}

void write_spectrum_csv(std::ostream& os, const SpectrumDataset& ds) {
    os << "f_offset_hz,pnoise_dbc,anoise_dbc,xnoise_signed,xnoise_db\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ds.freqs.size(); ++i) {
        os << ds.freqs[i] << ',' << to_db(ds.pnoise[i]) << ',' << to_db(ds.anoise[i]) << ',' << ds.xnoise[i]
           << ',' << to_db(std::abs(ds.xnoise[i])) << '\n';
    }
}

void write_kind_csv(std::ostream& os, const SpectrumDataset& ds, SpectrumKind kind) {
    switch (kind) {
        case SpectrumKind::pn: os << "f_offset_hz,pnoise_dbc\n"; break;
        case SpectrumKind::an: os << "f_offset_hz,anoise_dbc\n"; break;
        case SpectrumKind::xn: os << "f_offset_hz,xnoise_signed,xnoise_db\n"; break;
    }
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ds.freqs.size(); ++i) {
        os << ds.freqs[i] << ',';
        switch (kind) {
            case SpectrumKind::pn: os << to_db(ds.pnoise[i]); break;
            case SpectrumKind::an: os << to_db(ds.anoise[i]); break;
            case SpectrumKind::xn: os << ds.xnoise[i] << ',' << to_db(std::abs(ds.xnoise[i])); break;
        }
        os << '\n';
    }
}

}  // namespace coscpmm
