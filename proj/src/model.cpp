#include "coscpmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "coscpmm/error.hpp"

namespace coscpmm {

CircuitModel::CircuitModel(std::string name, int n, int p, ModelFunctions fns,
                           std::vector<std::string> node_names)
    : name_(std::move(name)), n_(n), p_(p), fns_(std::move(fns)), nodes_(std::move(node_names)) {
    if (n_ < 1 || p_ < 0) {
        throw Error(ErrorKind::model_definition, "model '" + name_ + "' needs n >= 1 and p >= 0");
    }
    if (!fns_.q || !fns_.i || !fns_.s || !fns_.b || !fns_.c_jac || !fns_.g_jac) {
        throw Error(ErrorKind::model_definition, "model '" + name_ + "' has an unset callback");
    }
    if (static_cast<int>(nodes_.size()) != n_) {
        throw Error(ErrorKind::model_definition,
                    "model '" + name_ + "' declares " + std::to_string(n_) + " states but " +
                        std::to_string(nodes_.size()) + " node names");
    }
    std::set<std::string> seen;
    for (const auto& nd : nodes_) {
        if (!seen.insert(nd).second) {
            throw Error(ErrorKind::model_definition, "duplicate node name '" + nd + "'");
        }
    }
    const Vec s0 = s(0.0);
    for (double t : {1e-12, 1e-9, 1e-3, 1.0, 123.4}) {
        if ((s(t) - s0).lpNorm<Eigen::Infinity>() != 0.0) {
            autonomous_ = false;
            break;
        }
    }
}

std::optional<int> CircuitModel::node_index(std::string_view name) const {
    const auto it = std::find(nodes_.begin(), nodes_.end(), name);
    if (it == nodes_.end()) return std::nullopt;
    return static_cast<int>(it - nodes_.begin());
}

void CircuitModel::check_state(const Vec& x) const {
    if (x.size() != n_) {
        throw Error(ErrorKind::model_definition, "state has length " + std::to_string(x.size()) +
                                                     ", model '" + name_ + "' expects " +
                                                     std::to_string(n_));
    }
}

void CircuitModel::check_vec(const Vec& v, std::string_view what) const {
    if (v.size() != n_) {
        throw Error(ErrorKind::model_definition, std::string(what) + " returned length " +
                                                     std::to_string(v.size()) + ", expected " +
                                                     std::to_string(n_));
    }
}

Vec CircuitModel::q(const Vec& x) const {
    check_state(x);
    Vec out = fns_.q(x);
    check_vec(out, "q");
    return out;
}

Vec CircuitModel::i(const Vec& x) const {
    check_state(x);
    Vec out = fns_.i(x);
    check_vec(out, "i");
    return out;
}

Vec CircuitModel::s(double t) const {
    Vec out = fns_.s(t);
    check_vec(out, "s");
    return out;
}

Mat CircuitModel::b(const Vec& x) const {
    check_state(x);
    Mat out = fns_.b(x);
    if (out.rows() != n_ || out.cols() != p_) {
        throw Error(ErrorKind::model_definition, "B has shape " + std::to_string(out.rows()) + "x" +
                                                     std::to_string(out.cols()) + ", expected " +
                                                     std::to_string(n_) + "x" + std::to_string(p_));
    }
    return out;
}

Mat CircuitModel::c(const Vec& x) const {
    check_state(x);
    Mat out = fns_.c_jac(x);
    if (out.rows() != n_ || out.cols() != n_) {
        throw Error(ErrorKind::model_definition, "C Jacobian has wrong shape");
    }
    return out;
}

Mat CircuitModel::g(const Vec& x) const {
    check_state(x);
    Mat out = fns_.g_jac(x);
    if (out.rows() != n_ || out.cols() != n_) {
        throw Error(ErrorKind::model_definition, "G Jacobian has wrong shape");
    }
    return out;
}

Vec CircuitModel::rhs(const Vec& x, double t) const {
    const Mat cm = c(x);
    Eigen::FullPivLU<Mat> lu(cm);
    if (!lu.isInvertible()) {
        throw Error(ErrorKind::rank_deficiency, "C(x) is singular; the state derivative is undefined");
    }
    return lu.solve(-(i(x) + s(t)));
}

void EnsembleMeta::validate(const CircuitModel& model) const {
    if (k < 1 || k > model.n()) {
        throw Error(ErrorKind::configuration,
                    "ensemble count k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(model.n()) + "]");
    }
    if (nu < 1) {
        throw Error(ErrorKind::configuration, "harmonic index must be >= 1");
    }
    for (const auto& nd : observation_nodes) {
        if (!model.node_index(nd)) {
            std::ostringstream os;
            os << "unknown node '" << nd << "'; available:";
            for (const auto& a : model.node_names()) os << ' ' << a;
            throw Error(ErrorKind::configuration, os.str());
        }
    }
}

Vec eval_residual(const CircuitModel& model, const Vec& x, double t) {
    return model.i(x) + model.s(t);
}

Jacobians eval_jacobians(const CircuitModel& model, const Vec& x) {
    Jacobians jac{model.c(x), model.g(x)};
    for (int r = 0; r < model.n(); ++r) {
        if (!jac.C.row(r).allFinite() || !jac.G.row(r).allFinite()) {
            throw Error(ErrorKind::evaluation, "non-finite Jacobian entry in row " + std::to_string(r) +
                                                   " (node '" + model.node_names()[r] + "')");
        }
    }
    return jac;
}

// ---------------------------------------------------------------------------

VdpParams VdpParams::normalized(double eps, double noise_psd) {
    VdpParams p;
    p.L = 1.0;
    p.C = 1.0;
    p.G0 = 0.0;
    p.g1 = eps;
    p.g3 = eps / 3.0;
    p.noise_psd = noise_psd;
    return p;
}

VdpParams VdpParams::uhf(double noise_psd) {
    VdpParams p;
    p.C = 10e-12;
    const double w = kTwoPi * 0.9e9;
    p.L = 1.0 / (w * w * p.C);
    p.G0 = 1e-3;
    const double eps = 0.2;
    p.g1 = p.G0 + eps / std::sqrt(p.L / p.C);
    p.g3 = 4.0 * (p.g1 - p.G0) / 3.0;  // ~1 V amplitude
    p.noise_psd = noise_psd;
    return p;
}

double VdpParams::omega_lc() const { return 1.0 / std::sqrt(L * C); }

double VdpParams::amplitude_estimate() const {
    return 2.0 * std::sqrt(std::max(g1 - G0, 0.0) / (3.0 * g3));
}

namespace {

void check_unit(const VdpParams& u) {
    if (!(u.L > 0.0) || !(u.C > 0.0)) {
        throw Error(ErrorKind::parameter, "VDP tank needs L > 0 and C > 0");
    }
    if (!(u.g3 > 0.0) || !(u.g1 > u.G0)) {
        throw Error(ErrorKind::parameter, "VDP nonlinearity needs g3 > 0 and g1 > G0 to oscillate");
    }
    if (!(u.noise_psd >= 0.0)) {
        throw Error(ErrorKind::parameter, "noise power must be non-negative");
    }
}

struct Coupling {
    // G-stamps applied to tank-voltage rows/cols: rows (r, c, value)
    std::vector<std::tuple<int, int, double>> stamps;
};

CircuitModel assemble(std::string name, const std::vector<VdpParams>& units, Coupling coupling,
                      std::vector<std::string> nodes) {
    const int k = static_cast<int>(units.size());
    const int n = 2 * k;
    ModelFunctions f;
    f.q = [units, k](const Vec& x) {
        Vec q(2 * k);
        for (int u = 0; u < k; ++u) {
            q[2 * u] = units[u].C * x[2 * u];
            q[2 * u + 1] = units[u].L * x[2 * u + 1];
        }
        return q;
    };
    f.c_jac = [units, k](const Vec&) {
        Mat c = Mat::Zero(2 * k, 2 * k);
        for (int u = 0; u < k; ++u) {
            c(2 * u, 2 * u) = units[u].C;
            c(2 * u + 1, 2 * u + 1) = units[u].L;
        }
        return c;
    };
    f.i = [units, k, coupling](const Vec& x) {
        Vec i(2 * k);
        for (int u = 0; u < k; ++u) {
            const double v = x[2 * u];
            const auto& p = units[u];
            i[2 * u] = (p.G0 - p.g1) * v + p.g2 * v * v + p.g3 * v * v * v + x[2 * u + 1];
            i[2 * u + 1] = -v;
        }
        for (const auto& [r, c, val] : coupling.stamps) i[r] += val * x[c];
        return i;
    };
    f.g_jac = [units, k, coupling](const Vec& x) {
        Mat g = Mat::Zero(2 * k, 2 * k);
        for (int u = 0; u < k; ++u) {
            const double v = x[2 * u];
            const auto& p = units[u];
            g(2 * u, 2 * u) = (p.G0 - p.g1) + 2.0 * p.g2 * v + 3.0 * p.g3 * v * v;
            g(2 * u, 2 * u + 1) = 1.0;
            g(2 * u + 1, 2 * u) = -1.0;
        }
        for (const auto& [r, c, val] : coupling.stamps) g(r, c) += val;
        return g;
    };
    f.s = [n](double) { return Vec::Zero(n); };
    f.b = [units, k](const Vec&) {
        Mat b = Mat::Zero(2 * k, k);
        for (int u = 0; u < k; ++u) b(2 * u, u) = std::sqrt(units[u].noise_psd);
        return b;
    };
    return CircuitModel(std::move(name), n, k, std::move(f), std::move(nodes));
}

}  // namespace

CircuitModel builtin_vdp(const VdpParams& params) {
    check_unit(params);
    return assemble("vdp", {params}, {}, {"v", "iL"});
}

std::pair<CircuitModel, EnsembleMeta> builtin_coupled_ensemble(const std::vector<VdpParams>& units,
                                                              const CouplingSpec& coupling) {
    const int k = static_cast<int>(units.size());
    if (k < 2) {
        throw Error(ErrorKind::configuration, "a coupled ensemble needs at least two units");
    }
    for (const auto& u : units) check_unit(u);

    Coupling stamps;
    std::string name;
    if (coupling.kind == CouplingKind::unilateral) {
        if (k != 2) {
            throw Error(ErrorKind::configuration,
                        "unilateral coupling joins exactly one primary and one secondary unit, got " +
                            std::to_string(k));
        }
        if (!(coupling.gm >= 0.0)) {
            throw Error(ErrorKind::parameter, "buffer transconductance must be >= 0");
        }
        // Buffer output current gm * v_primary flows into the secondary tank node.
        if (coupling.gm != 0.0) stamps.stamps.emplace_back(2, 0, -coupling.gm);
        name = "ilo2";
    } else {
        if (k < 3) {
            throw Error(ErrorKind::configuration, "ring coupling needs at least three units, got " +
                                                      std::to_string(k));
        }
        if (!(coupling.rc > 0.0)) {
            throw Error(ErrorKind::parameter, "ring coupling resistance must be > 0");
        }
        const double gc = 1.0 / coupling.rc;
        for (int a = 0; a < k; ++a) {
            const int b = (a + 1) % k;
            stamps.stamps.emplace_back(2 * a, 2 * a, gc);
            stamps.stamps.emplace_back(2 * a, 2 * b, -gc);
            stamps.stamps.emplace_back(2 * b, 2 * b, gc);
            stamps.stamps.emplace_back(2 * b, 2 * a, -gc);
        }
        name = "ring" + std::to_string(k);
    }

    std::vector<std::string> nodes;
    for (int u = 1; u <= k; ++u) {
        nodes.push_back("v" + std::to_string(u));
        nodes.push_back("iL" + std::to_string(u));
    }
    EnsembleMeta meta;
    meta.k = k;
    meta.observation_nodes = {"v1", "v2"};
    meta.nu = 1;
    return {assemble(std::move(name), units, std::move(stamps), std::move(nodes)), std::move(meta)};
}

PssGuess vdp_guess(const std::vector<VdpParams>& units) {
    PssGuess g;
    g.x0 = Vec::Zero(2 * static_cast<int>(units.size()));
    double w = 0.0;
    for (std::size_t u = 0; u < units.size(); ++u) {
        g.x0[2 * static_cast<int>(u)] = units[u].amplitude_estimate();
        w += units[u].omega_lc();
    }
    w /= static_cast<double>(units.size());
    g.T0 = kTwoPi / w;
    return g;
}

}  // namespace coscpmm
