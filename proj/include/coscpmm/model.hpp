#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coscpmm/types.hpp"

namespace coscpmm {

/// Closed-form callbacks of the MNA system  d/dt q(x) + i(x) + s(t) + B(x) xi(t) = 0,
/// where xi holds p unit-power white-noise sources.
struct ModelFunctions {
    std::function<Vec(const Vec&)> q;       // reactive contributions
    std::function<Vec(const Vec&)> i;       // resistive contributions
    std::function<Vec(double)> s;           // independent sources
    std::function<Mat(const Vec&)> b;       // n x p noise modulation
    std::function<Mat(const Vec&)> c_jac;   // dq/dx
    std::function<Mat(const Vec&)> g_jac;   // di/dx
};

/// Immutable circuit model. All evaluation methods are const and reentrant, so
/// a model may be shared between threads.
class CircuitModel {
public:
    CircuitModel(std::string name, int n, int p, ModelFunctions fns,
                 std::vector<std::string> node_names);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] int p() const noexcept { return p_; }
    [[nodiscard]] const std::vector<std::string>& node_names() const noexcept { return nodes_; }

    /// Index of a node, or nullopt when the name is unknown.
    [[nodiscard]] std::optional<int> node_index(std::string_view name) const;

    // Raw callbacks with dimension checks.
    [[nodiscard]] Vec q(const Vec& x) const;
    [[nodiscard]] Vec i(const Vec& x) const;
    [[nodiscard]] Vec s(double t) const;
    [[nodiscard]] Mat b(const Vec& x) const;
    [[nodiscard]] Mat c(const Vec& x) const;
    [[nodiscard]] Mat g(const Vec& x) const;

    /// State derivative of the noiseless system, C(x)^{-1} (-i(x) - s(t)).
    [[nodiscard]] Vec rhs(const Vec& x, double t) const;

    /// True when s(t) does not depend on t (checked by sampling at model build).
    [[nodiscard]] bool autonomous() const noexcept { return autonomous_; }

private:
    void check_vec(const Vec& v, std::string_view what) const;
    void check_state(const Vec& x) const;

    std::string name_;
    int n_;
    int p_;
    ModelFunctions fns_;
    std::vector<std::string> nodes_;
    bool autonomous_ = true;
};

using ModelPtr = std::shared_ptr<const CircuitModel>;

struct EnsembleMeta {
    int k = 1;
    std::vector<std::string> observation_nodes;
    int nu = 1;

    /// Throws configuration errors if k or the nodes are inconsistent with the model.
    void validate(const CircuitModel& model) const;
};

/// i(x) + s(t); noise excluded.
[[nodiscard]] Vec eval_residual(const CircuitModel& model, const Vec& x, double t);

struct Jacobians {
    Mat C;
    Mat G;
};

[[nodiscard]] Jacobians eval_jacobians(const CircuitModel& model, const Vec& x);

// ---------------------------------------------------------------------------
// Built-in Van der Pol tank oscillators.
//
// One unit is a parallel L-C tank with loss G0 and a cubic negative
// conductance i_nl(v) = -g1 v + g2 v^2 + g3 v^3 at the tank node; states are the tank
// voltage and the inductor current. A white current-noise source of power
// noise_psd (B = sqrt(noise_psd)) drives the tank node.
// ---------------------------------------------------------------------------
struct VdpParams {
    double L = 1.0;
    double C = 1.0;
    double G0 = 0.0;
    double g1 = 0.1;
    double g2 = 0.0;   // even-order term; breaks the half-wave symmetry when nonzero
    double g3 = 0.1 / 3.0;
    double noise_psd = 0.0;

    /// L = C = 1, v'' - eps (1 - v^2) v' + v = 0, limit-cycle amplitude ~ 2.
    static VdpParams normalized(double eps, double noise_psd = 0.0);
    /// A ~900 MHz unit (C = 10 pF, L ~ 3.13 nH, ~1 V amplitude). Repository
    /// constants, not measured component values.
    static VdpParams uhf(double noise_psd = 0.0);

    /// Small-signal angular frequency 1/sqrt(LC).
    [[nodiscard]] double omega_lc() const;
    /// Cubic-law amplitude estimate 2 sqrt((g1 - G0) / (3 g3)).
    [[nodiscard]] double amplitude_estimate() const;
};

[[nodiscard]] CircuitModel builtin_vdp(const VdpParams& params);

enum class CouplingKind { unilateral, bilateral_ring };

struct CouplingSpec {
    CouplingKind kind = CouplingKind::unilateral;
    double gm = 0.0;   // unilateral buffer transconductance (S)
    double rc = 0.0;   // ring coupling resistance (Ohm)
};

/// Block-assembled ensemble of VDP units. Unilateral coupling requires exactly
/// two units (primary, secondary) and injects gm * v_primary into the secondary
/// tank; bilateral ring coupling joins neighbouring tank nodes through rc.
[[nodiscard]] std::pair<CircuitModel, EnsembleMeta> builtin_coupled_ensemble(
    const std::vector<VdpParams>& units, const CouplingSpec& coupling);

/// Initial shooting guess (tank voltage at the estimated amplitude, zero
/// inductor current) and the small-signal period.
struct PssGuess {
    Vec x0;
    double T0 = 0.0;
};

[[nodiscard]] PssGuess vdp_guess(const std::vector<VdpParams>& units);

}  // namespace coscpmm
