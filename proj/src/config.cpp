#include "coscpmm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "coscpmm/error.hpp"

namespace coscpmm {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw Error(ErrorKind::configuration, "key '" + key + "': '" + v + "' is not a number");
    }
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    int base = 10;
    const char* begin = v.data();
    if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
        base = 16;
        begin += 2;
    }
    const auto res = std::from_chars(begin, end, out, base);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw Error(ErrorKind::configuration, "key '" + key + "': '" + v + "' is not an integer");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(ErrorKind::configuration, "key '" + key + "': '" + v + "' is not a boolean");
}

const std::set<std::string>& unit_fields() {
    static const std::set<std::string> f{"L", "C", "G0", "g1", "g2", "g3", "noise"};
    return f;
}

}  // namespace

int ModelSpec::units() const {
    if (name == "vdp") return 1;
    if (name == "ilo2") return 2;
    if (name.rfind("ring", 0) == 0 && name.size() > 4) {
        const std::string digits = name.substr(4);
        if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            return std::stoi(digits);
        }
    }
    throw Error(ErrorKind::configuration, "unknown model '" + name + "' (available: vdp, ilo2, ringN)");
}

std::vector<VdpParams> ModelSpec::unit_params() const {
    const int count = units();
    std::vector<VdpParams> out;
    for (int u = 1; u <= count; ++u) {
        VdpParams p;
        if (preset == "normalized") {
            p = VdpParams::normalized(eps, noise);
        } else if (preset == "uhf") {
            p = VdpParams::uhf(noise);
        } else {
            throw Error(ErrorKind::configuration, "unknown preset '" + preset + "' (normalized, uhf)");
        }
        // Ring units are detuned slightly so the ensemble multipliers stay simple.
        if (name.rfind("ring", 0) == 0) p.C *= 1.0 + 0.01 * ((u % 3) - 1);
        if (const auto it = unit_overrides.find(u); it != unit_overrides.end()) {
            for (const auto& [field, value] : it->second) {
                if (field == "L") p.L = value;
                else if (field == "C") p.C = value;
                else if (field == "G0") p.G0 = value;
                else if (field == "g1") p.g1 = value;
                else if (field == "g2") p.g2 = value;
                else if (field == "g3") p.g3 = value;
                else if (field == "noise") p.noise_psd = value;
            }
        }
        out.push_back(p);
    }
    for (const auto& [u, fields] : unit_overrides) {
        if (u < 1 || u > count) {
            throw Error(ErrorKind::configuration, "override for unit " + std::to_string(u) + " but model '" +
                                                      name + "' has " + std::to_string(count) + " unit(s)");
        }
    }
    return out;
}

BuiltModel build_model(const ModelSpec& spec) {
    const std::vector<VdpParams> units = spec.unit_params();
    if (spec.name == "vdp") {
        EnsembleMeta meta;
        meta.k = 1;
        meta.observation_nodes = {"v"};
        return {builtin_vdp(units.front()), meta, vdp_guess(units)};
    }
    CouplingSpec cs;
    if (spec.name == "ilo2") {
        cs.kind = CouplingKind::unilateral;
        cs.gm = spec.gm;
    } else {
        cs.kind = CouplingKind::bilateral_ring;
        cs.rc = spec.rc;
    }
    auto [model, meta] = builtin_coupled_ensemble(units, cs);
    return {std::move(model), std::move(meta), vdp_guess(units)};
}

void SimulationConfig::validate(const CircuitModel& model) const {
    if (nf < 16) {
        throw Error(ErrorKind::configuration,
                    "nf = " + std::to_string(nf) + " is too small: at least 16 harmonics are required");
    }
    if (pss.M < 4 * nf) {
        throw Error(ErrorKind::aliasing, "pss.M must be at least 4 nf");
    }
    sweep.validate();
    if (noise_nodes.empty()) throw Error(ErrorKind::configuration, "noise_nodes must not be empty");
    EnsembleMeta meta;
    meta.k = k;
    meta.observation_nodes = noise_nodes;
    meta.nu = nu_list.empty() ? 1 : nu_list.front();
    meta.validate(model);
    if (nu_list.empty()) throw Error(ErrorKind::configuration, "nu list must not be empty");
    for (int nu : nu_list) {
        if (nu < 1 || nu > nf) {
            throw Error(ErrorKind::configuration, "harmonic index nu must lie in [1, nf]");
        }
    }
    if (x0 && x0->size() != model.n()) {
        throw Error(ErrorKind::configuration, "pss.x0 must have " + std::to_string(model.n()) + " entries");
    }
    if (T0_guess && !(*T0_guess > 0.0)) throw Error(ErrorKind::configuration, "pss.T0_guess must be > 0");
}

SimulationConfig parse_config_text(const std::string& text) {
    SimulationConfig cfg;
    std::optional<int> k_set;
    bool nodes_set = false;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) {
            throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": empty key or value");
        }
        if (!seen.insert(key).second) {
            throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }

        if (key == "model") cfg.model.name = val;
        else if (key == "preset") cfg.model.preset = val;
        else if (key == "eps") cfg.model.eps = to_double(key, val);
        else if (key == "noise") cfg.model.noise = to_double(key, val);
        else if (key == "gm") cfg.model.gm = to_double(key, val);
        else if (key == "rc") cfg.model.rc = to_double(key, val);
        else if (key == "k") k_set = static_cast<int>(to_int(key, val));
        else if (key == "noise_nodes") {
            cfg.noise_nodes = split_list(val);
            nodes_set = true;
        } else if (key == "nu") {
            cfg.nu_list.clear();
            for (const auto& s : split_list(val)) cfg.nu_list.push_back(static_cast<int>(to_int(key, s)));
        } else if (key == "nf") cfg.nf = static_cast<int>(to_int(key, val));
        else if (key == "sweep.start") cfg.sweep.start = to_double(key, val);
        else if (key == "sweep.stop") cfg.sweep.stop = to_double(key, val);
        else if (key == "sweep.points") cfg.sweep.n_points = static_cast<int>(to_int(key, val));
        else if (key == "sweep.kind") {
            if (val == "lin") cfg.sweep.kind = SweepKind::lin;
            else if (val == "log") cfg.sweep.kind = SweepKind::log;
            else throw Error(ErrorKind::configuration, "sweep.kind must be lin or log");
        } else if (key == "pss.M") cfg.pss.M = static_cast<int>(to_int(key, val));
        else if (key == "pss.tol") cfg.pss.tol = to_double(key, val);
        else if (key == "pss.max_iter") cfg.pss.max_iter = static_cast<int>(to_int(key, val));
        else if (key == "pss.warmup") cfg.pss.warmup_periods = static_cast<int>(to_int(key, val));
        else if (key == "pss.T0_guess") cfg.T0_guess = to_double(key, val);
        else if (key == "pss.x0") {
            const auto items = split_list(val);
            Vec x(static_cast<Eigen::Index>(items.size()));
            for (std::size_t i = 0; i < items.size(); ++i) x[static_cast<Eigen::Index>(i)] = to_double(key, items[i]);
            cfg.x0 = x;
        } else if (key == "mc.enabled") cfg.mc_enabled = to_bool(key, val);
        else if (key == "mc.paths") cfg.mc.n_paths = static_cast<int>(to_int(key, val));
        else if (key == "mc.dt") cfg.mc.dt = to_double(key, val);
        else if (key == "mc.duration") cfg.mc.duration = to_double(key, val);
        else if (key == "mc.seed") cfg.mc.seed = static_cast<std::uint64_t>(to_int(key, val));
        else if (key == "mc.window") cfg.mc.window = static_cast<int>(to_int(key, val));
        else if (key == "mc.decimate") cfg.mc.decimate = static_cast<int>(to_int(key, val));
        else if (key == "output_dir") cfg.output_dir = val;
        else if (key == "plot") cfg.plot = to_bool(key, val);
        else if (key.rfind("unit", 0) == 0 && key.find('.') != std::string::npos) {
            const auto dot = key.find('.');
            const std::string idx = key.substr(4, dot - 4);
            const std::string field = key.substr(dot + 1);
            if (idx.empty() || !unit_fields().count(field)) {
                throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            }
            cfg.model.unit_overrides[static_cast<int>(to_int(key, idx))][field] = to_double(key, val);
        } else {
            throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }

    const BuiltModel built = build_model(cfg.model);
    cfg.k = k_set.value_or(built.meta.k);
    if (cfg.k != built.meta.k) {
        throw Error(ErrorKind::configuration, "k = " + std::to_string(cfg.k) + " but model '" + cfg.model.name +
                                                  "' has " + std::to_string(built.meta.k) + " oscillator unit(s)");
    }
    if (!nodes_set) cfg.noise_nodes = built.meta.observation_nodes;
    cfg.pss.nf = cfg.nf;
    cfg.validate(built.model);
    return cfg;
}

SimulationConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace coscpmm
