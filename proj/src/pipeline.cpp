#include "coscpmm/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "coscpmm/error.hpp"
#include "coscpmm/plot.hpp"

namespace fs = std::filesystem;

namespace coscpmm {

namespace {

const char* hint_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::no_convergence: return "try a better pss.T0_guess / pss.x0 or more pss.warmup periods";
        case ErrorKind::degenerate_solution: return "the guess collapsed; check that the model oscillates";
        case ErrorKind::aliasing: return "increase pss.M or reduce nf";
        case ErrorKind::degenerate_spectrum:
            return "repeated Floquet multipliers; detune identical units or enable coupling";
        case ErrorKind::floquet_consistency: return "increase pss.M or tighten pss.tol";
        case ErrorKind::dead_node: return "observe a node that carries the requested harmonic";
        case ErrorKind::resonant_denominator: return "the mode set is degenerate for this harmonic";
        case ErrorKind::instability: return "reduce mc.dt";
        case ErrorKind::io: return "check that the output directory is writable";
        default: return "check the configuration";
    }
}

template <class F>
auto stage(const char* name, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    spdlog::debug("stage {} started", name);
    try {
        auto out = fn();
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        spdlog::info("stage {} done in {:.3f} s", name, dt);
        return out;
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("[") + name + "] " + e.what() + " (hint: " + hint_for(e.kind()) + ")");
    }
}

template <class W>
void write_file(const fs::path& path, W&& writer) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::io, "cannot create " + path.string());
    writer(os);
    os.flush();
    if (!os) throw Error(ErrorKind::io, "write failed for " + path.string());
}

fs::path make_staging(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create output directory " + out.string() + ": " + ec.message());
    std::random_device rd;
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::ostringstream name;
        name << ".staging-" << std::hex << rd();
        const fs::path p = out / name.str();
        if (fs::create_directory(p, ec)) return p;
    }
    throw Error(ErrorKind::io, "cannot create a staging directory in " + out.string());
}

std::vector<double> mc_offsets(const std::vector<double>& sweep, const oracle::McConfig& mc, double f0, int nu) {
    const double bin = 1.0 / (mc.window * mc.decimate * mc.dt);
    const double nyq = 0.5 / (mc.decimate * mc.dt);
    std::vector<double> out;
    for (double f : sweep) {
        if (f >= bin && f < 0.5 * nu * f0 && nu * f0 + f < 0.95 * nyq) out.push_back(f);
    }
    return out;
}

}  // namespace

RunResult run_pipeline(const SimulationConfig& cfg) {
    RunResult res;
    const BuiltModel built = stage("model", [&] {
        BuiltModel b = build_model(cfg.model);
        cfg.validate(b.model);
        return b;
    });
    const CircuitModel& model = built.model;
    res.model = model.name();
    res.k = cfg.k;

    const PssSolution pss = stage("pss", [&] {
        PssGuess guess = built.guess;
        if (cfg.T0_guess) guess.T0 = *cfg.T0_guess;
        if (cfg.x0) guess.x0 = *cfg.x0;
        PssOptions po = cfg.pss;
        po.nf = cfg.nf;
        PssSolution s = solve_pss(model, guess, po);
        if (!(s.defect <= po.tol)) {
            std::ostringstream os;
            os << "steady state is not periodic: defect " << s.defect << " > tol " << po.tol;
            throw Error(ErrorKind::no_convergence, os.str());
        }
        return s;
    });
    res.T0 = pss.T0;
    res.omega0 = pss.omega0;
    res.pss_iterations = pss.iterations;
    res.pss_defect = pss.defect;
    spdlog::debug("T0 = {:.12g} s after {} Newton iterations", pss.T0, pss.iterations);

    const FloquetSet fset = stage("floquet", [&] {
        FloquetOptions fo;
        fo.k = cfg.k;
        fo.nf = cfg.nf;
        return build_floquet_set(model, pss, fo);
    });
    res.L = fset.L;
    res.mu = fset.mu;

    std::vector<NodeRequest> requests;
    for (const auto& name : cfg.noise_nodes) {
        for (int nu : cfg.nu_list) requests.push_back({name, *model.node_index(name), nu});
    }
    const NoiseOperators ops = stage("noise-ops", [&] { return build_noise_operators(fset, pss, requests); });
    res.c = ops.c;
    for (const auto& n : ops.nodes) res.nodes.push_back({n.node, n.nu, n.carrier_power});

    const std::vector<double> freqs = generate_sweep(cfg.sweep);
    res.datasets = stage("spectra", [&] { return assemble_datasets(ops, freqs); });

    if (cfg.mc_enabled) {
        res.mc = stage("oracle", [&] {
            const oracle::McConfig mc = cfg.mc.resolved(pss.T0);
            std::vector<McOverlay> out;
            for (const auto& req : requests) {
                const auto offs = mc_offsets(freqs, mc, 1.0 / pss.T0, req.nu);
                if (offs.empty()) {
                    throw Error(ErrorKind::configuration,
                                "no sweep offset is resolvable by the Monte-Carlo periodogram; widen mc.window");
                }
                spdlog::info("oracle: node {} with {} paths, {} offsets", req.name, mc.n_paths, offs.size());
                out.push_back({req.name, req.nu, oracle::run_mc(model, pss, mc, req.q, req.nu, offs)});
            }
            return out;
        });
    }

    stage("output", [&] {
        const fs::path out = cfg.output_dir;
        const fs::path staging = make_staging(out);
        std::vector<fs::path> names;
        try {
            auto emit = [&](const std::string& name, auto&& writer) {
                write_file(staging / name, writer);
                names.emplace_back(name);
            };
            for (const auto& ds : res.datasets) {
                const std::string stem = dataset_stem(ds.node, ds.nu);
                emit(stem + ".pn.csv", [&](std::ostream& os) { write_kind_csv(os, ds, SpectrumKind::pn); });
                emit(stem + ".an.csv", [&](std::ostream& os) { write_kind_csv(os, ds, SpectrumKind::an); });
                emit(stem + ".xn.csv", [&](std::ostream& os) { write_kind_csv(os, ds, SpectrumKind::xn); });
                emit(stem + ".spectra.csv", [&](std::ostream& os) { write_spectrum_csv(os, ds); });
            }
            emit(res.model + ".pss.csv", [&](std::ostream& os) { write_pss_csv(os, pss); });
            emit(res.model + ".floquet.csv", [&](std::ostream& os) { write_floquet_csv(os, fset); });
            std::vector<OverlayCurve> overlays;
            for (const auto& m : res.mc) {
                const std::string file = dataset_stem(m.node, m.nu) + ".mc.csv";
                OverlayCurve ov{m.node + " Monte-Carlo", file, m.result.offsets, {}};
                emit(file, [&](std::ostream& os) {
                    os << "f_offset_hz,pnoise_dbc\n" << std::setprecision(17);
                    for (std::size_t i = 0; i < m.result.offsets.size(); ++i) {
                        os << m.result.offsets[i] << ',' << to_db(m.result.density[i]) << '\n';
                    }
                });
                for (double d : m.result.density) ov.dbc.push_back(to_db(d));
                overlays.push_back(std::move(ov));
            }
            emit(res.model + ".summary.txt", [&](std::ostream& os) { print_summary(os, res); });
            if (cfg.plot) {
                const PlotFiles pf = emit_plot(res.datasets, overlays, staging, res.model + ".noise");
                names.push_back(pf.script.filename());
                names.push_back(pf.svg.filename());
            }
            // a failed move takes back the files already moved
            std::vector<fs::path> moved;
            for (const auto& name : names) {
                std::error_code ec;
                fs::rename(staging / name, out / name, ec);
                if (ec) {
                    std::error_code ignored;
                    for (const auto& m : moved) fs::remove(m, ignored);
                    throw Error(ErrorKind::io, "cannot move " + name.string() + " into " + out.string() + ": " +
                                                   ec.message());
                }
                moved.push_back(out / name);
            }
            res.files = moved;
            fs::remove_all(staging);
        } catch (...) {
            std::error_code ec;
            fs::remove_all(staging, ec);
            throw;
        }
        return 0;
    });
    return res;
}

void print_summary(std::ostream& os, const RunResult& res) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(10);
    os << "model            " << res.model << '\n'
       << "T0               " << res.T0 << " s\n"
       << "f0               " << 1.0 / res.T0 << " Hz\n"
       << "omega0           " << res.omega0 << " rad/s\n"
       << "pss iterations   " << res.pss_iterations << " (defect " << res.pss_defect << ")\n"
       << "c                " << res.c << " s\n"
       << "corner           " << 0.5 * res.omega0 * res.omega0 * res.c / kTwoPi << " Hz\n"
       << "k                " << res.k << '\n'
       << "L                " << res.L << '\n';
    for (std::size_t i = 0; i < res.mu.size(); ++i) {
        os << "mu_" << i + 1 << (i + 1 < 10 ? "             " : "            ") << res.mu[i].real() << " "
           << (res.mu[i].imag() < 0 ? "- " : "+ ") << std::abs(res.mu[i].imag()) << "j 1/s"
           << (static_cast<int>(i) < res.k ? "  (phase)" : "  (amplitude)") << '\n';
    }
    for (const auto& n : res.nodes) {
        os << "carrier " << n.node << " h" << n.nu << "  |X|^2 = " << n.carrier_power << '\n';
    }
    for (const auto& m : res.mc) {
        os << "oracle " << m.node << "  f0 = " << m.result.f0 << " Hz, c = " << m.result.diffusion.c << " s ("
           << m.result.segments << " periodogram segments)\n";
    }
    os.flags(flags);
    os.precision(prec);
}

}  // namespace coscpmm
