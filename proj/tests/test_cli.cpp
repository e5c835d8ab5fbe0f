#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "coscpmm/config.hpp"
#include "coscpmm/error.hpp"
#include "coscpmm/pipeline.hpp"
#include "coscpmm/plot.hpp"

using namespace coscpmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("coscpmm-test-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

std::string error_text(const std::string& cfg) {
    try {
        (void)parse_config_text(cfg);
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

const char* kVdp =
    "model = vdp\n"
    "sweep.start = 1e-5\n"
    "sweep.stop = 1\n"
    "sweep.points = 5\n";

struct Cmd {
    int status;
    std::string output;
};

Cmd run_cli(const std::string& args, const std::string& env = {}) {
    const std::string cmd = env + " " + COSCPMM_CLI_PATH + " " + args + " 2>&1";
    Cmd r{0, {}};
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[512];
    while (fgets(buf, sizeof buf, p)) r.output += buf;
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

}  // namespace

TEST_CASE("minimal config gets the defaults") {
    const auto cfg = parse_config_text("model = vdp\n");
    CHECK(cfg.pss.M == 1024);
    CHECK(cfg.nu_list == std::vector<int>{1});
    CHECK(cfg.nf == 16);
    CHECK(cfg.k == 1);
    CHECK(cfg.noise_nodes == std::vector<std::string>{"v"});
    CHECK_FALSE(cfg.mc_enabled);
    CHECK_FALSE(cfg.plot);
    CHECK(cfg.output_dir == fs::path("out"));
}

TEST_CASE("config grammar") {
    const auto cfg = parse_config_text(
        "# comment\n"
        "  model = ilo2   # trailing\n"
        "\n"
        "unit2.C = 1.01\n"
        "noise_nodes = v1, v2\n"
        "nu = 1, 3\n"
        "mc.enabled = yes\n"
        "pss.x0 = 1, 0, 1, 0\n"
        "sweep.kind = lin\n"
        "sweep.points = 12\n");
    CHECK(cfg.model.name == "ilo2");
    CHECK(cfg.k == 2);
    CHECK(cfg.model.unit_overrides.at(2).at("C") == 1.01);
    CHECK(cfg.noise_nodes == std::vector<std::string>{"v1", "v2"});
    CHECK(cfg.nu_list == std::vector<int>{1, 3});
    CHECK(cfg.mc_enabled);
    REQUIRE(cfg.x0);
    CHECK(cfg.x0->size() == 4);
    CHECK(cfg.sweep.kind == SweepKind::lin);
}

TEST_CASE("config rejections") {
    CHECK(error_text("model = vdp\nnf = 8\n").find("at least 16") != std::string::npos);
    const std::string nodes = error_text("model = vdp\nnoise_nodes = nosuch\n");
    CHECK(nodes.find("nosuch") != std::string::npos);
    CHECK(nodes.find("available: v iL") != std::string::npos);
    CHECK(error_text("model = vdp\nsweep.start = 10\nsweep.stop = 1\n").find("stop must exceed start") !=
          std::string::npos);
    CHECK(error_text("model = vdp\nmodel = vdp\n").find("duplicate key") != std::string::npos);
    CHECK(error_text("model = vdp\nfoo = 1\n").find("unknown key 'foo'") != std::string::npos);
    CHECK(error_text("model = vdp\nunit1.R = 1\n").find("unknown key") != std::string::npos);
    CHECK(error_text("model = vdp\nplot = maybe\n") != "");
    CHECK(error_text("model = vdp\nk = 2\n").find("oscillator unit") != std::string::npos);
    CHECK(error_text("model = vdp\njunk\n").find("line 2") != std::string::npos);
    CHECK(error_text("model = tank\n").find("available") != std::string::npos);
    CHECK(error_text("model = vdp\nnu = 17\n") != "");
    CHECK(error_text("model = vdp\nnf = 300\n") != "");   // M < 4 nf
    try {
        (void)parse_config("/nonexistent/cfg");
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
}

TEST_CASE("VDP pipeline writes every dataset") {
    TempDir tmp;
    auto cfg = parse_config_text(kVdp);
    cfg.output_dir = tmp.path;
    const auto res = run_pipeline(cfg);
    CHECK(res.k == 1);
    CHECK(res.L == 2);
    CHECK(res.c > 0.0);
    for (const char* f : {"v.pn.csv", "v.an.csv", "v.xn.csv", "v.spectra.csv", "vdp.pss.csv", "vdp.floquet.csv",
                          "vdp.summary.txt"}) {
        CHECK_MESSAGE(fs::exists(tmp.path / f), f);
    }
    CHECK(res.files.size() == 7);
    CHECK(first_line(tmp.path / "v.pn.csv") == "f_offset_hz,pnoise_dbc");
    CHECK(first_line(tmp.path / "v.an.csv") == "f_offset_hz,anoise_dbc");
    CHECK(first_line(tmp.path / "v.xn.csv") == "f_offset_hz,xnoise_signed,xnoise_db");
    CHECK(first_line(tmp.path / "vdp.pss.csv") == "t,x_1,x_2");
    CHECK(first_line(tmp.path / "vdp.floquet.csv") == "i,re_mu,im_mu,abs_lambda,retained");
    CHECK(line_count(tmp.path / "v.pn.csv") == 1 + 26);
    CHECK(line_count(tmp.path / "vdp.pss.csv") == 1 + 1024);
    CHECK(line_count(tmp.path / "vdp.floquet.csv") == 1 + 2);
    // nothing left over from staging
    for (const auto& e : fs::directory_iterator(tmp.path)) CHECK(e.path().filename().string()[0] != '.');

    std::ostringstream sum;
    print_summary(sum, res);
    CHECK(sum.str().find("L                2") != std::string::npos);
    CHECK(sum.str() == slurp(tmp.path / "vdp.summary.txt"));
}

TEST_CASE("ILO pipeline keeps two phase modes, the zero mode first") {
    TempDir tmp;
    auto cfg = parse_config_text("model = ilo2\nunit2.C = 1.01\nunit2.noise = 1e-4\nnoise = 1e-6\n"
                                 "noise_nodes = v1, v2\nsweep.start = 1e-5\nsweep.stop = 1e-2\nsweep.points = 3\n");
    cfg.output_dir = tmp.path;
    const auto res = run_pipeline(cfg);
    REQUIRE(res.k == 2);
    REQUIRE(res.L >= 2);
    CHECK(std::abs(res.mu[0]) < 1e-6 * res.omega0);
    for (int i = 2; i < res.L; ++i) CHECK(std::abs(res.mu[1].real()) <= std::abs(res.mu[i].real()));
    CHECK(std::abs(res.mu[1].real()) > 1e-6 * res.omega0);
    CHECK(res.datasets.size() == 2);
    CHECK(fs::exists(tmp.path / "v1.pn.csv"));
    CHECK(fs::exists(tmp.path / "v2.pn.csv"));
}

TEST_CASE("Monte-Carlo overlay and byte-identical reruns") {
    const std::string text =
        "model = vdp\nnoise = 1e-2\nsweep.start = 0.06\nsweep.stop = 0.07\nsweep.points = 10\n"
        "mc.enabled = true\nmc.paths = 8\nmc.window = 512\nplot = true\n";
    TempDir a, b;
    auto cfg = parse_config_text(text);
    const double T0 = 6.663297615;
    cfg.mc.duration = 60.0 * T0;
    cfg.output_dir = a.path;
    const auto ra = run_pipeline(cfg);
    cfg.output_dir = b.path;
    (void)run_pipeline(cfg);
    REQUIRE(fs::exists(a.path / "v.mc.csv"));
    CHECK(first_line(a.path / "v.mc.csv") == "f_offset_hz,pnoise_dbc");
    CHECK(line_count(a.path / "v.mc.csv") == 1 + ra.mc[0].result.offsets.size());
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a.path)) {
        const auto name = e.path().filename();
        CHECK_MESSAGE(slurp(e.path()) == slurp(b.path / name), name.string());
        ++compared;
    }
    CHECK(compared == 10);
}

TEST_CASE("stage failures carry the stage name and leave no files") {
    TempDir tmp;
    auto cfg = parse_config_text(std::string(kVdp) + "nu = 2\n");
    cfg.output_dir = tmp.path / "out";
    try {
        (void)run_pipeline(cfg);
        FAIL("expected a dead node");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dead_node);
        CHECK(std::string(e.what()).find("[noise-ops]") != std::string::npos);
        CHECK(std::string(e.what()).find("hint:") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(tmp.path / "out"));
}

TEST_CASE("a failed move into the output directory is rolled back") {
    TempDir tmp;
    auto cfg = parse_config_text(kVdp);
    cfg.output_dir = tmp.path;
    // a non-empty directory where a late file should go blocks the move
    fs::create_directories(tmp.path / "vdp.summary.txt" / "x");
    try {
        (void)run_pipeline(cfg);
        FAIL("expected an io error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
        CHECK(std::string(e.what()).find("[output]") != std::string::npos);
    }
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(tmp.path)) {
        CHECK(e.path().filename() == "vdp.summary.txt");
        ++entries;
    }
    CHECK(entries == 1);
}

TEST_CASE("plot for one node: three curves, no dashes") {
    TempDir tmp;
    auto cfg = parse_config_text(std::string(kVdp) + "plot = true\n");
    cfg.output_dir = tmp.path;
    (void)run_pipeline(cfg);
    const std::string svg = slurp(tmp.path / "vdp.noise.svg");
    const std::string gp = slurp(tmp.path / "vdp.noise.gp");
    CHECK(count(svg, "<polyline") == 3);
    CHECK(count(svg, "stroke-dasharray") == 0);
    CHECK(svg.find("dBc/Hz") != std::string::npos);
    CHECK(gp.find("set logscale x") != std::string::npos);
    CHECK(count(gp, "v.spectra.csv") == 3);
}

TEST_CASE("plot for two nodes: first dashed, second solid") {
    SpectrumDataset a, b;
    for (auto* d : {&a, &b}) {
        d->freqs = {1.0, 10.0, 100.0};
        d->pnoise = {1e-2, 1e-4, 1e-6};
        d->anoise = {1e-5, 1e-5, 1e-6};
        d->xnoise = {-1e-6, 1e-7, 1e-8};
    }
    a.node = "v1";
    b.node = "v2";
    TempDir tmp;
    const auto files = emit_plot({a, b}, {}, tmp.path, "pair");
    const std::string svg = slurp(files.svg);
    CHECK(count(svg, "<polyline") == 6);
    // three dashed curves plus their three legend swatches
    CHECK(count(svg, "stroke-dasharray") == 6);
    CHECK(svg.find("v1 pnoise") != std::string::npos);
    CHECK(svg.find("v2 pnoise") != std::string::npos);
    CHECK(count(slurp(files.script), "dt 2") == 3);
}

TEST_CASE("plot without amplitude modes omits anoise with a note") {
    SpectrumDataset d;
    d.node = "v";
    d.freqs = {1.0, 10.0};
    d.pnoise = {1e-2, 1e-4};
    d.anoise = {0.0, 0.0};
    d.xnoise = {0.0, 0.0};
    TempDir tmp;
    const auto files = emit_plot({d}, {}, tmp.path, "p");
    const std::string svg = slurp(files.svg);
    CHECK(svg.find("anoise omitted") != std::string::npos);
    CHECK(svg.find("v anoise") == std::string::npos);
    CHECK_THROWS_AS((void)emit_plot({}, {}, tmp.path, "p"), Error);
}

TEST_CASE("command line") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "vdp.cfg";
    std::ofstream(cfg) << kVdp << "output_dir = " << (tmp.path / "default").string() << "\n";

    const auto ok = run_cli("run " + cfg.string() + " --out " + (tmp.path / "o").string() + " --plot");
    CHECK(ok.status == 0);
    CHECK(ok.output.find("T0") != std::string::npos);
    CHECK(fs::exists(tmp.path / "o" / "v.pn.csv"));
    CHECK(fs::exists(tmp.path / "o" / "vdp.noise.svg"));
    CHECK_FALSE(fs::exists(tmp.path / "default"));

    const auto bad_node = run_cli("run " + cfg.string() + " --nodes v,nosuch");
    CHECK(bad_node.status == 2);
    CHECK(bad_node.output.find("available: v iL") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp.path / "default"));

    const fs::path small = tmp.path / "small.cfg";
    std::ofstream(small) << "model = vdp\nnf = 8\n";
    CHECK(run_cli("run " + small.string()).status == 2);

    const fs::path dead = tmp.path / "dead.cfg";
    std::ofstream(dead) << kVdp << "nu = 2\noutput_dir = " << (tmp.path / "dead").string() << "\n";
    const auto d = run_cli("run " + dead.string());
    CHECK(d.status == 1);
    CHECK_FALSE(fs::exists(tmp.path / "dead"));

    CHECK(run_cli("run /nonexistent.cfg").status != 0);
    CHECK(run_cli("").status != 0);

    const auto quiet = run_cli("run " + cfg.string() + " --out " + (tmp.path / "q").string());
    CHECK(quiet.output.find("stage") == std::string::npos);
    const auto loud = run_cli("run " + cfg.string() + " --out " + (tmp.path / "l").string(), "COSCPMM_LOG_LEVEL=debug");
    CHECK(loud.output.find("stage pss done") != std::string::npos);
}
