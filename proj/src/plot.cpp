#include "coscpmm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "coscpmm/error.hpp"

namespace coscpmm {

namespace {

struct Curve {
    std::string label;
    std::string color;
    bool dashed = false;
    bool markers = false;
    std::vector<double> f;
    std::vector<double> y;
};

const char* kind_color(int kind) {
    static const char* colors[] = {"#1f5fbf", "#2a9d3a", "#c0392b"};
    return colors[kind];
}

// Points at the dB floor carry no information on a log plot.
Curve make_curve(std::string label, std::string color, bool dashed, const std::vector<double>& f,
                 const std::vector<double>& y) {
    Curve c{std::move(label), std::move(color), dashed, false, {}, {}};
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] > 0.0 && std::isfinite(y[i]) && y[i] > kDbFloor) {
            c.f.push_back(f[i]);
            c.y.push_back(y[i]);
        }
    }
    return c;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += ch;
        }
    }
    return out;
}

void write_svg(const std::filesystem::path& path, const std::vector<Curve>& curves,
               const std::vector<std::string>& notes) {
    double fmin = 1e300, fmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.f.size(); ++i) {
            fmin = std::min(fmin, c.f[i]);
            fmax = std::max(fmax, c.f[i]);
            ymin = std::min(ymin, c.y[i]);
            ymax = std::max(ymax, c.y[i]);
        }
    }
    if (fmin > fmax) {
        fmin = 1.0;
        fmax = 10.0;
        ymin = -10.0;
        ymax = 0.0;
    }
    const double d0 = std::floor(std::log10(fmin));
    double d1 = std::ceil(std::log10(fmax));
    if (d1 <= d0) d1 = d0 + 1.0;
    const double y0 = 10.0 * std::floor(ymin / 10.0);
    double y1 = 10.0 * std::ceil(ymax / 10.0);
    if (y1 <= y0) y1 = y0 + 10.0;

    const double W = 860, H = 560, L = 80, R = 230, T = 30, B = 60;
    const double pw = W - L - R, ph = H - T - B;
    auto X = [&](double f) { return L + (std::log10(f) - d0) / (d1 - d0) * pw; };
    auto Y = [&](double y) { return T + (y1 - y) / (y1 - y0) * ph; };

    std::ofstream os(path);
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int d = static_cast<int>(d0); d <= static_cast<int>(d1); ++d) {
        const double x = X(std::pow(10.0, d));
        os << "<line x1=\"" << x << "\" y1=\"" << T << "\" x2=\"" << x << "\" y2=\"" << T + ph
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">1e" << d << "</text>\n";
    }
    const double ystep = (y1 - y0) > 100.0 ? 20.0 : 10.0;
    for (double y = y0; y <= y1 + 1e-9; y += ystep) {
        os << "<line x1=\"" << L << "\" y1=\"" << Y(y) << "\" x2=\"" << L + pw << "\" y2=\"" << Y(y)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << Y(y) + 4 << "\" text-anchor=\"end\">" << y << "</text>\n";
    }
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">offset frequency (Hz)</text>\n";
    os << "<text transform=\"translate(20," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">dBc/Hz</text>\n";

    int row = 0;
    for (const auto& c : curves) {
        if (c.f.empty()) continue;
        const std::string dash = c.dashed ? " stroke-dasharray=\"6,4\"" : "";
        os << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"1.5\"" << dash << " points=\"";
        for (std::size_t i = 0; i < c.f.size(); ++i) os << X(c.f[i]) << ',' << Y(c.y[i]) << ' ';
        os << "\"/>\n";
        if (c.markers) {
            for (std::size_t i = 0; i < c.f.size(); ++i) {
                os << "<circle cx=\"" << X(c.f[i]) << "\" cy=\"" << Y(c.y[i]) << "\" r=\"2.5\" fill=\"" << c.color
                   << "\"/>\n";
            }
        }
        const double ly = T + 10 + 18 * row++;
        os << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 40 << "\" y2=\"" << ly
           << "\" stroke=\"" << c.color << "\" stroke-width=\"1.5\"" << dash << "/>\n";
        os << "<text x=\"" << L + pw + 46 << "\" y=\"" << ly + 4 << "\">" << escape(c.label) << "</text>\n";
    }
    for (const auto& n : notes) {
        const double ly = T + 10 + 18 * row++;
        os << "<text x=\"" << L + pw + 12 << "\" y=\"" << ly + 4 << "\" font-style=\"italic\">" << escape(n)
           << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) throw Error(ErrorKind::io, "cannot write " + path.string());
}

}  // namespace

PlotFiles emit_plot(const std::vector<SpectrumDataset>& datasets, const std::vector<OverlayCurve>& overlays,
                    const std::filesystem::path& dir, const std::string& stem) {
    if (datasets.empty()) throw Error(ErrorKind::contract, "nothing to plot");
    const bool multi = datasets.size() > 1;
    std::vector<Curve> curves;
    std::vector<std::string> notes;
    std::ostringstream gp;
    gp << "# gnuplot script; run from this directory\n"
       << "set datafile separator ','\n"
       << "set logscale x\n"
       << "set format x '10^{%L}'\n"
       << "set xlabel 'offset frequency (Hz)'\n"
       << "set ylabel 'dBc/Hz'\n"
       << "set grid\n"
       << "set key outside right\n"
       << "set terminal svg size 860,560 dynamic\n"
       << "set output '" << stem << ".gnuplot.svg'\n";
    std::vector<std::string> plots;
    for (std::size_t n = 0; n < datasets.size(); ++n) {
        const auto& ds = datasets[n];
        const bool dashed = multi && n == 0;
        const std::string file = dataset_stem(ds.node, ds.nu) + ".spectra.csv";
        const std::string tag = ds.node + (ds.nu == 1 ? "" : " (h" + std::to_string(ds.nu) + ")");
        const std::string dt = dashed ? " dt 2" : " dt 1";
        std::vector<double> pn, an, xn;
        for (std::size_t i = 0; i < ds.freqs.size(); ++i) {
            pn.push_back(to_db(ds.pnoise[i]));
            an.push_back(to_db(ds.anoise[i]));
            xn.push_back(to_db(std::abs(ds.xnoise[i])));
        }
        curves.push_back(make_curve(tag + " pnoise", kind_color(0), dashed, ds.freqs, pn));
        plots.push_back("'" + file + "' skip 1 using 1:2 with lines lc rgb '" + kind_color(0) + "'" + dt +
                        " title '" + tag + " pnoise'");
        if (ds.has_anoise()) {
            curves.push_back(make_curve(tag + " anoise", kind_color(1), dashed, ds.freqs, an));
            plots.push_back("'" + file + "' skip 1 using 1:3 with lines lc rgb '" + kind_color(1) + "'" + dt +
                            " title '" + tag + " anoise'");
        } else {
            notes.push_back(tag + ": no amplitude modes, anoise omitted");
            gp << "# " << tag << ": no amplitude modes retained, anoise omitted\n";
        }
        curves.push_back(make_curve(tag + " |xnoise|", kind_color(2), dashed, ds.freqs, xn));
        plots.push_back("'" + file + "' skip 1 using 1:5 with lines lc rgb '" + kind_color(2) + "'" + dt +
                        " title '" + tag + " |xnoise|'");
    }
    for (const auto& ov : overlays) {
        Curve c = make_curve(ov.label, "#777777", true, ov.freqs, ov.dbc);
        c.markers = true;
        curves.push_back(std::move(c));
        plots.push_back("'" + ov.file + "' skip 1 using 1:2 with linespoints lc rgb '#777777' dt 2 pt 7 ps 0.5 title '" +
                        ov.label + "'");
    }
    gp << "plot ";
    for (std::size_t i = 0; i < plots.size(); ++i) gp << (i ? ", \\\n     " : "") << plots[i];
    gp << "\n";

    PlotFiles files{dir / (stem + ".gp"), dir / (stem + ".svg")};
    {
        std::ofstream os(files.script);
        os << gp.str();
        if (!os) throw Error(ErrorKind::io, "cannot write " + files.script.string());
    }
    write_svg(files.svg, curves, notes);
    return files;
}

}  // namespace coscpmm
