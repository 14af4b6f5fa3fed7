#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scnoise/builtin.hpp"
#include "scnoise/mcsim.hpp"
#include "scnoise/report_json.hpp"

using namespace scnoise;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kParse = 2, kAnalysis = 3, kCompareFail = 4 };

struct Exit {
    int code;
    std::string message;
};

struct Loaded {
    std::string label;
    Circuit circuit;
};

Loaded load(const std::string& src) {
    std::string text;
    if (src.rfind("builtin:", 0) == 0) {
        auto* b = find_builtin(src.substr(8));
        if (!b) throw Exit{kUsage, "unknown builtin '" + src.substr(8) + "' (see 'scnoise examples')"};
        text = b->text;
    } else {
        std::ifstream in(src, std::ios::binary);
        if (!in) throw Exit{kUsage, "cannot read " + src};
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    try {
        return {src, parse(text)};
    } catch (const ParseError& e) {
        throw Exit{kParse, src + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.message()};
    }
}

std::string fmt(const char* f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

std::string uv(double v2) { return fmt("%.2f", std::sqrt(std::max(v2, 0.0)) * 1e6); }
std::string uv_rms(double v) { return fmt("%.2f", v * 1e6); }
std::string pf(const ExtCap& c) { return c.is_infinite() ? "inf" : fmt("%.4g", c.value() * 1e12); }
std::string var_uv(const Variance& v) { return v.is_unbounded() ? "UNBOUNDED" : uv(v.value()); }
std::string port_str(const Port& p) { return p.a + "," + p.b; }

std::string pad(std::string s, std::size_t w) {
    // width counts code points so the micro sign does not shift columns
    std::size_t cps = 0;
    for (unsigned char ch : s) cps += (ch & 0xC0) != 0x80;
    if (cps < w) s.append(w - cps, ' ');
    return s;
}

std::string poly(const std::vector<double>& c) {
    std::string s;
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] == 0.0) continue;
        std::string t = fmt("%.6g", std::abs(c[k]));
        if (k > 0) t += k == 1 ? " z^-1" : " z^-" + std::to_string(k);
        s += s.empty() ? (c[k] < 0 ? "-" + t : t) : (c[k] < 0 ? " - " : " + ") + t;
    }
    return s.empty() ? "0" : s;
}

std::vector<int> sample_points(int n) {
    std::vector<int> out;
    for (int m = 1; m <= n; m *= 10)
        for (int f : {1, 2, 5})
            if (f * m <= n) out.push_back(f * m);
    if (out.empty() || out.back() != n) out.push_back(n);
    return out;
}

void print_header(const Circuit& c) {
    std::cout << "circuit " << c.name << "  T = " << fmt("%g", c.temperature) << " K";
    if (c.fs > 0) std::cout << "  fs = " << fmt("%g", c.fs / 1e3) << " kHz";
    std::cout << "  phases";
    for (const auto& p : c.phases) std::cout << ' ' << p;
    std::cout << '\n';
}

void print_analysis(const Circuit& c, const NoiseReport& r, bool approx) {
    print_header(c);
    if (auto f = frequency_meta(c)) {
        std::cout << "stage " << f->kind << "  H(z) = (" << poly(f->num) << ") / (" << poly(f->den) << ")";
        if (f->fc) std::cout << "  fc = " << fmt("%.4g", *f->fc) << " Hz";
        std::cout << '\n';
    }
    const double cm = c.find_capacitor(r.plan.memory)->value;
    std::cout << "memory " << r.plan.memory << " = " << fmt("%.4g", cm * 1e12) << " pF  lambda = " << fmt("%.6g", r.plan.lambda)
              << (r.divergent ? " (no steady state)" : "") << "\n";
    std::cout << "readout (" << port_str(c.readout->port) << ") at end of " << c.readout->phase << "\n\n";

    std::cout << "extended Bode extraction [pF]\n";
    std::cout << "  " << pad("role", 10) << pad("phase", 7) << pad("port", 12) << pad("C_inf", 10) << pad("C_inf'", 10)
              << pad("C0", 10) << pad("h_fb", 10) << pad("gamma", 7) << "V rms [µV]\n";
    auto row = [&](const std::string& role, const BodeCaps& b, const Variance& v) {
        std::cout << "  " << pad(role, 10) << pad(b.phase, 7) << pad(port_str(b.port), 12) << pad(pf(b.c_inf), 10)
                  << pad(pf(b.c_inf_prime), 10) << pad(pf(b.c_zero), 10) << pad(fmt("%.6g", b.hfb), 10)
                  << pad(fmt("%g", b.gamma_eff), 7) << var_uv(v) << '\n';
    };
    for (const auto& t : r.terms) row("injection", t.caps, t.voltage);
    row("direct", r.direct_caps, r.direct);

    std::cout << "\ninjections into " << r.plan.memory << " per period\n";
    std::cout << "  " << pad("phase", 7) << pad("cap", 8) << pad("conv [pF]", 11) << pad("prop", 11) << pad("beta_sw", 12)
              << "beta_ota\n";
    for (const auto& t : r.terms) {
        const auto& i = t.injection;
        std::cout << "  " << pad(i.phase, 7) << pad(i.cap, 8) << pad(fmt("%.4g", i.conv_cap * 1e12), 11)
                  << pad(fmt("%.6g", i.prop_coeff), 11) << pad(fmt("%.6g", t.beta_sw), 12) << fmt("%.6g", t.beta_ota)
                  << (i.from_directive ? "  (explicit)" : "") << '\n';
    }
    std::cout << '\n';
    if (r.unbounded) {
        std::cout << "noise UNBOUNDED (a port sees zero capacitance to the rest of the network)\n";
        return;
    }
    const double g2 = r.plan.readout_gain * r.plan.readout_gain;
    const double direct = r.direct.value();
    const auto& a = r.approx;
    if (r.divergent) {
        const double slope = g2 * r.recursion.inj_var;
        std::cout << "sampled noise grows as sqrt(n): " << fmt("%.6g", slope * 1e12) << " µV^2 per period";
        if (approx && a && a->slope) std::cout << "  (small-alpha " << fmt("%.6g", *a->slope * 1e12) << ")";
        std::cout << "\n  " << pad("n", 8) << pad("sampled [µV]", 15) << pad("total [µV]", 13) << "sampled/sqrt(n)\n";
        for (int n : sample_points(r.periods)) {
            double s = g2 * evolve(r.recursion, n);
            std::cout << "  " << pad(std::to_string(n), 8) << pad(uv(s), 15) << pad(uv(s + direct), 13)
                      << uv(s / n) << '\n';
        }
        std::cout << "direct noise " << uv(direct) << " µV rms";
        if (approx && a) std::cout << "  (small-alpha " << uv(a->direct) << ")";
        std::cout << '\n';
        return;
    }
    std::cout << "  " << pad("", 26) << pad("exact [µV]", 13) << (approx && a ? "small-alpha [µV]" : "") << '\n';
    auto line = [&](const std::string& what, double exact, std::optional<double> sa) {
        std::cout << "  " << pad(what, 26) << pad(uv(exact), 13);
        if (approx && a && sa) std::cout << uv(*sa);
        std::cout << '\n';
    };
    line("sampled, steady state", *r.sampled_ss, a ? a->sampled_ss : std::nullopt);
    line("direct", direct, a ? std::optional<double>(a->direct) : std::nullopt);
    line("total, steady state", *r.total_ss, a ? std::optional<double>(a->total) : std::nullopt);
    line("total after " + std::to_string(r.periods) + " periods", r.total_n, std::nullopt);
    if (approx && !a) std::cout << "  (no small-alpha form: stage pattern not recognized)\n";
}

struct McFlags {
    int runs = 1000;
    int periods = 0;  // 0 = auto
    std::uint64_t seed = 1;
    std::string dt = "auto";
    int threads = 0;
    int record = 0;
    bool strict = false;
    std::string noise = "all";
    std::optional<double> temperature;
};

void add_mc_flags(CLI::App* app, McFlags& f) {
    app->add_option("--runs", f.runs, "Monte-Carlo runs")->check(CLI::PositiveNumber);
    app->add_option("--periods", f.periods, "clock periods (default: until converged, 10 if none)")->check(CLI::PositiveNumber);
    app->add_option("--seed", f.seed, "64-bit seed");
    app->add_option("--dt", f.dt, "time step in seconds, or 'auto'");
    app->add_option("--threads", f.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app->add_option("--record", f.record, "steps between recorded points (0 = auto)")->check(CLI::NonNegativeNumber);
    app->add_option("--noise", f.noise, "noise sources: all | switches | otas | none")
        ->check(CLI::IsMember({"all", "switches", "otas", "none"}));
    app->add_option("--temp", f.temperature, "temperature override [K]")->check(CLI::PositiveNumber);
    app->add_flag("--strict", f.strict, "treat settling warnings as errors");
}

// Periods long enough for the readout to converge, plus a pooling window.
int auto_periods(const Circuit& c, double temperature) {
    try {
        auto r = report(c, 1, temperature);
        if (!r.total_ss) return 10;
        return converged_from(r) + 39;
    } catch (const Error&) {
        return 10;
    }
}

McConfig to_config(const McFlags& f, const Circuit& c) {
    McConfig cfg;
    cfg.runs = f.runs;
    cfg.seed = f.seed;
    cfg.threads = f.threads;
    cfg.record = f.record;
    cfg.temperature = f.temperature;
    cfg.noise.switches = f.noise == "all" || f.noise == "switches";
    cfg.noise.otas = f.noise == "all" || f.noise == "otas";
    if (f.dt != "auto") {
        auto v = detail::parse_number(f.dt);
        if (!v || !(*v > 0)) throw Exit{kUsage, "--dt must be a positive time or 'auto'"};
        cfg.dt = *v;
    }
    cfg.periods = f.periods > 0 ? f.periods : auto_periods(c, f.temperature.value_or(c.temperature));
    return cfg;
}

void check_strict(const Circuit& c, McConfig cfg, bool strict) {
    if (!strict) return;
    cfg.runs = 1;
    cfg.periods = 1;
    cfg.noise = {false, false};
    auto probe = run(c, cfg);
    if (!probe.warnings.empty()) throw Exit{kAnalysis, "settling: " + probe.warnings.front()};
}

void print_warnings(const TraceEnsemble& mc) {
    for (const auto& w : mc.warnings) std::cerr << "warning: " << w << '\n';
}

void print_mc_header(const Loaded& in, const TraceEnsemble& mc, const McConfig& cfg) {
    std::cout << "circuit " << in.circuit.name << ": " << mc.runs << " runs x " << mc.periods << " periods, seed " << cfg.seed
              << '\n';
    std::cout << "dt = " << fmt("%.4g", mc.dt * 1e9) << " ns (" << mc.steps_per_phase << " steps/phase), max pole "
              << fmt("%.4g", mc.max_pole) << " rad/s\n";
}

int cmd_analyze(const std::string& file, int periods, bool json, bool approx) {
    auto in = load(file);
    auto r = report(in.circuit, periods, in.circuit.temperature);
    if (json)
        std::cout << report_json(in.circuit, r).dump(2) << '\n';
    else
        print_analysis(in.circuit, r, approx);
    return kOk;
}

int cmd_simulate(const std::string& file, const McFlags& f, const std::string& csv, bool csv_runs, bool json) {
    auto in = load(file);
    auto cfg = to_config(f, in.circuit);
    cfg.keep_traces = csv_runs;
    check_strict(in.circuit, cfg, f.strict);
    auto mc = run(in.circuit, cfg);
    print_warnings(mc);
    if (!csv.empty()) {
        std::ofstream out(csv, std::ios::binary);
        if (!out) throw Exit{kUsage, "cannot write " + csv};
        csv_runs ? write_runs_csv(out, mc) : write_rms_csv(out, mc);
    }
    if (json) {
        std::cout << mc_json(mc, cfg).dump(2) << '\n';
        return kOk;
    }
    print_mc_header(in, mc, cfg);
    std::cout << "  " << pad("period", 8) << pad("t [µs]", 11) << pad("rms [µV]", 11) << "se [µV]\n";
    for (int k = 0; k < mc.periods; ++k) {
        double v = mc.readout_rms[static_cast<std::size_t>(k)];
        std::cout << "  " << pad(std::to_string(k + 1), 8) << pad(fmt("%.3f", mc.readout_time[static_cast<std::size_t>(k)] * 1e6), 11)
                  << pad(uv_rms(v), 11) << uv_rms(standard_error(v, mc.runs)) << '\n';
    }
    try {
        auto r = report(in.circuit, mc.periods, cfg.temperature.value_or(in.circuit.temperature));
        if (r.total_ss) {
            int first = std::min(converged_from(r), mc.periods);
            auto p = pooled_compare(r, mc, first);
            std::cout << "steady state (periods " << p.first << ".." << p.last << "): " << uv_rms(p.mc_rms)
                      << " µV rms, analytic " << uv_rms(p.analytic_rms) << " µV rms\n";
        }
    } catch (const Error&) {
        // analytic side unavailable (e.g. several OTAs): the MC summary stands alone
    }
    return kOk;
}

std::vector<double> parse_sweep(const std::string& s) {
    std::vector<std::string> part;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ':');) part.push_back(t);
    if (part.size() != 3) throw Exit{kUsage, "--gamma-sweep expects start:stop:count"};
    double a, b;
    int n;
    try {
        a = std::stod(part[0]);
        b = std::stod(part[1]);
        n = std::stoi(part[2]);
    } catch (const std::exception&) {
        throw Exit{kUsage, "--gamma-sweep expects start:stop:count"};
    }
    if (n < 1 || a < 0 || b < 0) throw Exit{kUsage, "--gamma-sweep expects count >= 1 and gamma >= 0"};
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    return g;
}

int cmd_gamma_sweep(const Loaded& in, const McFlags& f, const std::string& spec, bool json) {
    auto gammas = parse_sweep(spec);
    if (in.circuit.otas.empty()) throw Exit{kAnalysis, "gamma sweep needs an OTA"};
    bool ok = true;
    nlohmann::json rows = nlohmann::json::array();
    if (!json)
        std::cout << "  " << pad("gamma", 8) << pad("analytic [µV]", 15) << pad("MC [µV]", 11) << pad("err", 9) << pad("se [µV]", 10)
                  << "result\n";
    for (double g : gammas) {
        Circuit c = in.circuit;
        for (auto& o : c.otas) o.gamma = g;
        auto cfg = to_config(f, c);
        check_strict(c, cfg, f.strict);
        const double temperature = cfg.temperature.value_or(c.temperature);
        auto r = report(c, cfg.periods, temperature);
        auto mc = run(c, cfg);
        print_warnings(mc);
        int first = r.total_ss ? std::min(converged_from(r), cfg.periods) : cfg.periods;
        auto p = pooled_compare(r, mc, first);
        ok = ok && p.pass;
        if (json) {
            rows.push_back({{"gamma", g},
                            {"first_period", p.first},
                            {"last_period", p.last},
                            {"analytic_rms_v", p.analytic_rms},
                            {"steady_rms_v", r.rms_ss ? nlohmann::json(*r.rms_ss) : nlohmann::json(nullptr)},
                            {"mc_rms_v", p.mc_rms},
                            {"rel_err", p.rel_err},
                            {"se_v", p.se},
                            {"pass", p.pass}});
        } else {
            std::cout << "  " << pad(fmt("%g", g), 8) << pad(uv_rms(p.analytic_rms), 15) << pad(uv_rms(p.mc_rms), 11)
                      << pad(fmt("%+.2f%%", 100 * p.rel_err), 9) << pad(uv_rms(p.se), 10) << (p.pass ? "PASS" : "FAIL") << '\n';
        }
    }
    if (json) std::cout << nlohmann::json{{"gamma_sweep", rows}, {"pass", ok}}.dump(2) << '\n';
    return ok ? kOk : kCompareFail;
}

int cmd_compare(const std::string& file, const McFlags& f, double scale, const std::string& sweep, bool json) {
    auto in = load(file);
    if (!sweep.empty()) return cmd_gamma_sweep(in, f, sweep, json);
    auto cfg = to_config(f, in.circuit);
    check_strict(in.circuit, cfg, f.strict);
    auto r = report(in.circuit, cfg.periods, cfg.temperature.value_or(in.circuit.temperature));
    if (r.unbounded) throw Exit{kAnalysis, "analytic noise is UNBOUNDED; nothing to compare"};
    for (auto& v : r.series) v *= scale * scale;
    auto mc = run(in.circuit, cfg);
    print_warnings(mc);
    auto t = compare(r, mc);
    if (json) {
        auto j = report_json(in.circuit, r);
        j["mc"] = mc_json(mc, cfg, &t);
        std::cout << j.dump(2) << '\n';
    } else {
        print_mc_header(in, mc, cfg);
        std::cout << "  " << pad("period", 8) << pad("analytic [µV]", 15) << pad("MC [µV]", 11) << pad("err", 9)
                  << pad("se [µV]", 10);
        for (std::size_t p = 0; p < mc.phases.size(); ++p)
            if (static_cast<int>(p) != mc.readout_phase) std::cout << pad("MC@" + mc.phases[p] + " [µV]", 14);
        std::cout << "result\n";
        for (const auto& row : t.rows) {
            std::cout << "  " << pad(std::to_string(row.period), 8) << pad(uv_rms(row.analytic_rms), 15) << pad(uv_rms(row.mc_rms), 11)
                      << pad(fmt("%+.2f%%", 100 * row.rel_err), 9) << pad(uv_rms(row.se), 10);
            const auto& ends = mc.phase_end_rms[static_cast<std::size_t>(row.period - 1)];
            for (std::size_t p = 0; p < ends.size(); ++p)
                if (static_cast<int>(p) != mc.readout_phase) std::cout << pad(uv_rms(ends[p]), 14);
            std::cout << (row.pass ? "PASS" : "FAIL") << '\n';
        }
        if (t.pass) {
            std::cout << "PASS: all " << t.rows.size() << " readouts within max(3 se, 5%)\n";
        } else {
            std::cout << "FAIL: periods";
            for (int p : t.failing) std::cout << ' ' << p;
            std::cout << " outside max(3 se, 5%)\n";
        }
    }
    return t.pass ? kOk : kCompareFail;
}

int cmd_examples(const std::string& emit) {
    if (!emit.empty()) {
        auto* b = find_builtin(emit);
        if (!b) throw Exit{kUsage, "unknown builtin '" + emit + "'"};
        std::cout << b->text;
        return kOk;
    }
    for (const auto& b : builtin_texts()) std::cout << pad(b.name, 20) << b.description << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kT/C noise analysis of switched-capacitor circuits (extended Bode theorem) with a transient-noise Monte-Carlo check"};
    app.set_version_flag("--version", std::string("scnoise ") + kVersion);
    app.require_subcommand(1);

    std::string file;
    int periods = 100;
    bool json = false, exact = false, approx = false;
    auto* an = app.add_subcommand("analyze", "analytic noise report");
    an->add_option("file", file, "netlist file or builtin:<name>")->required();
    an->add_option("--periods", periods, "clock periods for the per-period series")->check(CLI::NonNegativeNumber);
    an->add_flag("--json", json, "JSON report (SI units)");
    auto* ex_flag = an->add_flag("--exact", exact, "exact engine only (default)");
    an->add_flag("--approx", approx, "also print the small-alpha closed forms")->excludes(ex_flag);

    McFlags mf;
    std::string csv;
    bool csv_runs = false;
    auto* sim = app.add_subcommand("simulate", "transient-noise Monte-Carlo");
    sim->add_option("file", file, "netlist file or builtin:<name>")->required();
    add_mc_flags(sim, mf);
    sim->add_option("--csv", csv, "write RMS trace (time_s,rms_v)");
    sim->add_flag("--csv-runs", csv_runs, "write per-run traces (time_s,run,node_v) instead");
    sim->add_flag("--json", json, "JSON summary (SI units)");

    double scale = 1.0;
    std::string sweep;
    auto* cmp = app.add_subcommand("compare", "analytic vs Monte-Carlo per readout");
    cmp->add_option("file", file, "netlist file or builtin:<name>")->required();
    add_mc_flags(cmp, mf);
    cmp->add_option("--gamma-sweep", sweep, "start:stop:count sweep of the OTA noise factor");
    cmp->add_option("--analytic-scale", scale, "multiply analytic RMS (negative control)")->check(CLI::PositiveNumber);
    cmp->add_flag("--json", json, "JSON output (SI units)");

    std::string emit;
    auto* exs = app.add_subcommand("examples", "list or emit builtin fixtures");
    exs->add_option("--emit", emit, "print the netlist of a builtin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*an) return cmd_analyze(file, periods, json, approx);
        if (*sim) return cmd_simulate(file, mf, csv, csv_runs, json);
        if (*cmp) return cmd_compare(file, mf, scale, sweep, json);
        if (*exs) return cmd_examples(emit);
    } catch (const Exit& e) {
        std::cerr << "error: " << e.message << '\n';
        return e.code;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.line() << ":" << e.column() << ": " << e.message() << '\n';
        return kParse;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kAnalysis;
    }
    return kUsage;
}
