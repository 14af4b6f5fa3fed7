#include <sstream>

#include <catch_amalgamated.hpp>

#include "scnoise/bode.hpp"
#include "scnoise/builtin.hpp"
#include "scnoise/mcsim.hpp"

using namespace scnoise;

namespace {

const double kT = kBoltzmann * 300.0;

// Two capacitors tied to a source through closed switches; one phase held
// for 100 of the slowest time constants.
std::string held_network(const std::string& readout) {
    return R"(circuit held
fs 10meg
phases p1
ground g
vsrc V in 0
switch S1 in x phase=p1 gon=1m
switch S2 x y phase=p1 gon=1m
cap C1 x g 1p
cap C2 y g 3p
cap C3 x y 2p
readout )" + readout + " phase=p1\n";
}

// variance over runs and periods first..last of the readout samples
double pooled_variance(const TraceEnsemble& mc, int first) {
    double s = pooled_rms(mc, first, mc.periods);
    return s * s;
}

}  // namespace

TEST_CASE("compile_phase stamps", "[mcsim]") {
    auto c = builtin("integrator");
    auto s = compile_phase(phase_view(c, "p2"), 300);
    // free nodes: a, b, out, vg (in is a source, gnd is ground)
    CHECK(s.nodes == std::vector<std::string>{"a", "b", "out", "vg"});
    CHECK((s.cap - s.cap.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const int out = 2, vg = 3;
    CHECK(s.cond(out, vg) == Catch::Approx(6e-6));
    CHECK(s.cond(vg, out) == 0.0);
    double ota_psd = 0.0;
    for (const auto& src : s.sources)
        if (src.element == "A1") ota_psd = src.psd;
    CHECK(ota_psd == Catch::Approx(4 * kT * 2.0 * 6e-6).epsilon(1e-14));

    auto quiet = builtin("integrator");
    quiet.otas[0].gamma = 0.0;
    auto q = compile_phase(phase_view(quiet, "p2"), 300);
    for (const auto& src : q.sources)
        if (src.element == "A1") CHECK(src.psd == 0.0);
    CHECK(q.cond(out, vg) == Catch::Approx(6e-6));
}

TEST_CASE("single RC pole and deterministic relaxation", "[mcsim]") {
    auto c = parse("fs 1meg\nphases p\nground g\nvsrc V in 0\nswitch S in x phase=p gon=2m\ncap C x g 4p\nreadout x g phase=p\n");
    auto s = compile_phase(phase_view(c, "p"), 300, {false, false});
    auto p = poles(s);
    REQUIRE(p.size() == 1);
    CHECK(p[0].real() == Catch::Approx(-2e-3 / 4e-12).epsilon(1e-12));
    Rng rng(1);
    Eigen::VectorXd v(1);
    v << 1.0;
    const double dt = 1e-10, x = 2e-3 * dt / 4e-12;
    for (int k = 1; k <= 50; ++k) {
        v = step(s, v, dt, rng);
        CHECK(v(0) == Catch::Approx(std::pow(1.0 / (1.0 + x), k)).epsilon(1e-12));
    }
    // no conductance, no noise: frozen
    auto open = parse("fs 1meg\nphases p q\nground g\nvsrc V in 0\nswitch S in x phase=q\ncap C x g 4p\n");
    auto so = compile_phase(phase_view(open, "p"), 300);
    Eigen::VectorXd w(1);
    w << 0.123456789;
    CHECK(step(so, w, 1e-9, rng)(0) == 0.123456789);
    CHECK_THROWS_AS(step(so, w, 0.0, rng), Error);
}

TEST_CASE("floating island is reported", "[mcsim]") {
    auto c = parse("fs 1meg\nphases p\nground g\ncap C1 x g 1p\ncap C2 u w 1p\nswitch S x g phase=p\nreadout x g phase=p\n");
    CHECK_THROWS_WITH(compile_phase(phase_view(c, "p"), 300), Catch::Matchers::ContainsSubstring("floating island: node u"));
}

TEST_CASE("equipartition: held passive phase settles to the Bode variances", "[mcsim]") {
    for (const char* port : {"x g", "y g", "x y"}) {
        CAPTURE(port);
        auto c = parse(held_network(port));
        McConfig cfg;
        cfg.runs = 1000;
        cfg.periods = 4;
        auto mc = run(c, cfg);
        CHECK(mc.warnings.empty());
        const double var = pooled_variance(mc, 1);
        std::istringstream ps(port);
        Port pt;
        ps >> pt.a >> pt.b;
        const double bode = variance(extract(c, "p1", pt), 300).value();
        // 4000 nearly independent samples; se of a variance estimate is var*sqrt(2/N)
        const double se = bode * std::sqrt(2.0 / (cfg.runs * cfg.periods));
        CHECK(std::abs(var - bode) <= 3.0 * se);
    }
}

TEST_CASE("charge freezing while every switch is open", "[mcsim]") {
    auto c = parse(R"(fs 1meg
phases p1 p2
ground g
vsrc V in 0
switch S1 in x phase=p1 gon=1m
cap C1 x g 1p
cap C2 x y 1p
cap C3 y g 2p
readout x y phase=p2
)");
    McConfig cfg;
    cfg.runs = 20;
    cfg.periods = 3;
    cfg.record = 1;
    cfg.keep_traces = true;
    auto mc = run(c, cfg);
    const int per_phase = mc.steps_per_phase;
    for (const auto& tr : mc.traces)
        for (int k = 0; k < cfg.periods; ++k) {
            // points of phase p2 in period k; the point before is the end of p1
            std::size_t first = 1 + static_cast<std::size_t>((2 * k + 1) * per_phase);
            for (int j = 0; j < per_phase; ++j) CHECK(tr[first + j] == tr[first - 1]);
        }
    CHECK(mc.readout_rms[0] > 0.0);
}

TEST_CASE("zero noise gives identically zero RMS", "[mcsim]") {
    McConfig cfg;
    cfg.runs = 10;
    cfg.periods = 5;
    cfg.noise = {false, false};
    auto mc = run(builtin("active-lp"), cfg);
    for (double r : mc.rms) CHECK(r == 0.0);
    for (double r : mc.readout_rms) CHECK(r == 0.0);
}

TEST_CASE("seed determinism is byte-exact and independent of threads", "[mcsim]") {
    auto c = builtin("passive-lp-a1");
    McConfig cfg;
    cfg.runs = 37;
    cfg.periods = 4;
    cfg.seed = 0x1234567890abcdefULL;
    cfg.keep_traces = true;
    cfg.threads = 1;
    auto a = run(c, cfg);
    cfg.threads = 4;
    auto b = run(c, cfg);
    CHECK(a.readout == b.readout);
    CHECK(a.rms == b.rms);
    std::ostringstream sa, sb, ra, rb;
    write_rms_csv(sa, a);
    write_rms_csv(sb, b);
    write_runs_csv(ra, a);
    write_runs_csv(rb, b);
    CHECK(sa.str() == sb.str());
    CHECK(ra.str() == rb.str());
    CHECK(sa.str().rfind("time_s,rms_v\n", 0) == 0);
    CHECK(ra.str().rfind("time_s,run,node_v\n", 0) == 0);
    cfg.seed += 1;
    auto d = run(c, cfg);
    CHECK(d.readout != a.readout);
    // a run's stream depends on (seed, run) only
    cfg.seed -= 1;
    cfg.runs = 5;
    auto e = run(c, cfg);
    for (int r = 0; r < 5; ++r) CHECK(e.readout[r] == a.readout[r]);
}

TEST_CASE("time grid and readout bookkeeping", "[mcsim]") {
    McConfig cfg;
    cfg.runs = 3;
    cfg.periods = 2;
    auto mc = run(builtin("integrator"), cfg);
    REQUIRE(mc.time.size() == mc.rms.size());
    CHECK(mc.time.front() == 0.0);
    for (std::size_t i = 1; i < mc.time.size(); ++i) CHECK(mc.time[i] > mc.time[i - 1]);
    CHECK(mc.readout_time[0] == Catch::Approx(0.5 / 44400.0));
    CHECK(mc.readout_time[1] == Catch::Approx(1.5 / 44400.0));
    CHECK(mc.dt * mc.steps_per_phase == Catch::Approx(0.5 / 44400.0));
    // AUTO keeps dt at or below 1 / (20 |pole|max)
    CHECK(mc.dt <= 1.0 / (20.0 * mc.max_pole) * (1 + 1e-12));
}

TEST_CASE("settling warning", "[mcsim]") {
    auto c = parse("fs 1meg\nphases p1 p2\nground g\nvsrc V in 0\nswitch S in x phase=p1 gon=1n\nswitch S2 x y phase=p2 gon=1n\ncap C x g 1p\ncap C2 y g 1p\nreadout y g phase=p1\n");
    McConfig cfg;
    cfg.runs = 2;
    cfg.periods = 1;
    cfg.dt = 1e-8;
    auto mc = run(c, cfg);
    REQUIRE_FALSE(mc.warnings.empty());
    CHECK_THAT(mc.warnings[0], Catch::Matchers::ContainsSubstring("Ron\xC2\xB7" "C or Ceq/Gm not \xE2\x89\xAA T/2"));
    auto ok = run(builtin("passive-lp-a1"), cfg);
    CHECK(ok.warnings.empty());
}

TEST_CASE("halving dt moves the stationary RMS by less than the standard error", "[mcsim]") {
    // coupled paths: each coarse step is driven by the sum of the two fine-step draws
    auto c = parse(held_network("x g"));
    auto s = compile_phase(phase_view(c, "p1"), 300);
    double pmax = 0;
    for (auto p : poles(s)) pmax = std::max(pmax, std::abs(p));
    const double dt = 1.0 / (20.0 * pmax);
    auto coarse = make_stepper(s, dt);
    auto fine = make_stepper(s, dt / 2);
    const int runs = 1000, steps = 4000, n = coarse.n, m = coarse.m;
    Normal normal;
    double sc = 0, sf = 0;
    for (int r = 0; r < runs; ++r) {
        Rng rng = run_rng(3, static_cast<std::uint64_t>(r));
        std::vector<double> vc(n, 0.0), vf(n, 0.0), tmp(n), z1(m), z2(m), zc(m);
        for (int k = 0; k < steps; ++k) {
            for (int i = 0; i < m; ++i) {
                z1[i] = normal(rng);
                z2[i] = normal(rng);
                zc[i] = (z1[i] + z2[i]) / std::sqrt(2.0);
            }
            auto apply = [&](const PhaseStepper& st, std::vector<double>& v, const std::vector<double>& z) {
                for (int i = 0; i < n; ++i) {
                    double acc = 0;
                    for (int j = 0; j < n; ++j) acc += st.a[i * n + j] * v[j];
                    for (int q = 0; q < m; ++q) acc += st.b[i * m + q] * z[q];
                    tmp[i] = acc;
                }
                v.swap(tmp);
            };
            apply(coarse, vc, zc);
            apply(fine, vf, z1);
            apply(fine, vf, z2);
        }
        sc += vc[0] * vc[0];
        sf += vf[0] * vf[0];
    }
    const double rc = std::sqrt(sc / runs), rf = std::sqrt(sf / runs);
    CHECK(std::abs(rc - rf) < standard_error(rf, runs));
    CHECK(rf == Catch::Approx(std::sqrt(variance(extract(c, "p1", {"x", "g"}), 300).value())).epsilon(0.1));
}

TEST_CASE("comparison table", "[mcsim]") {
    auto c = builtin("passive-lp-a1");
    McConfig cfg;
    cfg.runs = 200;
    cfg.periods = 6;
    auto mc = run(c, cfg);
    auto r = report(c, 6, 300);
    auto t = compare(r, mc);
    REQUIRE(t.rows.size() == 6);
    CHECK(t.rows[0].analytic_rms == 0.0);
    CHECK(t.rows[0].mc_rms == 0.0);
    CHECK(t.rows[0].pass);
    auto again = compare(r, run(c, cfg));
    for (std::size_t k = 0; k < 6; ++k) CHECK(again.rows[k].mc_rms == t.rows[k].mc_rms);
    CHECK_THROWS_WITH(compare(report(c, 5, 300), mc), Catch::Matchers::ContainsSubstring("periods"));
    // a wrong analytic value is caught on every converged period
    for (auto& v : r.series) v *= 1.5;
    auto bad = compare(r, mc);
    CHECK_FALSE(bad.pass);
    CHECK(bad.failing.front() == 2);
    CHECK(converged_from(report(c, 6, 300)) == 1 + static_cast<int>(std::ceil(std::log(1e-3) / std::log(0.25))));
}
