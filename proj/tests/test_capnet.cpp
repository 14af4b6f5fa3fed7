#include <random>

#include <catch_amalgamated.hpp>

#include "scnoise/builtin.hpp"
#include "scnoise/capnet.hpp"
#include "oracles.hpp"

using namespace scnoise;

using namespace oracle;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("equivalent capacitance against Laplacian pseudoinverse on 200 random networks", "[capnet]") {
    std::mt19937_64 rng(20240611);
    int checked = 0, disconnected = 0;
    for (int t = 0; t < 200; ++t) {
        auto net = random_net(rng);
        Oracle o(net);
        auto m = build(net.nodes, net.caps, {}, "g");
        const int n = static_cast<int>(net.nodes.size());
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                auto cab = equivalent_capacitance(m, net.nodes[a], net.nodes[b]);
                auto cba = equivalent_capacitance(m, net.nodes[b], net.nodes[a]);
                REQUIRE_FALSE(cab.is_infinite());
                // symmetry
                CHECK(rel(cab.value(), cba.value()) < 1e-12);
                double want = o.ceq(a, b);
                if (want == 0.0) {
                    CHECK(cab.is_zero());
                    ++disconnected;
                } else {
                    CHECK(rel(cab.value(), want) < 1e-9);
                }
                ++checked;
            }
    }
    CHECK(checked > 1000);
    CHECK(disconnected > 0);
}

TEST_CASE("parallel, series and monotonicity laws on random networks", "[capnet]") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> val(0.1, 10.0);
    for (int t = 0; t < 200; ++t) {
        auto net = random_net(rng);
        const int n = static_cast<int>(net.nodes.size());
        std::uniform_int_distribution<int> pick(0, n - 1);
        int a = pick(rng), b = pick(rng);
        if (a == b) b = (a + 1) % n;
        const auto& na = net.nodes[a];
        const auto& nb = net.nodes[b];
        double base = equivalent_capacitance(build(net.nodes, net.caps, {}, "g"), na, nb).value();

        // parallel: a direct cap adds exactly
        double x = val(rng) * 1e-12;
        auto par = net.caps;
        par.push_back({"XP", na, nb, x});
        CHECK(rel(equivalent_capacitance(build(net.nodes, par, {}, "g"), na, nb).value(), base + x) < 1e-9);

        // series: a fresh node hung off b through x
        auto ser = net.caps;
        ser.push_back({"XS", nb, "fresh", x});
        auto nodes = net.nodes;
        nodes.push_back("fresh");
        double s = equivalent_capacitance(build(nodes, ser, {}, "g"), na, "fresh").value();
        double want = base == 0.0 ? 0.0 : 1.0 / (1.0 / base + 1.0 / x);
        CHECK(std::abs(s - want) <= 1e-9 * std::max(want, 1e-15));

        // monotonicity: growing any capacitor never lowers C_eq
        if (!net.caps.empty()) {
            std::uniform_int_distribution<std::size_t> pc(0, net.caps.size() - 1);
            auto grown = net.caps;
            grown[pc(rng)].value *= 1.0 + val(rng);
            double g = equivalent_capacitance(build(net.nodes, grown, {}, "g"), na, nb).value();
            CHECK(g >= base * (1.0 - 1e-12));
        }

        // shorting the port gives INFINITE
        CHECK(equivalent_capacitance(build(net.nodes, net.caps, {{na, nb}}, "g"), na, nb).is_infinite());
    }
}

TEST_CASE("transfer gain against the effective-resistance identity", "[capnet]") {
    std::mt19937_64 rng(4242);
    int checked = 0;
    for (int t = 0; t < 200; ++t) {
        auto net = random_net(rng);
        Oracle o(net);
        const int n = static_cast<int>(net.nodes.size());
        auto m = build(net.nodes, net.caps, {}, "g");
        for (int k = 1; k < n; ++k)
            for (int obs = 1; obs < n; ++obs) {
                if (obs == k || o.comp[k] != o.comp[0] || o.comp[obs] != o.comp[0]) continue;
                // node k held at 1 V, ground at 0: phi_obs = (R_k0 + R_o0 - R_ko) / (2 R_k0)
                double want = (o.resistance(k, 0) + o.resistance(obs, 0) - o.resistance(k, obs)) / (2.0 * o.resistance(k, 0));
                double got = transfer_gain(m, {{net.nodes[k], 1.0}}, net.nodes[obs]);
                CHECK(std::abs(got - want) < 1e-9);
                // linear in the drive
                CHECK(std::abs(transfer_gain(m, {{net.nodes[k], 3.0}}, net.nodes[obs]) - got) < 1e-12);
                ++checked;
            }
    }
    CHECK(checked > 300);
}

TEST_CASE("capacitive divider and error cases", "[capnet]") {
    std::vector<Capacitor> caps = {{"C1", "a", "m", 1e-12}, {"C2", "m", "g", 3e-12}};
    auto m = build(caps, {}, "g");
    CHECK(transfer_gain(m, {{"a", 1.0}}, "m") == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(equivalent_capacitance(m, "a", "g").value() == Catch::Approx(0.75e-12).epsilon(1e-14));
    CHECK_THROWS_WITH(transfer_gain(m, {{"a", 1.0}}, "a"), Catch::Matchers::ContainsSubstring("is driven"));
    CHECK_THROWS_WITH(transfer_gain(m, {{"a", 0.0}}, "m"), Catch::Matchers::ContainsSubstring("zero total excitation"));
    auto iso = build({{"C1", "a", "m", 1e-12}, {"C2", "p", "q", 1e-12}}, {}, "g");
    CHECK_THROWS_WITH(transfer_gain(iso, {{"a", 1.0}}, "p"), Catch::Matchers::ContainsSubstring("indeterminate node"));
    CHECK(ExtCap::infinite().reciprocal() == 0.0);
    CHECK(std::isinf(ExtCap::of(0.0).reciprocal()));
    CHECK_THROWS_AS(ExtCap::infinite().value(), Error);
}

TEST_CASE("redistribution conserves supernode charge on random switched networks", "[capnet]") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> q(-1e-12, 1e-12), coin(0.0, 1.0);
    int checked = 0;
    for (int t = 0; t < 200; ++t) {
        auto net = random_net(rng);
        Circuit c;
        c.phases = {"p1"};
        c.ground = "g";
        c.nodes = net.nodes;
        c.capacitors = net.caps;
        const int n = static_cast<int>(net.nodes.size());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (coin(rng) < 0.15)
                    c.switches.push_back({"S" + std::to_string(i) + "_" + std::to_string(j), net.nodes[i], net.nodes[j], {"p1"}, 1e-3});
        ChargeState q0;
        double qmax = 0.0;
        for (const auto& cap : c.capacitors) {
            q0[cap.name] = q(rng);
            qmax = std::max(qmax, std::abs(q0[cap.name]));
        }
        if (c.capacitors.empty()) continue;
        auto pv = phase_view(c, "p1");
        auto s = settle(pv, q0);
        int ns = 0;
        auto lab = phase_supernodes(pv, &ns);
        std::vector<double> before(static_cast<std::size_t>(ns), 0.0), after(before);
        for (const auto& cap : c.capacitors) {
            int a = lab[c.node_index(cap.a)], b = lab[c.node_index(cap.b)];
            before[a] += q0[cap.name];
            before[b] -= q0[cap.name];
            after[a] += s.charges[cap.name];
            after[b] -= s.charges[cap.name];
            // every capacitor sits at its settled voltage
            CHECK(std::abs(s.charges[cap.name] - cap.value * (s.voltages[cap.a] - s.voltages[cap.b])) <= 1e-12 * qmax);
        }
        for (int k = 1; k < ns; ++k) CHECK(std::abs(after[k] - before[k]) <= 1e-12 * qmax);
        ++checked;
    }
    CHECK(checked > 150);
}

TEST_CASE("charge sharing and OTA charge transfer", "[capnet]") {
    auto a1 = builtin("passive-lp-a1");
    auto s = settle(phase_view(a1, "p2"), {{"CA", 1.0}, {"C", 0.0}});
    CHECK(s.charges["CA"] == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(s.charges["C"] == Catch::Approx(0.5).epsilon(1e-14));

    // integrator: whatever sits on CA at the end of p1 lands on C in p2
    auto in = builtin("integrator");
    auto t = settle(phase_view(in, "p2"), {{"CA", 1e-13}, {"C", 0.0}, {"CIN", 0.0}, {"CL", 0.0}});
    CHECK(std::abs(t.charges["CA"]) < 1e-28);
    CHECK(std::abs(t.charges["C"]) == Catch::Approx(1e-13).epsilon(1e-12));
    CHECK(t.voltages["vg"] == 0.0);

    // held capacitors keep their charge
    auto h = settle(phase_view(a1, "p2"), zero_charges(a1), {{"C", 1.0}});
    CHECK(h.charges["C"] == 1.0);
    CHECK(h.charges["CA"] == Catch::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("settle errors name the OTA", "[capnet]") {
    auto c = parse(R"(phases p1
ground g
cap CI a g 1p
cap CL o g 1p
ota A in=a out=o gm=1m gamma=1
)");
    auto q = zero_charges(c);
    q["CI"] = 1e-12;
    CHECK_THROWS_WITH(settle(phase_view(c, "p1"), q), Catch::Matchers::ContainsSubstring("A"));
    CHECK_THROWS_AS(settle(phase_view(c, "p1"), {{"nope", 1.0}}), Error);
}
