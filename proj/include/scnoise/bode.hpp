#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scnoise/capnet.hpp"
#include "scnoise/errors.hpp"
#include "scnoise/netlist.hpp"

namespace scnoise {

struct FeedIn {
    std::string cap;    // capacitor hanging on the virtual ground
    std::string node;   // its far terminal
    double beta = 0.0;  // divider gain from that node to the OTA input
};

struct BodeCaps {
    ExtCap c_inf;
    ExtCap c_inf_prime;
    ExtCap c_zero;
    double hfb = 1.0;
    double gamma_eff = 0.0;
    std::optional<std::string> ota;  // coupled OTA, if any
    Port port;
    std::string phase;
    std::vector<FeedIn> feed_in;
};

class Variance {
public:
    Variance() = default;
    static Variance of(double v) {
        Variance x;
        x.value_ = v;
        return x;
    }
    static Variance unbounded() {
        Variance x;
        x.unbounded_ = true;
        return x;
    }
    bool is_unbounded() const { return unbounded_; }
    double value() const {
        if (unbounded_) throw Error("Variance: value() on UNBOUNDED");
        return value_;
    }
    double as_double() const { return unbounded_ ? std::numeric_limits<double>::infinity() : value_; }

private:
    bool unbounded_ = false;
    double value_ = 0.0;
};

// V^2 = kT * (switch + gamma * ota), both in 1/F
struct BodeTerms {
    double switch_part = 0.0;
    double ota_part = 0.0;
};

namespace detail {

inline std::vector<Edge> source_shorts(const Circuit& c) {
    std::vector<Edge> e;
    for (const auto& s : c.sources) e.push_back({s.node, c.ground});
    return e;
}

inline std::vector<Edge> closed_shorts(const PhaseView& pv) {
    std::vector<Edge> e = source_shorts(*pv.circuit);
    for (auto i : pv.closed) e.push_back({pv.circuit->switches[i].a, pv.circuit->switches[i].b});
    return e;
}

}  // namespace detail

// Capacitance network with closed switches shorted and OTAs removed.
inline CapMatrix closed_network(const PhaseView& pv) {
    const Circuit& c = *pv.circuit;
    return build(c.nodes, c.capacitors, detail::closed_shorts(pv), c.ground);
}

// OTAs with a capacitive path (not through ground) to either port terminal.
inline std::vector<std::size_t> coupled_otas(const Circuit& c, const CapMatrix& mb, const Port& port) {
    std::vector<bool> stop(mb.size(), false);
    stop[mb.ground] = true;
    std::vector<bool> hit(mb.size(), false);
    for (const auto& n : {port.a, port.b}) {
        int s = mb.supernode(n);
        if (s == mb.ground) continue;
        for (int r : detail::reach(mb.matrix, s, stop))
            if (r != mb.ground) hit[r] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < c.otas.size(); ++i)
        if (hit[mb.supernode(c.otas[i].input)] || hit[mb.supernode(c.otas[i].output)]) out.push_back(i);
    return out;
}

// Capacitive feedback gain from the OTA output to its input.
inline double feedback_gain(const CapMatrix& mb, const Ota& o) {
    int si = mb.supernode(o.input), so = mb.supernode(o.output);
    if (si == so) return 1.0;
    if (si == mb.ground) throw AnalysisError("OTA " + o.name + " input tied to ground");
    if (so == mb.ground) throw AnalysisError("OTA " + o.name + " output tied to ground");
    return transfer_gain(mb, {{o.output, 1.0}}, o.input);
}

inline BodeCaps extract(const Circuit& c, const std::string& phase, const Port& port) {
    if (!c.has_node(port.a)) throw Error("undeclared port node '" + port.a + "'");
    if (!c.has_node(port.b)) throw Error("undeclared port node '" + port.b + "'");
    auto pv = phase_view(c, phase);
    BodeCaps b;
    b.port = port;
    b.phase = phase;

    auto ma = build(c.nodes, c.capacitors, detail::source_shorts(c), c.ground);
    auto mb = closed_network(pv);
    auto coupled = coupled_otas(c, mb, port);
    if (coupled.size() > 1) {
        std::string names;
        for (auto i : coupled) names += (names.empty() ? "" : ", ") + c.otas[i].name;
        throw AnalysisError("multi-OTA port unsupported: port (" + port.a + "," + port.b + ") in phase " + phase +
                            " couples to " + names);
    }
    auto shorts_c = detail::closed_shorts(pv);
    for (const auto& o : c.otas) shorts_c.push_back({o.output, c.ground});
    auto mc = build(c.nodes, c.capacitors, shorts_c, c.ground);

    b.c_inf = equivalent_capacitance(ma, port.a, port.b);
    b.c_inf_prime = equivalent_capacitance(mb, port.a, port.b);
    b.c_zero = equivalent_capacitance(mc, port.a, port.b);

    if (!coupled.empty()) {
        const Ota& o = c.otas[coupled.front()];
        b.ota = o.name;
        b.gamma_eff = o.gamma;
        b.hfb = feedback_gain(mb, o);
        int si = mb.supernode(o.input), so = mb.supernode(o.output);
        if (si != so) {
            for (const auto& cap : c.capacitors) {
                int sa = mb.supernode(cap.a), sb = mb.supernode(cap.b);
                int far = sa == si ? sb : (sb == si ? sa : -1);
                if (far < 0 || far == si || far == so || far == mb.ground) continue;
                const std::string& node = sa == si ? cap.b : cap.a;
                b.feed_in.push_back({cap.name, node, transfer_gain(mb, {{node, 1.0}, {o.output, 0.0}}, o.input)});
            }
        }
    }
    return b;
}

inline BodeTerms decompose(const BodeCaps& b) {
    BodeTerms t;
    t.switch_part = b.c_inf.reciprocal() - b.c_inf_prime.reciprocal();
    t.ota_part = (b.c_inf_prime.reciprocal() - b.c_zero.reciprocal()) / b.hfb;
    return t;
}

inline Variance variance(const BodeCaps& b, double temperature) {
    if (b.c_inf.is_zero()) return Variance::unbounded();
    const double kt = kBoltzmann * temperature;
    const double r = b.gamma_eff / b.hfb;
    const double i_inf = b.c_inf.reciprocal(), i_p = b.c_inf_prime.reciprocal(), i_0 = b.c_zero.reciprocal();
    double v = kt * (i_inf + (r - 1.0) * i_p - r * i_0);
    double scale = kt * (i_inf + (r + 1.0) * i_p + r * i_0);
    if (v < -1e-9 * scale)
        throw AnalysisError("inconsistent extraction at port (" + b.port.a + "," + b.port.b + ") phase " + b.phase);
    return Variance::of(std::max(v, 0.0));
}

inline Variance direct_noise(const Circuit& c, const std::string& phase, const Port& out_port, double temperature) {
    return variance(extract(c, phase, out_port), temperature);
}

}  // namespace scnoise
