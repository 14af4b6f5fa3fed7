#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scnoise/bode.hpp"
#include "scnoise/capnet.hpp"
#include "scnoise/errors.hpp"
#include "scnoise/netlist.hpp"

namespace scnoise {

struct Injection {
    std::string phase;
    Port port;
    std::string cap;            // locus: capacitor the charge is pinned on
    double conv_cap = 0.0;      // F
    double prop_coeff = 0.0;    // memory charge at period end per unit injected
    bool from_directive = false;
};

struct NoisePlan {
    std::string memory;
    std::vector<Injection> injections;
    double lambda = 0.0;
    double readout_gain = 0.0;  // readout volts per coulomb on the memory cap
};

struct Recursion {
    double lambda = 0.0;
    double inj_var = 0.0;  // C^2 per period
    double mem_cap = 0.0;
    bool divergent = false;
};

struct InjectionTerm {
    Injection injection;
    BodeCaps caps;
    Variance voltage;       // V^2 across the port
    double charge_var = 0.0;  // C^2 reaching the memory per period
    double beta_sw = 0.0;   // charge_var / (kT C_mem), switch part
    double beta_ota = 0.0;  // same, per unit gamma
};

struct PeriodInjection {
    std::vector<InjectionTerm> terms;
    double total = 0.0;
    bool unbounded = false;
};

// Small-alpha closed forms for the recognized stage patterns.
struct SmallAlpha {
    std::string pattern;
    std::optional<double> sampled_ss;  // V^2
    std::optional<double> slope;       // V^2 per period (integrator)
    double direct = 0.0;               // V^2
    double total = 0.0;                // V^2 (steady state, or at n for the integrator)
};

struct NoiseReport {
    NoisePlan plan;
    std::vector<InjectionTerm> terms;
    Recursion recursion;
    int periods = 0;
    double sampled_n = 0.0;
    std::optional<double> sampled_ss;
    Variance direct;
    BodeCaps direct_caps;
    double total_n = 0.0;
    std::optional<double> total_ss;
    double rms_n = 0.0;
    std::optional<double> rms_ss;
    bool divergent = false;
    bool unbounded = false;
    // normalized to kT*C_mem (beta) and kT/C_mem (theta)
    double beta_sw = 0.0;
    double beta_ota = 0.0;
    std::optional<double> theta_sw;
    std::optional<double> theta_ota;
    double theta_direct = 0.0;
    std::vector<double> series;  // total readout variance seen in periods 1..n
    std::optional<SmallAlpha> approx;
    double temperature = 0.0;
};

struct StagePattern {
    std::string kind;  // passive-lp | integrator | active-lp
    std::string memory;
    double c = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;  // damping cap ratio (active-lp)
    double c_in = 0.0;
    double c_l = 0.0;
    double gamma = 0.0;
};

struct FrequencyMeta {
    std::string kind;
    std::vector<double> num;  // coefficients of z^-k
    std::vector<double> den;
    std::optional<double> fc;
};

// ============================================================================
// Topology helpers
// ============================================================================

namespace detail {

inline std::size_t next_phase(const Circuit& c, std::size_t p) { return (p + 1) % c.phases.size(); }

// Capacitors owning a terminal node that carries only them plus switches.
inline std::vector<std::pair<std::string, std::vector<std::string>>> switched_caps(const Circuit& c) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto& cap : c.capacitors) {
        std::vector<std::string> plates;
        for (const auto& n : {cap.a, cap.b}) {
            if (c.is_fixed(n)) continue;
            bool ota_pin = false;
            for (const auto& o : c.otas) ota_pin = ota_pin || o.input == n || o.output == n;
            if (ota_pin) continue;
            int ncap = 0, nsw = 0;
            for (const auto& k : c.capacitors) ncap += (k.a == n) + (k.b == n);
            for (const auto& s : c.switches) nsw += (s.a == n) + (s.b == n);
            if (ncap == 1 && nsw > 0) plates.push_back(n);
        }
        if (!plates.empty()) out.emplace_back(cap.name, plates);
    }
    return out;
}

inline bool parallel_in(const PhaseView& pv, const Capacitor& x, const Capacitor& y) {
    const Circuit& c = *pv.circuit;
    auto lab = phase_supernodes(pv);
    int xa = lab[c.node_index(x.a)], xb = lab[c.node_index(x.b)];
    int ya = lab[c.node_index(y.a)], yb = lab[c.node_index(y.b)];
    return xa != xb && ((xa == ya && xb == yb) || (xa == yb && xb == ya));
}

inline ChargeState run_phases(const Circuit& c, ChargeState q, std::size_t from, std::size_t to) {
    for (std::size_t p = from; p < to; ++p) q = redistribute(phase_view(c, c.phases[p]), q);
    return q;
}

}  // namespace detail

// memory charge after pinning unit charge on `cap` at the end of `phase` and
// finishing the period
inline double propagation(const Circuit& c, const std::string& memory, const std::string& phase, const std::string& cap) {
    auto p = static_cast<std::size_t>(c.phase_index(phase));
    ChargeState q;
    try {
        q = settle(phase_view(c, phase), zero_charges(c), {{cap, 1.0}}).charges;
    } catch (const AnalysisError&) {
        throw AnalysisError("injected charge on " + cap + " cannot be balanced in phase " + phase +
                            ": no other capacitor shares its floating plate");
    }
    q = detail::run_phases(c, q, p + 1, c.phases.size());
    return q.at(memory);
}

inline std::optional<StagePattern> recognize(const Circuit& c);

// ============================================================================
// Plan
// ============================================================================

inline NoisePlan build_plan(const Circuit& c) {
    if (c.otas.size() > 1) throw AnalysisError("noise plan supports at most one OTA (found " + std::to_string(c.otas.size()) + ")");
    auto mem = memory_capacitor(c);
    if (!mem) throw AnalysisError("no memory capacitor found; add a 'memory <cap>' statement");
    NoisePlan plan;
    plan.memory = *mem;
    const Capacitor& mcap = *c.find_capacitor(*mem);

    if (!c.injections.empty()) {
        for (const auto& d : c.injections) {
            Injection inj;
            inj.phase = d.phase;
            inj.port = d.port;
            inj.cap = d.cap;
            inj.conv_cap = c.find_capacitor(d.cap)->value;
            inj.from_directive = true;
            plan.injections.push_back(inj);
        }
    } else {
        auto switched = detail::switched_caps(c);
        for (std::size_t p = 0; p < c.phases.size(); ++p) {
            const std::string& ph = c.phases[p];
            const std::string& nx = c.phases[detail::next_phase(c, p)];
            auto pv = phase_view(c, ph);
            std::vector<std::string> sampling;
            for (const auto& [name, plates] : switched) {
                bool samples = false;
                for (const auto& sw : c.switches) {
                    bool touches = false;
                    for (const auto& n : plates) touches = touches || sw.a == n || sw.b == n;
                    if (touches && sw.closed(ph) && !sw.closed(nx)) samples = true;
                }
                if (samples) sampling.push_back(name);
            }
            bool into_memory = false;
            for (const auto& s : sampling)
                if (s == mcap.name || detail::parallel_in(pv, *c.find_capacitor(s), mcap)) into_memory = true;
            if (into_memory) sampling = {mcap.name};
            for (const auto& s : sampling) {
                const Capacitor& x = *c.find_capacitor(s);
                Injection inj;
                inj.phase = ph;
                inj.port = {x.a, x.b};
                inj.cap = x.name;
                inj.conv_cap = x.value;
                plan.injections.push_back(inj);
            }
        }
    }
    for (auto& inj : plan.injections) inj.prop_coeff = propagation(c, plan.memory, inj.phase, inj.cap);

    ChargeState unit = zero_charges(c);
    unit[plan.memory] = 1.0;
    plan.lambda = detail::run_phases(c, unit, 0, c.phases.size()).at(plan.memory);

    if (c.injections.empty()) {
        // every state a period can leave behind must decay through the memory alone
        for (const auto& cap : c.capacitors) {
            ChargeState e = zero_charges(c);
            e[cap.name] = 1.0;
            auto v = detail::run_phases(c, e, 0, c.phases.size());
            auto w = detail::run_phases(c, v, 0, c.phases.size());
            double want = plan.lambda * v.at(plan.memory);
            double scale = 0.0;
            for (const auto& [k, x] : v) scale = std::max(scale, std::abs(x));
            if (std::abs(w.at(plan.memory) - want) > 1e-9 * std::max(scale, 1e-300))
                throw AnalysisError("ambiguous auto-plan: capacitor " + cap.name +
                                    " carries state across periods besides " + plan.memory +
                                    "; use explicit inject directives");
        }
    }

    if (c.readout) {
        ChargeState q = zero_charges(c);
        q[plan.memory] = 1.0;
        auto r = static_cast<std::size_t>(c.phase_index(c.readout->phase));
        q = detail::run_phases(c, q, 0, r);
        auto s = settle(phase_view(c, c.readout->phase), q);
        plan.readout_gain = s.voltages.at(c.readout->port.a) - s.voltages.at(c.readout->port.b);
    } else {
        plan.readout_gain = 1.0 / mcap.value;
    }
    return plan;
}

inline PeriodInjection period_injection(const Circuit& c, const NoisePlan& plan, double temperature) {
    PeriodInjection out;
    const double cm = c.find_capacitor(plan.memory)->value;
    for (const auto& inj : plan.injections) {
        InjectionTerm t;
        t.injection = inj;
        t.caps = extract(c, inj.phase, inj.port);
        t.voltage = variance(t.caps, temperature);
        const double w = inj.prop_coeff * inj.prop_coeff * inj.conv_cap * inj.conv_cap;
        if (t.voltage.is_unbounded()) {
            out.unbounded = true;
        } else {
            t.charge_var = w * t.voltage.value();
            out.total += t.charge_var;
        }
        auto d = decompose(t.caps);
        t.beta_sw = w * d.switch_part / cm;
        t.beta_ota = w * d.ota_part / cm;
        out.terms.push_back(t);
    }
    return out;
}

inline Recursion make_recursion(const NoisePlan& plan, double inj_var, double mem_cap) {
    Recursion r;
    r.lambda = plan.lambda;
    r.inj_var = inj_var;
    r.mem_cap = mem_cap;
    r.divergent = std::abs(std::abs(plan.lambda) - 1.0) <= 1e-9;
    return r;
}

inline double evolve(const Recursion& r, int n) {
    if (n <= 0) return 0.0;
    if (r.divergent) return n * r.inj_var;
    const double l2 = r.lambda * r.lambda;
    return r.inj_var / (1.0 - l2) * (1.0 - std::pow(l2, n));
}

inline std::optional<double> steady_state(const Recursion& r) {
    if (r.divergent || std::abs(r.lambda) > 1.0) return std::nullopt;
    return r.inj_var / (1.0 - r.lambda * r.lambda);
}

// ============================================================================
// Pattern recognition and small-alpha forms
// ============================================================================

inline std::optional<StagePattern> recognize(const Circuit& c) {
    if (c.otas.size() > 1 || c.phases.size() != 2) return std::nullopt;
    auto mem = memory_capacitor(c);
    if (!mem) return std::nullopt;
    const Capacitor& m = *c.find_capacitor(*mem);
    auto switched = detail::switched_caps(c);
    std::vector<const Capacitor*> plain, damping;
    for (const auto& [name, plates] : switched) {
        if (name == m.name) continue;
        const Capacitor* x = c.find_capacitor(name);
        bool par = false;
        for (const auto& p : c.phases) par = par || detail::parallel_in(phase_view(c, p), *x, m);
        (par ? damping : plain).push_back(x);
    }
    StagePattern s;
    s.memory = m.name;
    s.c = m.value;
    if (c.otas.empty()) {
        // the sampling cap shares charge with the memory, so it may show up as parallel
        if (c.capacitors.size() != 2 || plain.size() + damping.size() != 1) return std::nullopt;
        s.kind = "passive-lp";
        s.alpha1 = s.alpha2 = (plain.empty() ? damping : plain)[0]->value / m.value;
        return s;
    }
    const Ota& o = c.otas.front();
    std::size_t accounted = 1 + plain.size() + damping.size();
    for (const auto& cap : c.capacitors) {
        auto at = [&](const std::string& n) { return cap.a == n || cap.b == n; };
        bool to_gnd = c.is_fixed(cap.a) || c.is_fixed(cap.b);
        if (cap.name == m.name || !to_gnd) continue;
        if (at(o.input)) {
            s.c_in += cap.value;
            ++accounted;
        } else if (at(o.output)) {
            s.c_l += cap.value;
            ++accounted;
        }
    }
    if (accounted != c.capacitors.size() || plain.size() != 1) return std::nullopt;
    s.gamma = o.gamma;
    s.alpha1 = plain[0]->value / m.value;
    if (damping.empty()) {
        s.kind = "integrator";
        return s;
    }
    if (damping.size() != 1) return std::nullopt;
    s.kind = "active-lp";
    s.alpha2 = damping[0]->value / m.value;
    return s;
}

inline std::optional<FrequencyMeta> frequency_meta(const Circuit& c) {
    auto s = recognize(c);
    if (!s) return std::nullopt;
    FrequencyMeta f;
    f.kind = s->kind;
    const double two_pi = 2.0 * std::numbers::pi;
    if (s->kind == "passive-lp") {
        double a = s->alpha1;
        f.num = {0.0, a};
        f.den = {1.0 + a, -1.0};
        if (c.fs > 0) f.fc = a / (1.0 + a) * c.fs / two_pi;
    } else if (s->kind == "integrator") {
        f.num = {s->alpha1};
        f.den = {1.0, -1.0};
    } else {
        f.num = {0.0, s->alpha1};
        f.den = {1.0 + s->alpha2, -1.0};
        if (c.fs > 0) f.fc = s->alpha2 * c.fs / two_pi;
    }
    return f;
}

// n: periods for the integrator total
inline std::optional<SmallAlpha> small_alpha(const Circuit& c, int n, double temperature) {
    auto s = recognize(c);
    if (!s) return std::nullopt;
    const double kt = kBoltzmann * temperature;
    SmallAlpha a;
    a.pattern = s->kind;
    if (s->kind == "passive-lp") {
        a.sampled_ss = kt / s->c;
        a.total = *a.sampled_ss;
        return a;
    }
    const double al = s->c_l / s->c, ain = s->c_in / s->c, g = s->gamma;
    if (s->kind == "integrator") {
        const double al1 = s->alpha1;
        a.slope = kt * al1 / s->c * (1.0 + (al + ain + g * al1) / (al + al1 + ain));
        a.direct = g * kt / (s->c_l + s->c_in);
        a.total = n * *a.slope + a.direct;
        return a;
    }
    if (std::abs(s->alpha1 - s->alpha2) > 1e-9 * s->alpha1) return std::nullopt;
    const double al1 = s->alpha1;
    const double th_ota = (al1 + ain) * (al1 + ain) / (2.0 * al1 * (al + al1 + ain));
    const double th_sw = 1.0 + 0.5 * (1.0 + al * al / ((al + ain) * (al + al1 + ain)));
    const double th_dir = 1.0 / (al + ain);
    a.sampled_ss = kt / s->c * (g * th_ota + th_sw);
    a.direct = kt / s->c * g * th_dir;
    a.total = *a.sampled_ss + a.direct;
    return a;
}

// ============================================================================
// Report
// ============================================================================

inline NoiseReport report(const Circuit& c, int n, double temperature) {
    if (!c.readout) throw AnalysisError("no readout declared");
    if (n < 0) throw Error("period count must be >= 0");
    NoiseReport r;
    r.temperature = temperature;
    r.periods = n;
    // extraction first: a port coupled to several OTAs is the more specific error
    r.direct_caps = extract(c, c.readout->phase, c.readout->port);
    r.plan = build_plan(c);
    const double cm = c.find_capacitor(r.plan.memory)->value;
    auto inj = period_injection(c, r.plan, temperature);
    r.terms = inj.terms;
    r.recursion = make_recursion(r.plan, inj.total, cm);
    r.divergent = r.recursion.divergent;
    r.direct = variance(r.direct_caps, temperature);
    r.unbounded = inj.unbounded || r.direct.is_unbounded();
    for (const auto& t : r.terms) {
        r.beta_sw += t.beta_sw;
        r.beta_ota += t.beta_ota;
    }
    r.theta_direct = cm * decompose(r.direct_caps).ota_part;
    if (r.unbounded) return r;

    const double g2 = r.plan.readout_gain * r.plan.readout_gain;
    const double direct = r.direct.value();
    r.sampled_n = g2 * evolve(r.recursion, n);
    r.total_n = r.sampled_n + direct;
    r.rms_n = std::sqrt(r.total_n);
    if (auto q = steady_state(r.recursion)) {
        r.sampled_ss = g2 * *q;
        r.total_ss = *r.sampled_ss + direct;
        r.rms_ss = std::sqrt(*r.total_ss);
        const double amp = g2 * cm * cm / (1.0 - r.recursion.lambda * r.recursion.lambda);
        r.theta_sw = amp * r.beta_sw;
        r.theta_ota = amp * r.beta_ota;
    }
    r.series.reserve(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) r.series.push_back(g2 * evolve(r.recursion, k - 1) + direct);
    r.approx = small_alpha(c, n, temperature);
    return r;
}

}  // namespace scnoise
