#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <json.hpp>

#include "scnoise/bode.hpp"
#include "scnoise/mcsim.hpp"
#include "scnoise/netlist.hpp"
#include "scnoise/noiseplan.hpp"

namespace scnoise {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

using nlohmann::json;

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json ext(const ExtCap& c) { return c.is_infinite() ? json("INFINITE") : json(c.value()); }

inline json var(const Variance& v) { return v.is_unbounded() ? json("UNBOUNDED") : json(v.value()); }

inline json port(const Port& p) { return json::array({p.a, p.b}); }

inline json bode_json(const BodeCaps& b, const Variance& v, const std::string& role) {
    json j;
    j["role"] = role;
    j["phase"] = b.phase;
    j["port"] = port(b.port);
    j["c_inf_f"] = ext(b.c_inf);
    j["c_inf_prime_f"] = ext(b.c_inf_prime);
    j["c_zero_f"] = ext(b.c_zero);
    j["hfb"] = b.hfb;
    j["gamma_eff"] = b.gamma_eff;
    j["ota"] = b.ota ? json(*b.ota) : json(nullptr);
    j["variance_v2"] = var(v);
    json fi = json::array();
    for (const auto& f : b.feed_in) fi.push_back({{"cap", f.cap}, {"node", f.node}, {"beta", f.beta}});
    j["feed_in"] = fi;
    return j;
}

}  // namespace detail

inline nlohmann::json circuit_json(const Circuit& c) {
    using nlohmann::json;
    json j;
    j["name"] = c.name;
    j["temperature_k"] = c.temperature;
    j["fs_hz"] = c.fs > 0 ? json(c.fs) : json(nullptr);
    j["phases"] = c.phases;
    j["ground"] = c.ground;
    auto mem = memory_capacitor(c);
    j["memory"] = mem ? json(*mem) : json(nullptr);
    j["readout"] = c.readout ? json{{"phase", c.readout->phase}, {"port", detail::port(c.readout->port)}} : json(nullptr);
    json caps = json::array(), sws = json::array(), otas = json::array(), srcs = json::array();
    for (const auto& x : c.capacitors) caps.push_back({{"name", x.name}, {"a", x.a}, {"b", x.b}, {"value_f", x.value}});
    for (const auto& x : c.switches)
        sws.push_back({{"name", x.name}, {"a", x.a}, {"b", x.b}, {"closed_in", x.closed_in}, {"gon_s", x.gon}});
    for (const auto& x : c.otas)
        otas.push_back({{"name", x.name}, {"input", x.input}, {"output", x.output}, {"gm_s", x.gm}, {"gamma", x.gamma}});
    for (const auto& x : c.sources) srcs.push_back({{"name", x.name}, {"node", x.node}, {"dc_v", x.dc}});
    j["capacitors"] = caps;
    j["switches"] = sws;
    j["otas"] = otas;
    j["sources"] = srcs;
    return j;
}

inline nlohmann::json report_json(const Circuit& c, const NoiseReport& r) {
    using nlohmann::json;
    using detail::opt;
    json j;
    j["tool"] = {{"name", "scnoise"}, {"version", kVersion}};
    j["circuit"] = circuit_json(c);

    if (auto f = frequency_meta(c))
        j["frequency"] = {{"kind", f->kind}, {"num", f->num}, {"den", f->den}, {"fc_hz", opt(f->fc)}};
    else
        j["frequency"] = nullptr;

    json bode = json::array();
    for (const auto& t : r.terms) bode.push_back(detail::bode_json(t.caps, t.voltage, "injection"));
    bode.push_back(detail::bode_json(r.direct_caps, r.direct, "direct"));
    j["bode"] = bode;

    json inj = json::array();
    for (const auto& t : r.terms) {
        const auto& i = t.injection;
        inj.push_back({{"phase", i.phase},
                       {"port", detail::port(i.port)},
                       {"cap", i.cap},
                       {"conv_cap_f", i.conv_cap},
                       {"prop_coeff", i.prop_coeff},
                       {"explicit", i.from_directive},
                       {"voltage_var_v2", detail::var(t.voltage)},
                       {"charge_var_c2", t.charge_var},
                       {"beta_sw", t.beta_sw},
                       {"beta_ota", t.beta_ota}});
    }
    j["plan"] = {{"memory", r.plan.memory},
                 {"lambda", r.plan.lambda},
                 {"readout_gain_v_per_c", r.plan.readout_gain},
                 {"injections", inj}};

    json n;
    n["periods"] = r.periods;
    n["divergent"] = r.divergent;
    n["unbounded"] = r.unbounded;
    n["inj_var_c2"] = r.recursion.inj_var;
    n["direct_v2"] = detail::var(r.direct);
    if (r.unbounded) {
        n["sampled_n_v2"] = nullptr;
        n["total_n_v2"] = nullptr;
        n["rms_n_v"] = nullptr;
        n["series_v2"] = json::array();
    } else {
        n["sampled_n_v2"] = r.sampled_n;
        n["total_n_v2"] = r.total_n;
        n["rms_n_v"] = r.rms_n;
        n["series_v2"] = r.series;
    }
    n["sampled_ss_v2"] = opt(r.sampled_ss);
    n["total_ss_v2"] = opt(r.total_ss);
    n["rms_ss_v"] = opt(r.rms_ss);
    n["beta_sw"] = r.beta_sw;
    n["beta_ota"] = r.beta_ota;
    n["theta_sw"] = opt(r.theta_sw);
    n["theta_ota"] = opt(r.theta_ota);
    n["theta_direct"] = std::isfinite(r.theta_direct) ? json(r.theta_direct) : json(nullptr);
    j["noise"] = n;

    if (r.approx)
        j["approx"] = {{"pattern", r.approx->pattern},
                       {"sampled_ss_v2", opt(r.approx->sampled_ss)},
                       {"slope_v2_per_period", opt(r.approx->slope)},
                       {"direct_v2", r.approx->direct},
                       {"total_v2", r.approx->total},
                       {"rms_v", std::sqrt(r.approx->total)}};
    else
        j["approx"] = nullptr;
    j["mc"] = nullptr;
    return j;
}

inline nlohmann::json mc_json(const TraceEnsemble& mc, const McConfig& cfg, const ComparisonTable* cmp = nullptr) {
    using nlohmann::json;
    json j;
    j["runs"] = mc.runs;
    j["periods"] = mc.periods;
    j["seed"] = cfg.seed;
    j["dt_s"] = mc.dt;
    j["steps_per_phase"] = mc.steps_per_phase;
    j["max_pole_rad_s"] = mc.max_pole;
    j["readout_time_s"] = mc.readout_time;
    j["readout_rms_v"] = mc.readout_rms;
    j["warnings"] = mc.warnings;
    if (cmp) {
        json rows = json::array();
        for (const auto& r : cmp->rows)
            rows.push_back({{"period", r.period},
                            {"analytic_rms_v", r.analytic_rms},
                            {"mc_rms_v", r.mc_rms},
                            {"rel_err", r.rel_err},
                            {"se_v", r.se},
                            {"pass", r.pass}});
        j["comparison"] = {{"pass", cmp->pass}, {"failing_periods", cmp->failing}, {"rows", rows}};
    } else {
        j["comparison"] = nullptr;
    }
    return j;
}

}  // namespace scnoise
