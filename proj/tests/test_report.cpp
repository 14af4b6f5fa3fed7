#include <catch_amalgamated.hpp>

#include "scnoise/builtin.hpp"
#include "scnoise/report_json.hpp"

using namespace scnoise;
using nlohmann::json;

TEST_CASE("passive report document", "[report]") {
    auto c = builtin("passive-lp-a1");
    auto j = report_json(c, report(c, 10, 300));
    CHECK(j["tool"]["name"] == "scnoise");
    CHECK(j["circuit"]["name"] == "passive-lp-a1");
    CHECK(j["circuit"]["fs_hz"] == 44400.0);
    CHECK(j["circuit"]["capacitors"][0]["value_f"] == 5e-12);
    CHECK(j["noise"]["rms_ss_v"].get<double>() == Catch::Approx(28.78e-6).epsilon(1e-3));
    CHECK(j["noise"]["series_v2"].size() == 10);
    CHECK(j["plan"]["lambda"].get<double>() == Catch::Approx(0.5));
    CHECK(j["bode"][0]["c_inf_prime_f"] == "INFINITE");
    CHECK(j["bode"].back()["role"] == "direct");
    CHECK(j["frequency"]["kind"] == "passive-lp");
    CHECK(j["mc"].is_null());
    CHECK(json::parse(j.dump()) == j);
}

TEST_CASE("divergent report document", "[report]") {
    auto c = builtin("integrator");
    auto j = report_json(c, report(c, 100, 300));
    CHECK(j["noise"]["divergent"] == true);
    CHECK(j["noise"]["rms_ss_v"].is_null());
    CHECK(j["noise"]["theta_sw"].is_null());
    CHECK(std::sqrt(j["noise"]["direct_v2"].get<double>()) == Catch::Approx(40.7e-6).epsilon(0.01));
    CHECK(j["approx"]["slope_v2_per_period"].is_number());
    CHECK(j["frequency"]["fc_hz"].is_null());
}

TEST_CASE("unbounded report document", "[report]") {
    auto c = parse(R"(phases p1 p2
ground g
vsrc V in 0
switch S1 in x phase=p1
switch S2 x out phase=p2
switch S3 y g phase=p2
cap CA x g 1p
cap C out g 1p
memory C
readout out y phase=p1
)");
    auto r = report(c, 5, 300);
    CHECK(r.unbounded);
    auto j = report_json(c, r);
    CHECK(j["noise"]["unbounded"] == true);
    CHECK(j["noise"]["total_n_v2"].is_null());
    CHECK(j["bode"].back()["variance_v2"] == "UNBOUNDED");
    CHECK(j["bode"][0]["variance_v2"].is_number());
}

TEST_CASE("monte-carlo summary document", "[report]") {
    auto c = builtin("passive-lp-a1");
    McConfig cfg;
    cfg.runs = 20;
    cfg.periods = 3;
    auto mc = run(c, cfg);
    auto t = compare(report(c, 3, 300), mc);
    auto j = mc_json(mc, cfg, &t);
    CHECK(j["runs"] == 20);
    CHECK(j["readout_rms_v"].size() == 3);
    CHECK(j["comparison"]["rows"].size() == 3);
    CHECK(j["dt_s"].get<double>() == mc.dt);
}
