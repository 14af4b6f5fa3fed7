#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scnoise/netlist.hpp"

namespace scnoise {

struct BuiltinExample {
    std::string name;
    std::string description;
    std::string text;
};

// Switch and OTA conductances are chosen so every phase settles to ~1e-4
// within T/2 at fs = 44.4 kHz while keeping the MC step count small. Analytic
// results do not depend on them.
inline const std::vector<BuiltinExample>& builtin_texts() {
    static const std::vector<BuiltinExample> list = {
        {"passive-lp-a1",
         "passive SC first-order low-pass, C = aC = 5 pF; steady state 28.8 uV rms",
         R"(# passive SC low-pass, alpha = 1
circuit passive-lp-a1
temp 300
fs 44.4k
phases p1 p2
ground gnd
vsrc VIN in 0
switch S1 in x phase=p1 gon=4u
switch S2 x out phase=p2 gon=4u
cap CA x gnd 5p
cap C out gnd 5p
memory C
readout out gnd phase=p1
)"},
        {"passive-lp-a4",
         "passive SC first-order low-pass, alpha = 1/4, C = 20 pF; slow staircase to 14.4 uV rms",
         R"(# passive SC low-pass, alpha = 1/4
circuit passive-lp-a4
temp 300
fs 44.4k
phases p1 p2
ground gnd
vsrc VIN in 0
switch S1 in x phase=p1 gon=4u
switch S2 x out phase=p2 gon=4u
cap CA x gnd 5p
cap C out gnd 20p
memory C
readout out gnd phase=p1
)"},
        {"integrator",
         "stray-insensitive non-inverting SC integrator, alpha = 0.1, C = CL = 5 pF, Cin = 20 fF; sqrt(n) growth, direct 40.7 uV rms",
         R"(# stray-insensitive SC integrator
circuit integrator
temp 300
fs 44.4k
phases p1 p2
ground gnd
vsrc VIN in 0
switch S1A in a phase=p1 gon=3u
switch S1B a gnd phase=p2 gon=3u
switch S2A b gnd phase=p1 gon=3u
switch S2B b vg phase=p2 gon=3u
cap CA a b 0.5p
cap C vg out 5p
cap CIN vg gnd 20f
cap CL out gnd 5p
ota A1 in=vg out=out gm=6u gamma=2
readout out gnd phase=p1
)"},
        {"active-lp",
         "OTA-based SC first-order low-pass, alpha = 0.1, C = CL = 5 pF, Cin = 20 fF, gamma = 2; 58 uV rms (40.2 uV at gamma = 0)",
         R"(# OTA-based SC low-pass
circuit active-lp
temp 300
fs 44.4k
phases p1 p2
ground gnd
vsrc VIN in 0
switch S1A in a phase=p1 gon=3u
switch S1B a gnd phase=p2 gon=3u
switch S2A b gnd phase=p1 gon=3u
switch S2B b vg phase=p2 gon=3u
switch S3A c gnd phase=p1 gon=3u
switch S3B c vg phase=p2 gon=3u
switch S4A d gnd phase=p1 gon=3u
switch S4B d out phase=p2 gon=3u
cap C1 a b 0.5p
cap C2 c d 0.5p
cap C vg out 5p
cap CIN vg gnd 20f
cap CL out gnd 5p
ota A1 in=vg out=out gm=6u gamma=2
readout out gnd phase=p1
)"},
        {"active-lp-small-cl",
         "OTA-based SC first-order low-pass with CL = 0.5 pF, gamma = 2; 133 uV rms",
         R"(# OTA-based SC low-pass, small load
circuit active-lp-small-cl
temp 300
fs 44.4k
phases p1 p2
ground gnd
vsrc VIN in 0
switch S1A in a phase=p1 gon=1.5u
switch S1B a gnd phase=p2 gon=1.5u
switch S2A b gnd phase=p1 gon=1.5u
switch S2B b vg phase=p2 gon=1.5u
switch S3A c gnd phase=p1 gon=1.5u
switch S3B c vg phase=p2 gon=1.5u
switch S4A d gnd phase=p1 gon=1.5u
switch S4B d out phase=p2 gon=1.5u
cap C1 a b 0.5p
cap C2 c d 0.5p
cap C vg out 5p
cap CIN vg gnd 20f
cap CL out gnd 0.5p
ota A1 in=vg out=out gm=1.5u gamma=2
readout out gnd phase=p1
)"},
    };
    return list;
}

inline std::vector<std::pair<std::string, Circuit>> builtin_examples() {
    std::vector<std::pair<std::string, Circuit>> out;
    for (const auto& e : builtin_texts()) out.emplace_back(e.name, parse(e.text));
    return out;
}

inline const BuiltinExample* find_builtin(const std::string& name) {
    for (const auto& e : builtin_texts())
        if (e.name == name) return &e;
    return nullptr;
}

inline Circuit builtin(const std::string& name) {
    const auto* e = find_builtin(name);
    if (!e) throw Error("unknown builtin example '" + name + "'");
    return parse(e->text);
}

}  // namespace scnoise
