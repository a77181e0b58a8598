#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ldosim/errors.hpp"
#include "ldosim/ldo.hpp"
#include "ldosim/metrics.hpp"

using namespace ldosim;

namespace {

const FrequencySweep kLoopSweep{10.0, 1e10, 40};

LoopGainResult measure(Mode mode, double load, const std::string& loop, const SmallSignalOptions& o = {}) {
    const LdoParams p;
    return loop_gain(build_small_signal(p, mode, load, o), loop, kLoopSweep, loop_options(loop));
}

double pole_hz(double r, double c) { return 1.0 / (2.0 * std::numbers::pi * r * c); }

}  // namespace

TEST_CASE("quiescent current schedule") {
    const LdoParams p;
    CHECK(quiescent_current(p, Mode::Low, 0.0) == 3e-6);
    CHECK(quiescent_current(p, Mode::Low, 100e-6) == 3e-6);
    CHECK(quiescent_current(p, Mode::High, 5e-3) == 50e-6);
    CHECK(quiescent_current(p, Mode::High, 15e-3) == 110e-6);
    CHECK(quiescent_current(p, Mode::High, 10e-3) == doctest::Approx(80e-6).epsilon(1e-12));
    CHECK(quiescent_current(p, Mode::High, 1e-3) == 50e-6);
    CHECK(quiescent_current(p, Mode::High, 40e-3) == 110e-6);
    CHECK_THROWS_AS(quiescent_current(p, Mode::Low, 1e-3), RangeError);
    CHECK_THROWS_AS(quiescent_current(p, Mode::High, -1e-6), ArgumentError);
}

TEST_CASE("quiescent current is monotone in load") {
    const LdoParams p;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> high(0.0, 20e-3), low(0.0, 500e-6);
    for (int i = 0; i < 1000; ++i) {
        const double a = high(rng), b = high(rng);
        CHECK(quiescent_current(p, Mode::High, std::min(a, b)) <= quiescent_current(p, Mode::High, std::max(a, b)));
        CHECK(quiescent_current(p, Mode::Low, low(rng)) == p.iqLowA);
    }
}

TEST_CASE("mode from V_EN") {
    CHECK(mode_from_ven(0.0, 1.5) == Mode::Low);
    CHECK(mode_from_ven(1.5, 1.5) == Mode::High);
    CHECK(mode_from_ven(0.76, 1.5) == Mode::High);
    CHECK(mode_from_ven(0.75, 1.5) == Mode::Low);
}

TEST_CASE("parameter file round trip and shipped defaults") {
    const LdoParams defaults;
    const LdoParams shipped = load_params(std::string(LDOSIM_SOURCE_DIR) + "/params/default.ldo");
    for (const auto& f : param_fields()) {
        CAPTURE(f.name);
        CHECK(shipped.*f.member == defaults.*f.member);
    }

    LdoParams odd;
    odd.gmEa1 = 1.0 / 3.0 * 1e-5;
    odd.cLoadF = 1.23456789012345e-10;
    const LdoParams back = params_from_kv(KvFile::parse(params_to_text(odd)));
    for (const auto& f : param_fields()) {
        CAPTURE(f.name);
        CHECK(back.*f.member == odd.*f.member);
    }
}

TEST_CASE("parameter file errors") {
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("gmEa1 = 1u\nbogus = 3\n")), ParseError);
    try {
        params_from_kv(KvFile::parse("gmEa1 = 1u\nbogus = 3\n"));
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("[x]\ngmEa1 = 1u\n")), ParseError);
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("gmEa1 = fast\n")), ParseError);
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("cLoadF = -1p\n")), ConfigError);
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("iqLowA = 60u\n")), ConfigError);
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("loadLowMaxA = 6m\n")), ConfigError);
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("bufferCurrentRatio = 0.5\n")), ConfigError);
    CHECK_THROWS_AS(params_from_kv(KvFile::parse("iEa2A = 3u\n")), ConfigError);
}

TEST_CASE("reference current is the same in both modes") {
    const LdoParams p;
    CHECK(stage_values(p, Mode::Low).iRefA == stage_values(p, Mode::High).iRefA);
    // The switched branches absorb the whole difference between the two budgets.
    const double b = bias_scale(p, Mode::High);
    CHECK(p.iRefA + b * (p.iqLowA - p.iRefA) == doctest::Approx(p.iqHighMaxA).epsilon(1e-12));
    CHECK(bias_scale(p, Mode::Low) == 1.0);
}

TEST_CASE("small-signal model structure and range errors") {
    const LdoParams p;
    const Circuit c = build_small_signal(p, Mode::High, 15e-3);
    for (const char* node : {"V_IN", "V_REF", "V_EA", "V_CTRL", "V_B", "V_D", "V_G", "V_OUT"}) CHECK_NOTHROW((void)c.node(node));
    for (const char* port : {"loop1", "loop2", "overall"}) CHECK(c.find_break_port(port).has_value());
    const auto& load = std::get<Resistor>(c.element(*c.find_element("load")));
    CHECK(load.ohms == doctest::Approx(80.0));

    try {
        build_small_signal(p, Mode::Low, 1e-3);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("Low") != std::string::npos);
    }
    try {
        build_small_signal(p, Mode::High, 1e-3);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("High") != std::string::npos);
    }
    CHECK_THROWS_AS(loop_options("loop3"), ArgumentError);
}

TEST_CASE("the V_CTRL pole dominates the amplifier loop") {
    // Single-node RC estimates from the same parameter record.
    const LdoParams p;
    const double ctrl = pole_hz(p.roEa2, p.cCompF);
    const double others[] = {pole_hz(p.roEa1, p.cEaF), pole_hz(p.roSense, p.cDrainF), pole_hz(p.roBuffer, p.cGateF),
                             pole_hz(p.roPassLow, p.cLoadF)};
    for (double o : others) CHECK(ctrl < o / 10.0);
}

TEST_CASE("overall loop bandwidth bands") {
    const auto low = measure(Mode::Low, 0.0, "overall");
    REQUIRE(low.ugbwHz);
    CHECK(*low.ugbwHz >= 3e6);
    CHECK(*low.ugbwHz <= 6e6);
    const auto high = measure(Mode::High, 15e-3, "overall");
    REQUIRE(high.ugbwHz);
    CHECK(*high.ugbwHz >= 120e6);
    CHECK(*high.ugbwHz <= 200e6);
}

TEST_CASE("phase margins above 45 degrees") {
    const std::pair<Mode, double> points[] = {{Mode::Low, 0.0}, {Mode::Low, 500e-6}, {Mode::High, 5e-3}, {Mode::High, 15e-3}};
    for (auto [mode, load] : points) {
        CAPTURE(to_string(mode));
        CAPTURE(load);
        const auto r = measure(mode, load, "overall");
        REQUIRE(r.phaseMarginDeg);
        CHECK(*r.phaseMarginDeg > 45.0);
    }
    for (auto [mode, load] : {points[0], points[3]})
        for (const char* loop : {"loop1", "loop2"}) {
            CAPTURE(loop);
            CAPTURE(load);
            const auto r = measure(mode, load, loop);
            REQUIRE(r.phaseMarginDeg);
            CHECK(*r.phaseMarginDeg > 45.0);
        }
}

TEST_CASE("inner loop is faster with less DC gain than the amplifier loop") {
    for (auto [mode, load] : {std::pair{Mode::Low, 500e-6}, std::pair{Mode::High, 15e-3}}) {
        const auto l1 = measure(mode, load, "loop1");
        const auto l2 = measure(mode, load, "loop2");
        REQUIRE(l1.ugbwHz);
        REQUIRE(l2.ugbwHz);
        CHECK(*l1.ugbwHz > *l2.ugbwHz);
        CHECK(l1.dcGainDb < l2.dcGainDb);
    }
}

TEST_CASE("the gate buffer improves phase margin") {
    SmallSignalOptions bypass;
    bypass.gateBuffer = false;
    const std::pair<Mode, double> points[] = {{Mode::Low, 0.0}, {Mode::Low, 500e-6}, {Mode::High, 5e-3}, {Mode::High, 15e-3}};
    for (auto [mode, load] : points) {
        CAPTURE(load);
        const auto with = measure(mode, load, "overall");
        const auto without = measure(mode, load, "overall", bypass);
        REQUIRE(with.phaseMarginDeg);
        REQUIRE(without.phaseMarginDeg);
        CHECK(*without.phaseMarginDeg < *with.phaseMarginDeg);
    }
}

TEST_CASE("supply rejection limits in both modes") {
    const LdoParams p;
    const FrequencySweep sweep{1e3, 1e7, 40};
    const std::pair<Mode, double> points[] = {{Mode::Low, 0.0}, {Mode::Low, 500e-6}, {Mode::High, 5e-3}, {Mode::High, 15e-3}};
    for (auto [mode, load] : points) {
        CAPTURE(load);
        const Circuit c = build_small_signal(p, mode, load);
        const auto m = psr_margins(psr(c, sweep, *c.find_element("vin"), c.node("V_OUT")));
        CHECK(m.worstDbLow <= -40.0);
        CHECK(m.worstDbWide <= -32.0);
    }
}

TEST_CASE("large-signal model linearizes to the small-signal model") {
    const LdoParams p;
    SmallSignalOptions sink;
    sink.load = LoadModel::CurrentSink;
    for (auto [mode, load] : {std::pair{Mode::Low, 0.0}, std::pair{Mode::High, 15e-3}}) {
        CAPTURE(to_string(mode));
        const Circuit big = build_transient_circuit(p, mode, load);
        const OperatingPoint op = dc_operating_point(big);
        CHECK(op.v(big.node("V_OUT")) == doctest::Approx(p.vOutTargetV).epsilon(1e-3 / 1.2));
        const Circuit lin = linearize(big, op);
        const Circuit small = build_small_signal(p, mode, load, sink);
        for (const char* name : {"ea1", "ea2", "sense", "steer", "buffer", "pass"}) {
            CAPTURE(name);
            const auto a = std::get<Vccs>(lin.element(*lin.find_element(name))).siemens;
            const auto b = std::get<Vccs>(small.element(*small.find_element(name))).siemens;
            CHECK(a == doctest::Approx(b).epsilon(0.01));
        }
        for (const char* name : {"ro_ea1", "ro_ea2", "ro_sense", "ro_pass"}) {
            CAPTURE(name);
            CHECK(std::get<Resistor>(lin.element(*lin.find_element(name))).ohms ==
                  std::get<Resistor>(small.element(*small.find_element(name))).ohms);
        }
    }
}

TEST_CASE("transient model needs V_EN and regulates at no load") {
    const LdoParams p;
    CHECK_THROWS_AS(build_transient(p, LdoStimuli{}), ConfigError);

    LdoStimuli s;
    s.enableV = {{0.0, 0.0}};
    auto t = build_transient(p, s);
    t.options.tEndS = 2e-6;
    t.options.maxStepS = 50e-9;
    const auto trace = simulate(t.circuit, t.stimuli, t.options);
    const auto v = series(trace, t.circuit, "V_OUT");
    CHECK(v.back() == doctest::Approx(p.vOutTargetV).epsilon(1e-3 / 1.2));
    CHECK(trace.events.empty());
}

TEST_CASE("step stimuli timing") {
    const LdoParams p;
    StepScenario sc;
    const auto s = step_stimuli(p, sc);
    REQUIRE(s.loadA.size() == 5);
    CHECK(s.loadA[2].t == doctest::Approx(sc.riseS + sc.edgeS));
    CHECK(s.loadA[2].value == sc.loadHighA);
    // V_EN drops only after the load has come back down.
    CHECK(s.enableV.back().t > s.loadA.back().t);
    sc.fallS = sc.riseS;
    CHECK_THROWS_AS(step_stimuli(p, sc), ConfigError);
}
