#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "ldosim/analysis.hpp"
#include "ldosim/errors.hpp"
#include "mna.hpp"

using namespace ldosim;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

Circuit rc_lowpass(double r, double c) {
    Circuit ckt;
    ckt.add_element(VSource{NodeId{1}, kGround, 0.0, 1.0}, "Vin");
    ckt.add_element(Resistor{NodeId{1}, NodeId{2}, r});
    ckt.add_element(Capacitor{NodeId{2}, kGround, c});
    return ckt;
}

}  // namespace

TEST_CASE("dc: symmetric divider") {
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, 1.5, 0.0});
    c.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    c.add_element(Resistor{NodeId{2}, kGround, 1e3});
    const auto op = dc_operating_point(c);
    CHECK(op.v(NodeId{2}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(op.branchCurrents[0] == doctest::Approx(-0.75e-3).epsilon(1e-9));
}

TEST_CASE("dc: sourceless network sits at zero") {
    Circuit c;
    c.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    c.add_element(Resistor{NodeId{2}, kGround, 1e3});
    c.add_element(Capacitor{NodeId{1}, kGround, 1e-9});
    const auto op = dc_operating_point(c);
    for (double v : op.nodeVoltages) CHECK(v == 0.0);
}

TEST_CASE("dc: square-law follower against the closed-form quadratic") {
    // Source follower: i = k (vg - vs - vth)^2 drawn from the supply into the
    // source node, which is loaded by R to ground.
    const double vdd = 1.8, vg = 1.2, vth = 0.4, k = 2e-3, r = 5e3;
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, vdd, 0.0});
    c.add_element(VSource{NodeId{2}, kGround, vg, 0.0});
    c.add_element(make_nonlinear_vccs(NodeId{2}, NodeId{3}, NodeId{1}, NodeId{3}, "square", {{"k", k}, {"vth", vth}}));
    c.add_element(Resistor{NodeId{3}, kGround, r});
    // vs = R k u^2 with u = vg - vth - vs  =>  R k u^2 + u - (vg - vth) = 0
    const double a = r * k;
    const double u = (-1.0 + std::sqrt(1.0 + 4.0 * a * (vg - vth))) / (2.0 * a);
    const double expected = vg - vth - u;
    const auto op = dc_operating_point(c);
    CHECK(std::abs(op.v(NodeId{3}) - expected) < 1e-9);
    CHECK(kcl_residual(c, op) < 1e-12);
}

TEST_CASE("dc: singular Jacobian names the node") {
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, 1.0, 0.0});
    c.add_element(Capacitor{NodeId{1}, NodeId{2}, 1e-9});
    c.add_element(Capacitor{NodeId{2}, kGround, 1e-9});
    try {
        (void)dc_operating_point(c);
        FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
        CHECK(std::string(e.what()).find("node 2") != std::string::npos);
    }
}

TEST_CASE("dc: non-convergence reports the residual") {
    // Positive feedback through a tanh stage with no stable solution reachable in 2 iterations.
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, 1.0, 0.0});
    c.add_element(make_nonlinear_vccs(NodeId{1}, kGround, kGround, NodeId{2}, "tanh", {{"gm", 1.0}, {"imax", 1e-3}}));
    c.add_element(make_nonlinear_vccs(NodeId{2}, kGround, kGround, NodeId{3}, "tanh", {{"gm", 1.0}, {"imax", 1e-3}}));
    c.add_element(Resistor{NodeId{2}, kGround, 1e6});
    c.add_element(Resistor{NodeId{3}, kGround, 1e6});
    DcOptions opts;
    opts.maxIter = 2;
    opts.sourceStepping = false;
    CHECK_THROWS_AS((void)dc_operating_point(c, opts), ConvergenceError);
}

TEST_CASE("ac: one-pole RC at its corner") {
    const double r = 1e3, cap = 1e-6;
    const double fc = 1.0 / (2.0 * kPi * r * cap);
    const Circuit c = rc_lowpass(r, cap);
    const auto v = ac_solve(c, fc);
    CHECK(20.0 * std::log10(std::abs(v[2])) == doctest::Approx(-3.0103).epsilon(1e-4));
    CHECK(std::arg(v[2]) * 180.0 / kPi == doctest::Approx(-45.0).epsilon(1e-9));
    CHECK(fc == doctest::Approx(159.155).epsilon(1e-5));

    const auto low = ac_sweep(c, FrequencySweep{1e-3, 1.0, 10}, ElementId{0}, NodeId{2});
    CHECK(std::abs(low.magnitude_db().front()) < 1e-6);
}

TEST_CASE("ac: one- and two-pole ladders against the symbolic transfer functions") {
    const double r1 = 1e3, c1 = 1e-9, r2 = 4.7e3, c2 = 220e-12;
    Circuit c = rc_lowpass(r1, c1);
    const FrequencySweep sweep{10.0, 1e8, 7};
    auto one = ac_sweep(c, sweep, ElementId{0}, NodeId{2});
    REQUIRE(one.size() == 50);
    for (std::size_t i = 0; i < one.size(); ++i) {
        const cd s(0.0, 2.0 * kPi * one.freqsHz[i]);
        const cd h = 1.0 / (1.0 + s * r1 * c1);
        CHECK(std::abs(one.values[i] - h) / std::abs(h) < 1e-9);
    }
    c.add_element(Resistor{NodeId{2}, NodeId{3}, r2});
    c.add_element(Capacitor{NodeId{3}, kGround, c2});
    auto two = ac_sweep(c, sweep, ElementId{0}, NodeId{3});
    for (std::size_t i = 0; i < two.size(); ++i) {
        const cd s(0.0, 2.0 * kPi * two.freqsHz[i]);
        const cd h = 1.0 / (1.0 + s * (r1 * c1 + r2 * c2 + r1 * c2) + s * s * r1 * r2 * c1 * c2);
        CHECK(std::abs(two.values[i] - h) / std::abs(h) < 1e-9);
    }
}

TEST_CASE("ac: sweep grid includes both ends and is increasing") {
    const auto g = FrequencySweep{1e3, 1e7, 40}.grid();
    CHECK(g.front() == 1e3);
    CHECK(g.back() == 1e7);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    CHECK_THROWS_AS((void)FrequencySweep({10.0, 1.0, 10}).grid(), ArgumentError);
    CHECK_THROWS_AS((void)FrequencySweep({1.0, 10.0, 0}).grid(), ArgumentError);
}

TEST_CASE("ac: doubling the source doubles the response") {
    Circuit c = rc_lowpass(1e3, 1e-9);
    c.add_element(Vccs{NodeId{2}, kGround, NodeId{3}, kGround, 2e-3});
    c.add_element(Resistor{NodeId{3}, kGround, 1e4});
    const FrequencySweep sweep{1e3, 1e8, 10};
    const auto base = ac_solve(c, 1e5);
    std::get<VSource>(c.element(ElementId{0})).acMagnitudeVolts = 2.0;
    const auto twice = ac_solve(c, 1e5);
    for (std::size_t n = 1; n < base.size(); ++n) CHECK(std::abs(twice[n] - 2.0 * base[n]) <= 1e-12 * std::abs(base[n]));
}

TEST_CASE("ac: passive stamps are symmetric") {
    Circuit c;
    c.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    c.add_element(Resistor{NodeId{2}, NodeId{3}, 2e3});
    c.add_element(Capacitor{NodeId{1}, NodeId{3}, 1e-9});
    c.add_element(Capacitor{NodeId{3}, kGround, 2e-9});
    c.add_element(Resistor{NodeId{1}, kGround, 3e3});
    const detail::MnaLayout layout(c);
    ComplexMatrix a;
    std::vector<cd> b;
    detail::assemble_complex(c, layout, 2.0 * kPi * 1e5, a, b);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a(i, j) == a(j, i));
}

TEST_CASE("ac: negligible capacitance matches the resistive solve") {
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, 1.0, 1.0});
    c.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    c.add_element(Resistor{NodeId{2}, kGround, 3e3});
    c.add_element(Capacitor{NodeId{2}, kGround, 1e-30});
    const auto v = ac_solve(c, 1.0);
    CHECK(std::abs(v[2] - cd(0.75, 0.0)) < 1e-9 * 0.75);
}

TEST_CASE("ac: resistive two-port reciprocity") {
    // Transfer impedance a->b equals b->a for a passive network.
    Circuit base;
    base.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    base.add_element(Resistor{NodeId{2}, NodeId{3}, 2.2e3});
    base.add_element(Resistor{NodeId{1}, kGround, 4.7e3});
    base.add_element(Resistor{NodeId{2}, kGround, 10e3});
    base.add_element(Resistor{NodeId{3}, kGround, 3.3e3});
    Circuit ab = base;
    ab.add_element(ISource{kGround, NodeId{1}, 0.0, 1.0});
    Circuit ba = base;
    ba.add_element(ISource{kGround, NodeId{3}, 0.0, 1.0});
    CHECK(std::abs(ac_solve(ab, 1.0)[3] - ac_solve(ba, 1.0)[1]) < 1e-12 * std::abs(ac_solve(ab, 1.0)[3]));
}

TEST_CASE("ac: singular system reports the frequency") {
    Circuit c;
    c.add_element(ISource{kGround, NodeId{1}, 0.0, 1.0});
    c.add_element(Capacitor{NodeId{1}, NodeId{2}, 1e-9});
    c.add_element(Vccs{NodeId{1}, kGround, NodeId{2}, kGround, 0.0});
    try {
        (void)ac_sweep(c, FrequencySweep{1e3, 1e4, 1}, ElementId{0}, NodeId{1});
        FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
        CHECK(std::string(e.what()).find("Hz") != std::string::npos);
    }
}

namespace {

/// Integrator loop: gm drawn from `out` by the forward node, C at `out`,
/// unity feedback through the break (out -> fwd).
Circuit integrator_loop(double gm, double c) {
    Circuit ckt;
    ckt.add_element(Vccs{NodeId{2}, kGround, NodeId{1}, kGround, gm});
    ckt.add_element(Capacitor{NodeId{1}, kGround, c});
    ckt.add_element(Resistor{NodeId{1}, kGround, 1e15});
    ckt.add_element(BreakPort{NodeId{1}, NodeId{2}, "loop"});
    return ckt;
}

}  // namespace

TEST_CASE("loop gain: single integrator crosses at gm/(2 pi C) with 90 degrees") {
    const double gm = 1e-3, c = 35.368e-12;
    const auto res = loop_gain(integrator_loop(gm, c), "loop", FrequencySweep{1e3, 1e9, 40});
    REQUIRE(res.ugbwHz);
    CHECK(*res.ugbwHz == doctest::Approx(gm / (2.0 * kPi * c)).epsilon(1e-3));
    CHECK(*res.ugbwHz == doctest::Approx(4.50e6).epsilon(2e-3));
    CHECK(*res.phaseMarginDeg == doctest::Approx(90.0).epsilon(1e-3));
}

TEST_CASE("loop gain: resistive loop below unity has no crossing") {
    Circuit c;
    c.add_element(Vccs{NodeId{2}, kGround, NodeId{1}, kGround, 0.5e-3});
    c.add_element(Resistor{NodeId{1}, kGround, 1e3});
    c.add_element(BreakPort{NodeId{1}, NodeId{2}, "loop"});
    const auto res = loop_gain(c, "loop", FrequencySweep{1.0, 1e6, 10});
    CHECK(res.dcGainDb == doctest::Approx(20.0 * std::log10(0.5)).epsilon(1e-9));
    CHECK_FALSE(res.ugbwHz);
    CHECK_FALSE(res.phaseMarginDeg);
}

TEST_CASE("loop gain: two-pole loop against the analytic margin") {
    const double gm1 = 1e-3, r1 = 1e6, c1 = 1e-9;  // pole at 159 Hz
    const double gm2 = 1e-3, r2 = 1e3, c2 = 1e-12;  // pole at 159 MHz
    Circuit c;
    c.add_element(Vccs{NodeId{3}, kGround, kGround, NodeId{1}, gm1});  // non-inverting into node 1
    c.add_element(Resistor{NodeId{1}, kGround, r1});
    c.add_element(Capacitor{NodeId{1}, kGround, c1});
    c.add_element(Vccs{NodeId{1}, kGround, NodeId{2}, kGround, gm2});  // inverting into node 2
    c.add_element(Resistor{NodeId{2}, kGround, r2});
    c.add_element(Capacitor{NodeId{2}, kGround, c2});
    c.add_element(BreakPort{NodeId{2}, NodeId{3}, "loop"});
    const auto res = loop_gain(c, "loop", FrequencySweep{1.0, 1e10, 40});

    const double a0 = gm1 * r1 * gm2 * r2;
    const double p1 = 1.0 / (2.0 * kPi * r1 * c1), p2 = 1.0 / (2.0 * kPi * r2 * c2);
    auto mag = [&](double f) { return a0 / std::sqrt((1 + f * f / (p1 * p1)) * (1 + f * f / (p2 * p2))); };
    double lo = p1, hi = 1e10;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        (mag(mid) > 1.0 ? lo : hi) = mid;
    }
    const double fu = lo;
    const double pmExact = 180.0 - std::atan(fu / p1) * 180.0 / kPi - std::atan(fu / p2) * 180.0 / kPi;
    REQUIRE(res.ugbwHz);
    CHECK(res.dcGainDb == doctest::Approx(20.0 * std::log10(mag(1.0))).epsilon(1e-9));
    CHECK(*res.ugbwHz == doctest::Approx(fu).epsilon(1e-2));
    CHECK(std::abs(*res.phaseMarginDeg - pmExact) < 1.0);
    CHECK(std::abs(*res.phaseMarginDeg - (90.0 - std::atan(fu / p2) * 180.0 / kPi)) < 1.0);
}

TEST_CASE("loop gain: independent of the test amplitude") {
    const Circuit c = integrator_loop(1e-3, 35.368e-12);
    LoopGainOptions unit, small;
    small.testAmplitude = 1e-3;
    const FrequencySweep sweep{1e3, 1e9, 20};
    const auto a = loop_gain(c, "loop", sweep, unit);
    const auto b = loop_gain(c, "loop", sweep, small);
    for (std::size_t i = 0; i < a.response.size(); ++i)
        CHECK(std::abs(a.response.values[i] - b.response.values[i]) <= 1e-9 * std::abs(a.response.values[i]));
}

TEST_CASE("loop gain: missing label and driven forward node are structural errors") {
    const Circuit c = integrator_loop(1e-3, 1e-12);
    CHECK_THROWS_AS((void)loop_gain(c, "nope", FrequencySweep{}), StructuralError);
    Circuit driven = c;
    driven.add_element(VSource{NodeId{2}, kGround, 0.0, 0.0});
    CHECK_THROWS_AS((void)loop_gain(driven, "loop", FrequencySweep{}), StructuralError);
}

TEST_CASE("psr: follower without feedback passes the supply") {
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, 1.5, 1.0}, "Vin");
    c.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    c.add_element(Resistor{NodeId{2}, kGround, 1e9});
    const auto r = psr(c, FrequencySweep{1e3, 1e7, 10}, ElementId{0}, NodeId{2});
    CHECK(std::abs(r.magnitude_db().front()) < 1e-3);
}

TEST_CASE("psr: very large loop gain suppresses the supply") {
    // Supply couples through r to the output; a huge transconductance servoes the output to ground.
    Circuit c;
    c.add_element(VSource{NodeId{1}, kGround, 1.5, 1.0}, "Vin");
    c.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    c.add_element(Vccs{NodeId{2}, kGround, NodeId{2}, kGround, 1e3});
    const auto r = psr(c, FrequencySweep{1e3, 1e4, 10}, ElementId{0}, NodeId{2});
    CHECK(r.magnitude_db().front() <= -100.0);
    Circuit isrc;
    isrc.add_element(ISource{kGround, NodeId{1}, 0.0, 1.0});
    isrc.add_element(Resistor{NodeId{1}, kGround, 1.0});
    CHECK_THROWS_AS((void)psr(isrc, FrequencySweep{}, ElementId{0}, NodeId{1}), ArgumentError);
}

TEST_CASE("ac csv layout") {
    const auto r = ac_sweep(rc_lowpass(1e3, 1e-6), FrequencySweep{1.0, 10.0, 1}, ElementId{0}, NodeId{2});
    const std::string csv = to_csv(r);
    CHECK(csv.rfind("freq_hz,re,im,mag_db,phase_deg\n1.00000000e+00,", 0) == 0);
}
