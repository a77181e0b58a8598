// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [path-to-ldosim-binary]

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ldosim/analysis.hpp"
#include "ldosim/app.hpp"
#include "ldosim/ldo.hpp"
#include "ldosim/metrics.hpp"
#include "ldosim/transient.hpp"

using namespace ldosim;
namespace fs = std::filesystem;

namespace {

/// Collects failed checks of one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

bool within_rel(double value, double reference, double rel) { return std::abs(value - reference) <= rel * std::abs(reference); }

void metric_identities(Check& c) {
    const double tr = response_time(160e-12, 0.100, 15e-3);
    c.expect(within_rel(tr, 1.0667e-9, 1e-4), "response_time = " + num(tr));
    c.expect(within_rel(tr, 1.07e-9, 0.01), "response_time vs reference 1.07 ns");
    const double f = fom(tr, 3e-6, 15e-3);
    c.expect(within_rel(f, 0.2133e-12, 1e-3), "fom = " + num(f));
    c.expect(within_rel(f, 0.21e-12, 0.03), "fom vs reference 0.21 ps");
    const double eff = current_efficiency(15e-3, 3e-6);
    c.expect(std::abs(eff * 100 - 99.98) <= 0.005, "efficiency = " + num(eff * 100) + " %");
    const double red = iq_reduction(42e-6, 3e-6);
    c.expect(red == 14.0, "iq_reduction = " + num(red));
}

void solver_oracles(Check& c) {
    using cd = std::complex<double>;
    constexpr double pi = std::numbers::pi;
    const double r1 = 1e3, c1 = 1e-9, r2 = 4.7e3, c2 = 220e-12;
    Circuit net;
    const auto src = net.add_element(VSource{NodeId{1}, kGround, 0.0, 1.0});
    net.add_element(Resistor{NodeId{1}, NodeId{2}, r1});
    net.add_element(Capacitor{NodeId{2}, kGround, c1});
    const FrequencySweep sweep{1.0, 1e9, 20};
    double worst1 = 0.0;
    const auto one = ac_sweep(net, sweep, src, NodeId{2});
    for (std::size_t i = 0; i < one.size(); ++i) {
        const cd s(0.0, 2 * pi * one.freqsHz[i]);
        const cd h = 1.0 / (1.0 + s * r1 * c1);
        worst1 = std::max(worst1, std::abs(one.values[i] - h) / std::abs(h));
    }
    net.add_element(Resistor{NodeId{2}, NodeId{3}, r2});
    net.add_element(Capacitor{NodeId{3}, kGround, c2});
    double worst2 = 0.0;
    const auto two = ac_sweep(net, sweep, src, NodeId{3});
    for (std::size_t i = 0; i < two.size(); ++i) {
        const cd s(0.0, 2 * pi * two.freqsHz[i]);
        const cd h = 1.0 / (1.0 + s * (r1 * c1 + r2 * c2 + r1 * c2) + s * s * r1 * r2 * c1 * c2);
        worst2 = std::max(worst2, std::abs(two.values[i] - h) / std::abs(h));
    }
    c.expect(worst1 < 1e-9, "one-pole AC relative error " + num(worst1));
    c.expect(worst2 < 1e-9, "two-pole AC relative error " + num(worst2));

    // Square-law follower: vs = R k (vg - vth - vs)^2.
    const double vdd = 1.8, vg = 1.2, vth = 0.4, k = 2e-3, r = 5e3;
    Circuit fol;
    fol.add_element(VSource{NodeId{1}, kGround, vdd, 0.0});
    fol.add_element(VSource{NodeId{2}, kGround, vg, 0.0});
    fol.add_element(make_nonlinear_vccs(NodeId{2}, NodeId{3}, NodeId{1}, NodeId{3}, "square", {{"k", k}, {"vth", vth}}));
    fol.add_element(Resistor{NodeId{3}, kGround, r});
    const double a = r * k;
    const double u = (-1.0 + std::sqrt(1.0 + 4.0 * a * (vg - vth))) / (2.0 * a);
    const double dcErr = std::abs(dc_operating_point(fol).v(NodeId{3}) - (vg - vth - u));
    c.expect(dcErr < 1e-9, "DC quadratic error " + num(dcErr) + " V");

    // RC step, 1 ns edge, tau = 1 ms.
    Circuit rc;
    const auto v = rc.add_element(VSource{NodeId{1}, kGround, 0.0, 0.0});
    rc.add_element(Resistor{NodeId{1}, NodeId{2}, 1e3});
    rc.add_element(Capacitor{NodeId{2}, kGround, 1e-6});
    const std::vector<Stimulus> stim{Stimulus{v, {{0.0, 0.0}, {1e-9, 1.0}}, std::nullopt, false, "step"}};
    const auto trace = simulate(rc, stim, 5e-3, 1e-4, 1e-6, 1e-4);
    double worst = 0.0;
    for (std::size_t i = 0; i < trace.timesS.size(); ++i) {
        const double t = trace.timesS[i];
        const double exact = t < 1e-9 ? t / 1e-9 * (t / 1e-9) * 0.5e-9 / 1e-3 : 1.0 - std::exp(-(t - 0.5e-9) / 1e-3);
        worst = std::max(worst, std::abs(trace.voltage(NodeId{2})[i] - exact));
    }
    c.expect(worst < 1e-3, "RC transient error " + num(worst * 100) + " % of step");
}

void stability(Check& c, const LdoParams& p) {
    const FrequencySweep sweep{10.0, 1e10, 40};
    const auto low = loop_gain(build_small_signal(p, Mode::Low, 0.0), "overall", sweep, loop_options("overall"));
    const auto high = loop_gain(build_small_signal(p, Mode::High, 15e-3), "overall", sweep, loop_options("overall"));
    c.expect(low.ugbwHz && *low.ugbwHz >= 3e6 && *low.ugbwHz <= 6e6,
             "Low/no-load UGBW " + (low.ugbwHz ? num(*low.ugbwHz) : std::string("none")));
    c.expect(high.ugbwHz && *high.ugbwHz >= 120e6 && *high.ugbwHz <= 200e6,
             "High/15mA UGBW " + (high.ugbwHz ? num(*high.ugbwHz) : std::string("none")));
    const std::pair<Mode, double> points[] = {{Mode::Low, 0.0}, {Mode::Low, 500e-6}, {Mode::High, 5e-3}, {Mode::High, 15e-3}};
    for (const auto& [mode, load] : points) {
        const auto r = loop_gain(build_small_signal(p, mode, load), "overall", sweep, loop_options("overall"));
        c.expect(r.phaseMarginDeg && *r.phaseMarginDeg > 45.0,
                 "PM at " + num(load) + " A = " + (r.phaseMarginDeg ? num(*r.phaseMarginDeg) : std::string("none")));
    }
}

void buffer_property(Check& c, const LdoParams& p) {
    const FrequencySweep sweep{10.0, 1e10, 40};
    SmallSignalOptions noBuffer;
    noBuffer.gateBuffer = false;
    const auto with = loop_gain(build_small_signal(p, Mode::High, 15e-3), "overall", sweep, loop_options("overall"));
    const auto without = loop_gain(build_small_signal(p, Mode::High, 15e-3, noBuffer), "overall", sweep, loop_options("overall"));
    c.expect(with.phaseMarginDeg.has_value(), "no crossing with buffer");
    c.expect(!without.phaseMarginDeg || (with.phaseMarginDeg && *without.phaseMarginDeg < *with.phaseMarginDeg),
             "PM with buffer " + num(with.phaseMarginDeg.value_or(NAN)) + ", without " +
                 num(without.phaseMarginDeg.value_or(NAN)));
}

void psr_reproduction(Check& c, const LdoParams& p) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::pair<Mode, double> points[] = {{Mode::Low, 0.0}, {Mode::Low, 500e-6}, {Mode::High, 5e-3}, {Mode::High, 15e-3}};
    for (const auto& [mode, load] : points) {
        const auto circuit = build_small_signal(p, mode, load);
        // Start below 1 kHz so "all f <= 10 kHz" covers the flat region too.
        const auto r = psr(circuit, FrequencySweep{1.0, 1e7, 40}, *circuit.find_element("vin"), circuit.node("V_OUT"));
        const auto m = psr_margins(r, {1.0, 1e4}, {1.0, 1e7});
        c.expect(m.worstDbLow <= -40.0, to_string(mode) + " " + num(load) + " A: worst to 10 kHz " + num(m.worstDbLow) + " dB");
        c.expect(m.worstDbWide <= -32.0, to_string(mode) + " " + num(load) + " A: worst to 10 MHz " + num(m.worstDbWide) + " dB");
    }
    c.expect(seconds_since(t0) < 10.0, "PSR runtime " + num(seconds_since(t0)) + " s");
}

void transient_reproduction(Check& c, const LdoParams& p) {
    const auto t0 = std::chrono::steady_clock::now();
    const StepScenario sc;
    c.expect(sc.edgeS == 80e-9 && sc.loadHighA == 15e-3, "scenario is not the 0 -> 15 mA, 80 ns step");
    auto lt = build_transient(p, step_stimuli(p, sc));
    lt.options.tEndS = sc.endS;
    lt.options.tolRel = 1e-4;
    lt.options.tolAbsV = 1e-5;
    lt.options.maxStepS = 20e-9;
    const auto trace = simulate(lt.circuit, lt.stimuli, lt.options);
    const double runtime = seconds_since(t0);
    const auto ex = excursions(trace, lt.circuit, "V_OUT", p.vOutTargetV);
    c.expect(ex.undershootV >= 0.070 && ex.undershootV <= 0.130, "undershoot " + num(ex.undershootV * 1e3) + " mV");
    c.expect(ex.overshootV >= 0.040 && ex.overshootV <= 0.080, "overshoot " + num(ex.overshootV * 1e3) + " mV");
    const auto v = series(trace, lt.circuit, "V_OUT");
    std::size_t stop = 0;
    while (stop < trace.timesS.size() && trace.timesS[stop] <= sc.fallS) ++stop;
    const auto ts = settling_time(std::span(trace.timesS).first(stop), std::span(v).first(stop), p.vOutTargetV, 0.01, sc.riseS);
    c.expect(ts && *ts < 500e-9, "settling " + (ts ? num(*ts * 1e9) + " ns" : std::string("not settled")));
    c.expect(runtime < 30.0, "transient runtime " + num(runtime) + " s");
}

void iq_schedule(Check& c, const LdoParams& p) {
    c.expect(quiescent_current(p, Mode::Low, 0.0) == 3e-6, "IQ low");
    c.expect(quiescent_current(p, Mode::Low, 500e-6) == 3e-6, "IQ low at 500 uA");
    c.expect(quiescent_current(p, Mode::High, 5e-3) == 50e-6, "IQ at 5 mA");
    c.expect(quiescent_current(p, Mode::High, 15e-3) == 110e-6, "IQ at 15 mA");
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 15e-3);
    std::vector<double> loads(1000);
    for (auto& x : loads) x = u(rng);
    std::sort(loads.begin(), loads.end());
    double prev = 0.0;
    bool monotone = true;
    for (double load : loads) {
        const Mode mode = load <= p.loadLowMaxA ? Mode::Low : Mode::High;
        const double iq = quiescent_current(p, mode, load);
        monotone = monotone && iq >= prev;
        prev = iq;
    }
    c.expect(monotone, "IQ not monotone over 1000 random loads");
}

std::map<std::string, std::string> read_csvs(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") {
            std::ifstream f(e.path(), std::ios::binary);
            std::ostringstream s;
            s << f.rdbuf();
            out[e.path().filename().string()] = s.str();
        }
    return out;
}

void determinism(Check& c, const std::string& cli) {
    const auto base = fs::temp_directory_path() / "ldosim_acceptance";
    fs::remove_all(base);
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"a", "b"}) {
        const auto dir = base / name;
        const auto t0 = std::chrono::steady_clock::now();
        int status;
        if (cli.empty()) {
            RunConfig cfg;
            cfg.command = Command::Report;
            cfg.outDir = dir.string();
            status = run(cfg).exitStatus;
        } else {
            const std::string cmd = "\"" + cli + "\" report --out \"" + dir.string() + "\" > /dev/null";
            const int raw = std::system(cmd.c_str());
            status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        }
        const double runtime = seconds_since(t0);
        c.expect(status == kExitOk, std::string("report run ") + name + " exit status " + std::to_string(status));
        c.expect(runtime < 60.0, "report runtime " + num(runtime) + " s");
        runs.push_back(read_csvs(dir));
    }
    c.expect(!runs[0].empty(), "report wrote no CSV files");
    c.expect(runs[0].size() == runs[1].size(), "different CSV sets");
    for (const auto& [name, content] : runs[0]) {
        const auto it = runs[1].find(name);
        c.expect(it != runs[1].end() && it->second == content, name + " differs between runs");
    }
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const LdoParams p;

    struct Criterion {
        const char* name;
        std::function<void(Check&)> body;
    };
    const std::vector<Criterion> criteria{
        {"1 metric identities", [&](Check& c) { metric_identities(c); }},
        {"2 solver oracles", [&](Check& c) { solver_oracles(c); }},
        {"3 stability reproduction", [&](Check& c) { stability(c, p); }},
        {"4 buffer property", [&](Check& c) { buffer_property(c, p); }},
        {"5 PSR reproduction", [&](Check& c) { psr_reproduction(c, p); }},
        {"6 transient reproduction", [&](Check& c) { transient_reproduction(c, p); }},
        {"7 quiescent-current schedule", [&](Check& c) { iq_schedule(c, p); }},
        {"8 determinism", [&](Check& c) { determinism(c, cli); }},
    };

    int failed = 0;
    for (const auto& crit : criteria) {
        Check c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            crit.body(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const bool ok = c.failures.empty();
        failed += ok ? 0 : 1;
        std::printf("%s  criterion %s (%.2f s)\n", ok ? "PASS" : "FAIL", crit.name, seconds_since(t0));
        for (const auto& f : c.failures) std::printf("      %s\n", f.c_str());
    }
    return failed == 0 ? 0 : 1;
}
