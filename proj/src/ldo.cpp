#include "ldosim/ldo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ldosim/errors.hpp"
#include "ldosim/units.hpp"

namespace ldosim {

std::string to_string(Mode mode) { return mode == Mode::Low ? "Low" : "High"; }

const std::vector<ParamField>& param_fields() {
    static const std::vector<ParamField> fields{
        {"vInV", &LdoParams::vInV},
        {"vOutTargetV", &LdoParams::vOutTargetV},
        {"vRefV", &LdoParams::vRefV},
        {"cCompF", &LdoParams::cCompF},
        {"cLoadF", &LdoParams::cLoadF},
        {"gmEa1", &LdoParams::gmEa1},
        {"roEa1", &LdoParams::roEa1},
        {"cEaF", &LdoParams::cEaF},
        {"gmEa2", &LdoParams::gmEa2},
        {"roEa2", &LdoParams::roEa2},
        {"gmSense", &LdoParams::gmSense},
        {"roSense", &LdoParams::roSense},
        {"cDrainF", &LdoParams::cDrainF},
        {"gmCtrl", &LdoParams::gmCtrl},
        {"bufferCurrentRatio", &LdoParams::bufferCurrentRatio},
        {"bufferPullUpMaxA", &LdoParams::bufferPullUpMaxA},
        {"bufferPullDownMaxA", &LdoParams::bufferPullDownMaxA},
        {"roBuffer", &LdoParams::roBuffer},
        {"gmPassLow", &LdoParams::gmPassLow},
        {"gmPassHigh", &LdoParams::gmPassHigh},
        {"roPassLow", &LdoParams::roPassLow},
        {"roPassHigh", &LdoParams::roPassHigh},
        {"vthV", &LdoParams::vthV},
        {"cGateF", &LdoParams::cGateF},
        {"iRefA", &LdoParams::iRefA},
        {"iEa1A", &LdoParams::iEa1A},
        {"iEa2A", &LdoParams::iEa2A},
        {"iqLowA", &LdoParams::iqLowA},
        {"iqHighMinA", &LdoParams::iqHighMinA},
        {"iqHighMaxA", &LdoParams::iqHighMaxA},
        {"loadLowMaxA", &LdoParams::loadLowMaxA},
        {"loadHighMinA", &LdoParams::loadHighMinA},
        {"loadHighMaxA", &LdoParams::loadHighMaxA},
        {"iqConventionalA", &LdoParams::iqConventionalA},
    };
    return fields;
}

namespace {

double pass_reference_current(const LdoParams& p, Mode mode, double gmRo) {
    const double load = mode == Mode::Low ? 0.0 : p.loadHighMaxA;
    const double sink = p.sense_current() * bias_scale(p, mode);
    return load + sink - (p.vInV - p.vOutTargetV) / gmRo;
}

}  // namespace

void LdoParams::check() const {
    for (const auto& f : param_fields()) {
        const double v = this->*f.member;
        if (!std::isfinite(v)) throw ConfigError(std::string(f.name) + " is not finite");
        if (v <= 0.0) throw ConfigError(std::string(f.name) + " must be > 0");
    }
    if (!(vOutTargetV < vInV)) throw ConfigError("vOutTargetV must be below vInV");
    if (!(iqLowA < iqHighMinA && iqHighMinA <= iqHighMaxA)) throw ConfigError("need iqLowA < iqHighMinA <= iqHighMaxA");
    if (!(loadLowMaxA < loadHighMinA && loadHighMinA < loadHighMaxA))
        throw ConfigError("need loadLowMaxA < loadHighMinA < loadHighMaxA");
    if (bufferCurrentRatio < 1.0) throw ConfigError("bufferCurrentRatio must be >= 1");
    if (!(sense_current() > 0.0)) throw ConfigError("iRefA + iEa1A + iEa2A leave no current for the output stage within iqLowA");
    for (Mode m : {Mode::Low, Mode::High}) {
        const double ro = m == Mode::Low ? roPassLow : roPassHigh;
        if (!(pass_reference_current(*this, m, ro) > 0.0))
            throw ConfigError("pass device has no forward current at the " + to_string(m) + "-mode reference point");
    }
}

LdoParams params_from_kv(const KvFile& file) {
    LdoParams p;
    for (const auto& e : file.entries()) {
        if (!e.section.empty()) throw ParseError("parameter files have no sections ([" + e.section + "])", e.line);
        const ParamField* field = nullptr;
        for (const auto& f : param_fields())
            if (e.key == f.name) field = &f;
        if (!field) throw ParseError("unknown parameter '" + e.key + "'", e.line);
        const auto v = parse_si(e.value);
        if (!v) throw ParseError("'" + e.key + "' is not a number: " + e.value, e.line);
        p.*(field->member) = *v;
    }
    p.check();
    return p;
}

LdoParams load_params(const std::string& path) {
    try {
        return params_from_kv(KvFile::load(path));
    } catch (const ParseError& e) {
        throw ParseError(std::string(e.what()).find(path) == 0 ? e.what() : path + ": " + e.what(), 0);
    }
}

std::string params_to_text(const LdoParams& params) {
    std::ostringstream out;
    for (const auto& f : param_fields()) {
        char buf[32];
        const auto r = std::to_chars(buf, buf + sizeof buf, params.*f.member);
        out << f.name << " = " << std::string_view(buf, r.ptr - buf) << '\n';
    }
    return out.str();
}

double bias_scale(const LdoParams& p, Mode mode) {
    if (mode == Mode::Low) return 1.0;
    return (p.iqHighMaxA - p.iRefA) / (p.iqLowA - p.iRefA);
}

StageValues stage_values(const LdoParams& p, Mode mode) {
    const double b = bias_scale(p, mode);
    const double sb = std::sqrt(b);
    StageValues s{};
    s.iRefA = p.iRefA;
    // Amplifier stages run in weak inversion: gm tracks the bias, ro falls with it.
    s.gmEa1 = p.gmEa1 * b;
    s.roEa1 = p.roEa1 / b;
    s.iMaxEa1 = p.iEa1A * b;
    s.iMaxEa2 = p.iEa2A * b;
    // Strong-inversion devices: gm grows with the square root of the bias.
    s.gmEa2 = p.gmEa2 * sb;
    s.roEa2 = p.roEa2 / b;
    s.gmSense = p.gmSense * sb;
    s.roSense = p.roSense / b;
    // Scales with the bias so that gmCtrl * roSense, and with it the V_CTRL
    // level holding a given gate drive, is the same in both modes.
    s.gmCtrl = p.gmCtrl * b;
    s.gmBuffer = sb / p.roBuffer;
    s.pullUpA = p.bufferPullUpMaxA * b;
    s.pullDownA = p.bufferPullDownMaxA * b;
    s.gmPass = mode == Mode::Low ? p.gmPassLow : p.gmPassHigh;
    s.roPass = mode == Mode::Low ? p.roPassLow : p.roPassHigh;
    s.passK = s.gmPass * s.gmPass / (4.0 * pass_reference_current(p, mode, s.roPass));
    s.biasSinkA = p.sense_current() * b;
    return s;
}

namespace {

struct Nodes {
    NodeId in, ref, en, ea, eaFwd, ctrl, out, b, d, dFwd, g, gFwd;
};

Nodes add_nodes(Circuit& c) {
    Nodes n{};
    n.in = c.add_node("V_IN");
    n.ref = c.add_node("V_REF");
    n.en = c.add_node("V_EN");
    n.ea = c.add_node("V_EA");
    n.eaFwd = c.add_node("V_EA.fwd");
    n.ctrl = c.add_node("V_CTRL");
    n.out = c.add_node("V_OUT");
    n.b = c.add_node("V_B");
    n.d = c.add_node("V_D");
    n.dFwd = c.add_node("V_D.fwd");
    n.g = c.add_node("V_G");
    n.gFwd = c.add_node("V_G.fwd");
    return n;
}

void check_load(const LdoParams& p, Mode mode, double iLoadA) {
    if (!(iLoadA >= 0.0) || !std::isfinite(iLoadA)) throw ArgumentError("load current must be >= 0");
    if (mode == Mode::Low && iLoadA > p.loadLowMaxA)
        throw RangeError("Low mode supports loads up to " + format_sci(p.loadLowMaxA, 4) + " A, got " +
                         format_sci(iLoadA, 4) + " A");
    if (mode == Mode::High && (iLoadA < p.loadHighMinA || iLoadA > p.loadHighMaxA))
        throw RangeError("High mode supports loads in [" + format_sci(p.loadHighMinA, 4) + ", " +
                         format_sci(p.loadHighMaxA, 4) + "] A, got " + format_sci(iLoadA, 4) + " A");
}

/// Elements shared by both models, in a fixed order. `nonlinear` selects
/// the large-signal laws for the amplifier, buffer and pass stages.
Circuit assemble(const LdoParams& p, Mode mode, bool nonlinear, bool gateBuffer) {
    const StageValues s = stage_values(p, mode);
    Circuit c;
    const Nodes n = add_nodes(c);

    c.add_element(VSource{n.in, kGround, p.vInV, 1.0}, "vin");
    c.add_element(VSource{n.ref, kGround, p.vRefV, 0.0}, "vref");
    c.add_element(VSource{n.en, kGround, mode == Mode::High ? p.vInV : 0.0, 0.0}, "ven");

    if (nonlinear)
        c.add_element(make_nonlinear_vccs(n.ref, n.out, kGround, n.ea, "tanh", {{"gm", s.gmEa1}, {"imax", s.iMaxEa1}}), "ea1");
    else
        c.add_element(Vccs{n.ref, n.out, kGround, n.ea, s.gmEa1}, "ea1");
    c.add_element(Resistor{n.ea, kGround, s.roEa1}, "ro_ea1");
    c.add_element(Capacitor{n.ea, kGround, p.cEaF}, "c_ea");
    c.add_element(BreakPort{n.ea, n.eaFwd, "loop2"}, "loop2");

    if (nonlinear)
        c.add_element(make_nonlinear_vccs(n.eaFwd, kGround, kGround, n.ctrl, "tanh", {{"gm", s.gmEa2}, {"imax", s.iMaxEa2}}), "ea2");
    else
        c.add_element(Vccs{n.eaFwd, kGround, kGround, n.ctrl, s.gmEa2}, "ea2");
    c.add_element(Resistor{n.ctrl, kGround, s.roEa2}, "ro_ea2");
    c.add_element(Capacitor{n.ctrl, kGround, p.cCompF}, "c_comp");

    c.add_element(Vccs{n.out, n.ref, kGround, n.d, s.gmSense}, "sense");
    c.add_element(Vccs{n.ctrl, kGround, n.d, kGround, s.gmCtrl}, "steer");
    c.add_element(VSource{n.in, n.b, p.vthV, 0.0}, "vb");
    c.add_element(Resistor{n.d, n.b, s.roSense}, "ro_sense");
    c.add_element(Capacitor{n.d, kGround, p.cDrainF}, "c_d");
    c.add_element(BreakPort{n.d, n.dFwd, "loop1"}, "loop1");

    if (!gateBuffer)
        c.add_element(VSource{n.dFwd, n.g, 0.0, 0.0}, "buffer");
    else if (nonlinear)
        c.add_element(make_nonlinear_vccs(n.dFwd, n.g, kGround, n.g, "asym_tanh",
                                          {{"gm", s.gmBuffer}, {"ipos", s.pullUpA}, {"ineg", s.pullDownA}}),
                      "buffer");
    else
        c.add_element(Vccs{n.dFwd, n.g, kGround, n.g, s.gmBuffer}, "buffer");
    c.add_element(Capacitor{n.g, n.in, p.cGateF}, "c_gate");
    c.add_element(BreakPort{n.g, n.gFwd, "overall"}, "overall");

    if (nonlinear)
        c.add_element(make_nonlinear_vccs(n.in, n.gFwd, n.in, n.out, "square", {{"k", s.passK}, {"vth", p.vthV}}), "pass");
    else
        c.add_element(Vccs{n.in, n.gFwd, n.in, n.out, s.gmPass}, "pass");
    c.add_element(Resistor{n.in, n.out, s.roPass}, "ro_pass");
    c.add_element(Capacitor{n.out, kGround, p.cLoadF}, "c_load");
    c.add_element(ISource{n.out, kGround, s.biasSinkA, 0.0}, "bias_sink");
    c.add_element(Resistor{n.en, kGround, 1e6}, "r_en");
    return c;
}

}  // namespace

Circuit build_small_signal(const LdoParams& params, Mode mode, double iLoadA, const SmallSignalOptions& options) {
    params.check();
    check_load(params, mode, iLoadA);
    Circuit c = assemble(params, mode, false, options.gateBuffer);
    const NodeId out = c.node("V_OUT");
    if (iLoadA > 0.0) {
        if (options.load == LoadModel::Resistive)
            c.add_element(Resistor{out, kGround, params.vOutTargetV / iLoadA}, "load");
        else
            c.add_element(ISource{out, kGround, iLoadA, 0.0}, "load");
    }
    return c;
}

Circuit build_transient_circuit(const LdoParams& params, Mode mode, double iLoadA) {
    params.check();
    if (!(iLoadA >= 0.0)) throw ArgumentError("load current must be >= 0");
    Circuit c = assemble(params, mode, true, true);
    c.add_element(ISource{c.node("V_OUT"), kGround, iLoadA, 0.0}, "load");
    return c;
}

LoopGainOptions loop_options(const std::string& loop, const AcOptions& ac) {
    if (loop != "loop1" && loop != "loop2" && loop != "overall")
        throw ArgumentError("unknown loop '" + loop + "' (expected loop1, loop2 or overall)");
    LoopGainOptions o;
    o.ac = ac;
    if (loop == "loop1") o.holdOpen = {"loop2"};
    return o;
}

LdoTransient build_transient(const LdoParams& params, const LdoStimuli& stimuli) {
    if (stimuli.enableV.empty()) throw ConfigError("transient model needs a V_EN stimulus");
    LdoTransient t;
    t.circuit = build_transient_circuit(params, Mode::Low, 0.0);
    t.options.highStateCircuit = build_transient_circuit(params, Mode::High, 0.0);

    Stimulus en{*t.circuit.find_element("ven"), stimuli.enableV, std::nullopt, true, "V_EN"};
    t.stimuli.push_back(en);
    if (!stimuli.loadA.empty())
        t.stimuli.push_back(Stimulus{*t.circuit.find_element("load"), stimuli.loadA, std::nullopt, false, "I_LOAD"});
    if (stimuli.supplyRipple)
        t.stimuli.push_back(Stimulus{*t.circuit.find_element("vin"), {{0.0, params.vInV}}, stimuli.supplyRipple, false, "V_IN"});
    return t;
}

LdoStimuli step_stimuli(const LdoParams& params, const StepScenario& sc) {
    if (!(sc.riseS > 0.0 && sc.fallS > sc.riseS + sc.edgeS && sc.endS > sc.fallS + sc.edgeS && sc.edgeS > 0.0 &&
          sc.enableEdgeS > 0.0))
        throw ConfigError("step scenario times must satisfy 0 < rise < rise+edge < fall < fall+edge < end");
    LdoStimuli s;
    s.loadA = {{0.0, 0.0},
               {sc.riseS, 0.0},
               {sc.riseS + sc.edgeS, sc.loadHighA},
               {sc.fallS, sc.loadHighA},
               {sc.fallS + sc.edgeS, 0.0}};
    s.enableV = {{0.0, 0.0},
                 {sc.riseS, 0.0},
                 {sc.riseS + sc.enableEdgeS, params.vInV},
                 {sc.fallS + sc.edgeS, params.vInV},
                 {sc.fallS + sc.edgeS + sc.enableEdgeS, 0.0}};
    return s;
}

double quiescent_current(const LdoParams& p, Mode mode, double iLoadA) {
    if (!(iLoadA >= 0.0)) throw ArgumentError("load current must be >= 0");
    if (mode == Mode::Low) {
        if (iLoadA > p.loadLowMaxA)
            throw RangeError("Low mode cannot carry " + format_sci(iLoadA, 4) + " A; the controller should switch to High");
        return p.iqLowA;
    }
    const double frac = (iLoadA - p.loadHighMinA) / (p.loadHighMaxA - p.loadHighMinA);
    return std::clamp(p.iqHighMinA + (p.iqHighMaxA - p.iqHighMinA) * frac, p.iqHighMinA, p.iqHighMaxA);
}

Mode mode_from_ven(double venVolts, double vInV) { return venVolts > 0.5 * vInV ? Mode::High : Mode::Low; }

}  // namespace ldosim
