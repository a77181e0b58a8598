#include <cmath>
#include <numbers>
#include <sstream>

#include "ldosim/analysis.hpp"
#include "ldosim/errors.hpp"
#include "ldosim/parallel.hpp"
#include "ldosim/units.hpp"
#include "mna.hpp"

namespace ldosim {

std::vector<double> FrequencySweep::grid() const {
    if (!(startHz > 0.0) || !(stopHz > startHz) || !std::isfinite(stopHz))
        throw ArgumentError("frequency sweep needs 0 < startHz < stopHz");
    if (pointsPerDecade < 1) throw ArgumentError("pointsPerDecade must be >= 1");
    const double decades = std::log10(stopHz / startHz);
    const auto intervals = static_cast<std::size_t>(std::max(1.0, std::ceil(decades * pointsPerDecade - 1e-9)));
    std::vector<double> f(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i)
        f[i] = startHz * std::pow(10.0, decades * static_cast<double>(i) / static_cast<double>(intervals));
    f.front() = startHz;
    f.back() = stopHz;
    return f;
}

std::vector<double> FrequencyResponse::magnitude_db() const {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = 20.0 * std::log10(std::abs(values[i]));
    return out;
}

std::vector<double> FrequencyResponse::phase_deg_unwrapped() const {
    std::vector<double> out(values.size());
    double previous = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double p = std::arg(values[i]) * 180.0 / std::numbers::pi;
        if (i > 0) {
            while (p - previous > 180.0) p -= 360.0;
            while (p - previous < -180.0) p += 360.0;
        }
        out[i] = previous = p;
    }
    return out;
}

std::vector<std::complex<double>> ac_solve(const Circuit& linearCircuit, double freqHz) {
    const detail::MnaLayout layout(linearCircuit);
    ComplexMatrix a;
    std::vector<std::complex<double>> b;
    detail::assemble_complex(linearCircuit, layout, 2.0 * std::numbers::pi * freqHz, a, b);
    std::vector<std::complex<double>> x;
    try {
        x = LuFactor<std::complex<double>>(std::move(a)).solve(b);
    } catch (const SingularMatrixError& e) {
        std::ostringstream msg;
        msg << "singular AC matrix at " << freqHz << " Hz (" << layout.describe(linearCircuit, e.pivot()) << ")";
        throw SingularMatrixError(msg.str(), e.pivot());
    }
    std::vector<std::complex<double>> v(linearCircuit.node_count());
    for (std::size_t n = 1; n < v.size(); ++n) v[n] = x[n - 1];
    return v;
}

namespace {

bool has_nonlinear(const Circuit& circuit) {
    for (const auto& el : circuit.elements())
        if (std::holds_alternative<NonlinearVccs>(el)) return true;
    return false;
}

Circuit small_signal(const Circuit& circuit, const DcOptions& dc) {
    if (!has_nonlinear(circuit)) return circuit;
    return linearize(circuit, dc_operating_point(circuit, dc));
}

/// Zeroes the AC magnitude of every source except `keep`.
void excite_only(Circuit& circuit, std::optional<ElementId> keep) {
    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        if (keep && keep->index == i) continue;
        Element& el = circuit.element(ElementId{i});
        if (auto* v = std::get_if<VSource>(&el)) v->acMagnitudeVolts = 0.0;
        if (auto* s = std::get_if<ISource>(&el)) s->acMagnitudeAmps = 0.0;
    }
}

double ac_magnitude(const Circuit& circuit, ElementId source) {
    const Element& el = circuit.element(source);
    if (const auto* v = std::get_if<VSource>(&el)) return v->acMagnitudeVolts;
    if (const auto* s = std::get_if<ISource>(&el)) return s->acMagnitudeAmps;
    throw ArgumentError("element " + std::to_string(source.index) + " is not an independent source");
}

}  // namespace

FrequencyResponse ac_sweep(const Circuit& circuit, const FrequencySweep& sweep, ElementId inputSource,
                           NodeId outputNode, const AcOptions& options) {
    const double magnitude = ac_magnitude(circuit, inputSource);
    if (magnitude == 0.0) throw ArgumentError("input source has zero AC magnitude");
    if (outputNode.index >= circuit.node_count()) throw StructuralError("unknown output node");

    Circuit lin = small_signal(circuit, options.dc);
    excite_only(lin, inputSource);

    FrequencyResponse response;
    response.freqsHz = sweep.grid();
    response.values.resize(response.freqsHz.size());
    parallel_for(response.freqsHz.size(), options.threads, [&](std::size_t i) {
        response.values[i] = ac_solve(lin, response.freqsHz[i])[outputNode.index] / magnitude;
    });
    return response;
}

FrequencyResponse psr(const Circuit& circuit, const FrequencySweep& sweep, ElementId supplySource, NodeId outputNode,
                      const AcOptions& options) {
    if (!std::holds_alternative<VSource>(circuit.element(supplySource)))
        throw ArgumentError("PSR supply must be a voltage source");
    return ac_sweep(circuit, sweep, supplySource, outputNode, options);
}

namespace {

/// Moves every non-control terminal on `from` to `to`.
void rewire_loads(Element& el, NodeId from, NodeId to) {
    auto move = [&](NodeId& n) {
        if (n == from) n = to;
    };
    if (auto* e = std::get_if<Resistor>(&el)) {
        move(e->a);
        move(e->b);
    } else if (auto* e = std::get_if<Capacitor>(&el)) {
        move(e->a);
        move(e->b);
    } else if (auto* e = std::get_if<Vccs>(&el)) {
        move(e->outPos);
        move(e->outNeg);
    } else if (auto* e = std::get_if<NonlinearVccs>(&el)) {
        move(e->outPos);
        move(e->outNeg);
    } else if (auto* e = std::get_if<ISource>(&el)) {
        move(e->pos);
        move(e->neg);
    } else if (auto* e = std::get_if<BreakPort>(&el)) {
        move(e->fromNode);
        move(e->toNode);
    } else if (auto* e = std::get_if<VSource>(&el)) {
        if (e->pos == from || e->neg == from)
            throw StructuralError("loop break forward node is driven by a voltage source");
    }
}

}  // namespace

void measure_crossing(LoopGainResult& result) {
    const auto& r = result.response;
    result.ugbwHz.reset();
    result.phaseMarginDeg.reset();
    if (r.size() == 0) return;
    result.dcGainDb = 20.0 * std::log10(std::abs(r.values.front()));
    const auto phase = r.phase_deg_unwrapped();
    for (std::size_t i = r.size() - 1; i-- > 0;) {
        const double m0 = std::abs(r.values[i]);
        const double m1 = std::abs(r.values[i + 1]);
        if (!(m0 >= 1.0 && m1 < 1.0)) continue;
        const double lf0 = std::log10(r.freqsHz[i]);
        const double lf1 = std::log10(r.freqsHz[i + 1]);
        const double lm0 = std::log10(m0);
        const double lm1 = std::log10(m1);
        const double t = lm0 == lm1 ? 0.0 : lm0 / (lm0 - lm1);
        result.ugbwHz = std::pow(10.0, lf0 + t * (lf1 - lf0));
        double pm = std::fmod(180.0 + phase[i] + t * (phase[i + 1] - phase[i]), 360.0);
        if (pm > 180.0) pm -= 360.0;
        if (pm <= -180.0) pm += 360.0;
        result.phaseMarginDeg = pm;
        return;
    }
}

LoopGainResult loop_gain(const Circuit& circuit, const std::string& breakLabel, const FrequencySweep& sweep,
                         const LoopGainOptions& options) {
    const auto port = circuit.find_break_port(breakLabel);
    if (!port) throw StructuralError("no break port labeled '" + breakLabel + "'");
    if (!(options.testAmplitude != 0.0) || !std::isfinite(options.testAmplitude))
        throw ArgumentError("test amplitude must be finite and nonzero");
    const BreakPort bp = std::get<BreakPort>(circuit.element(*port));
    if (bp.toNode == kGround || bp.fromNode == kGround) throw StructuralError("break port cannot sit on ground");

    std::optional<OperatingPoint> op;
    if (has_nonlinear(circuit)) op = dc_operating_point(circuit, options.ac.dc);
    Circuit opened = op ? linearize(circuit, *op) : circuit;
    for (const auto& label : options.holdOpen) {
        const auto held = opened.find_break_port(label);
        if (!held) throw StructuralError("no break port labeled '" + label + "'");
        if (held->index == port->index) throw ArgumentError("cannot hold open the measured break port");
        const BreakPort hp = std::get<BreakPort>(opened.element(*held));
        for (std::size_t i = 0; i < opened.element_count(); ++i)
            if (i != held->index) rewire_loads(opened.element(ElementId{i}), hp.toNode, hp.fromNode);
        opened.element(*held) = VSource{hp.toNode, kGround, op ? op->v(hp.toNode) : 0.0, 0.0};
    }
    for (std::size_t i = 0; i < opened.element_count(); ++i)
        if (i != port->index) rewire_loads(opened.element(ElementId{i}), bp.toNode, bp.fromNode);
    opened.element(*port) = VSource{bp.toNode, kGround, op ? op->v(bp.toNode) : 0.0, options.testAmplitude};
    excite_only(opened, *port);

    LoopGainResult result;
    result.response.freqsHz = sweep.grid();
    result.response.values.resize(result.response.freqsHz.size());
    parallel_for(result.response.freqsHz.size(), options.ac.threads, [&](std::size_t i) {
        const auto v = ac_solve(opened, result.response.freqsHz[i]);
        result.response.values[i] = -v[bp.fromNode.index] / v[bp.toNode.index];
    });
    measure_crossing(result);
    return result;
}

std::string to_csv(const FrequencyResponse& response) {
    std::string out = "freq_hz,re,im,mag_db,phase_deg\n";
    const auto mag = response.magnitude_db();
    const auto phase = response.phase_deg_unwrapped();
    for (std::size_t i = 0; i < response.size(); ++i) {
        out += format_sci(response.freqsHz[i]) + ',' + format_sci(response.values[i].real()) + ',' +
               format_sci(response.values[i].imag()) + ',' + format_sci(mag[i]) + ',' + format_sci(phase[i]) + '\n';
    }
    return out;
}

}  // namespace ldosim
