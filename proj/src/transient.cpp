#include "ldosim/transient.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "ldosim/errors.hpp"
#include "ldosim/units.hpp"
#include "mna.hpp"
#include "newton.hpp"

namespace ldosim {

double Stimulus::value(double t) const {
    double v = 0.0;
    if (!waveform.empty()) {
        if (t <= waveform.front().t) {
            v = waveform.front().value;
        } else if (t >= waveform.back().t) {
            v = waveform.back().value;
        } else {
            auto hi = std::upper_bound(waveform.begin(), waveform.end(), t,
                                       [](double x, const PwlPoint& p) { return x < p.t; });
            auto lo = hi - 1;
            if (t == lo->t)
                v = lo->value;
            else
                v = lo->value + (hi->value - lo->value) * (t - lo->t) / (hi->t - lo->t);
        }
    }
    if (sine) v += sine->amplitude * std::sin(2.0 * std::numbers::pi * sine->frequencyHz * t);
    return v;
}

void Stimulus::check() const {
    for (std::size_t i = 0; i < waveform.size(); ++i) {
        if (!std::isfinite(waveform[i].t) || !std::isfinite(waveform[i].value) || waveform[i].t < 0.0)
            throw ArgumentError("stimulus breakpoints must be finite with t >= 0");
        if (i > 0 && !(waveform[i].t > waveform[i - 1].t))
            throw ArgumentError("stimulus breakpoint times must be strictly increasing");
    }
    if (sine && (!(sine->frequencyHz > 0.0) || !std::isfinite(sine->amplitude)))
        throw ArgumentError("sine rider needs a positive frequency");
}

namespace {

struct Crossing {
    double time;
    bool rising;
};

std::vector<Crossing> digital_crossings(const Stimulus& s, double threshold, double tEnd) {
    std::vector<Crossing> out;
    const auto& w = s.waveform;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const double a = w[i].value - threshold;
        const double b = w[i + 1].value - threshold;
        if ((a <= 0.0 && b > 0.0) || (a > 0.0 && b <= 0.0)) {
            double t = w[i].t + (threshold - w[i].value) * (w[i + 1].t - w[i].t) / (w[i + 1].value - w[i].value);
            if (b == 0.0) t = w[i + 1].t;
            t = std::clamp(t, w[i].t, w[i + 1].t);
            if (t > 0.0 && t < tEnd) out.push_back({t, b > 0.0});
        }
    }
    return out;
}

void check_variant(const Circuit& base, const Circuit& variant) {
    if (base.node_count() != variant.node_count() || base.element_count() != variant.element_count())
        throw ArgumentError("high-state circuit must have the same nodes and elements as the base circuit");
    for (std::size_t i = 0; i < base.element_count(); ++i)
        if (base.elements()[i].index() != variant.elements()[i].index())
            throw ArgumentError("high-state circuit element " + std::to_string(i) + " differs in kind");
}

/// Newest-last divided difference of order `order` over the last order+1 samples of one node.
double divided_difference(const std::deque<double>& t, const std::deque<std::vector<double>>& v, std::size_t node,
                          std::size_t order) {
    const std::size_t m = t.size();
    std::vector<double> dd(order + 1);
    for (std::size_t i = 0; i <= order; ++i) dd[i] = v[m - 1 - order + i][node];
    for (std::size_t k = 1; k <= order; ++k)
        for (std::size_t i = order; i >= k; --i) {
            dd[i] = (dd[i] - dd[i - 1]) / (t[m - 1 - order + i] - t[m - 1 - order + i - k]);
            if (i == k) break;
        }
    return dd[order];
}

/// Nodes with no DC path to ground (only capacitors and current sources
/// attached) have no operating point; they start at 0 V instead.
OperatingPoint initial_state(const Circuit& circuit, const std::vector<double>& values, const DcOptions& dc) {
    try {
        return dc_operating_point(circuit, values, dc);
    } catch (const SingularMatrixError&) {
    }
    const std::size_t n = circuit.node_count();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    auto join = [&](NodeId a, NodeId b) { parent[find(a.index)] = find(b.index); };
    for (const auto& el : circuit.elements()) {
        if (std::holds_alternative<Capacitor>(el) || std::holds_alternative<ISource>(el)) continue;
        if (const auto* g = std::get_if<Vccs>(&el)) join(g->outPos, g->outNeg);
        else if (const auto* x = std::get_if<NonlinearVccs>(&el)) join(x->outPos, x->outNeg);
        else {
            const auto t = element_terminals(el);
            for (std::size_t k = 1; k < t.size(); ++k) join(t[0], t[k]);
        }
    }
    Circuit pinned = circuit;
    std::vector<double> pinnedValues = values;
    for (std::size_t i = 1; i < n; ++i) {
        if (find(i) == find(0)) continue;
        pinned.add_element(VSource{NodeId{i}, kGround, 0.0, 0.0});
        pinnedValues.push_back(0.0);
    }
    if (pinned.element_count() == circuit.element_count()) return dc_operating_point(circuit, values, dc);
    OperatingPoint op = dc_operating_point(pinned, pinnedValues, dc);
    op.branchCurrents.resize(circuit.element_count());
    return op;
}

}  // namespace

TransientTrace simulate(const Circuit& circuit, std::span<const Stimulus> stimuli, const TransientOptions& options) {
    if (!(options.tEndS > 0.0) || !std::isfinite(options.tEndS)) throw ArgumentError("tEnd must be > 0");
    if (!(options.maxStepS > 0.0)) throw ArgumentError("maxStep must be > 0");
    if (!(options.tolRel > 0.0) || !(options.tolAbsV > 0.0)) throw ArgumentError("tolerances must be > 0");

    const Stimulus* digital = nullptr;
    double maxStep = options.maxStepS;
    for (const auto& s : stimuli) {
        s.check();
        const Element& el = circuit.element(s.source);
        if (!std::holds_alternative<VSource>(el) && !std::holds_alternative<ISource>(el))
            throw ArgumentError("stimulus source " + std::to_string(s.source.index) + " is not an independent source");
        if (s.digital) {
            if (digital) throw ArgumentError("at most one digital stimulus is supported");
            digital = &s;
        }
        if (s.sine) maxStep = std::min(maxStep, 1.0 / (20.0 * s.sine->frequencyHz));
    }
    if (options.highStateCircuit) check_variant(circuit, *options.highStateCircuit);

    const double tEnd = options.tEndS;
    std::vector<double> breakpoints;
    for (const auto& s : stimuli)
        for (const auto& p : s.waveform)
            if (p.t > 0.0 && p.t < tEnd) breakpoints.push_back(p.t);

    double threshold = 0.0;
    std::vector<Crossing> crossings;
    bool high = false;
    if (digital) {
        double lo = digital->waveform.empty() ? 0.0 : digital->waveform.front().value;
        double hi = lo;
        for (const auto& p : digital->waveform) {
            lo = std::min(lo, p.value);
            hi = std::max(hi, p.value);
        }
        threshold = 0.5 * (lo + hi);
        crossings = digital_crossings(*digital, threshold, tEnd);
        for (const auto& c : crossings) breakpoints.push_back(c.time);
        high = hi > lo && digital->value(0.0) > threshold;
    }
    breakpoints.push_back(tEnd);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    auto active = [&]() -> const Circuit& {
        return high && options.highStateCircuit ? *options.highStateCircuit : circuit;
    };
    auto source_values = [&](double t) {
        auto values = detail::dc_source_values(active());
        for (const auto& s : stimuli) values[s.source.index] = s.value(t);
        return values;
    };

    const detail::MnaLayout layout(circuit);
    const std::size_t nodes = circuit.node_count();
    const std::size_t elements = circuit.element_count();

    const OperatingPoint op = initial_state(active(), source_values(0.0), options.dc);
    std::vector<double> x(layout.unknowns(), 0.0);
    for (std::size_t n = 1; n < nodes; ++n) x[n - 1] = op.nodeVoltages[n];
    for (std::size_t i = 0; i < elements; ++i)
        if (auto k = layout.branch(i)) x[*k] = op.branchCurrents[i];

    std::vector<double> capCurrent(elements, 0.0);

    TransientTrace trace;
    trace.nodeVoltages.assign(nodes, {});
    for (std::size_t i = 0; i < elements; ++i)
        if (std::holds_alternative<VSource>(circuit.elements()[i]) || std::holds_alternative<ISource>(circuit.elements()[i]))
            trace.branchCurrents[i] = {};

    auto record = [&](double t, const std::vector<double>& values) {
        trace.timesS.push_back(t);
        for (std::size_t n = 0; n < nodes; ++n) trace.nodeVoltages[n].push_back(n == 0 ? 0.0 : x[n - 1]);
        for (auto& [i, s] : trace.branchCurrents) {
            if (auto k = layout.branch(i))
                s.push_back(x[*k]);
            else
                s.push_back(values[i]);
        }
    };
    record(0.0, source_values(0.0));

    std::deque<double> histT{0.0};
    std::deque<std::vector<double>> histV{op.nodeVoltages};

    const std::string digitalName = digital && !digital->label.empty() ? digital->label : "digital";
    double t = 0.0;
    double h = std::min(maxStep, 1e-3 * breakpoints.front());
    bool restart = true;
    std::size_t bpIndex = 0;
    const double newtonTol = std::min(1e-9, 1e-3 * options.tolAbsV);

    detail::CapacitorCompanion companion;
    companion.geq.assign(elements, 0.0);
    companion.ieq.assign(elements, 0.0);

    while (t < tEnd) {
        while (breakpoints[bpIndex] <= t) ++bpIndex;
        const double target = breakpoints[bpIndex];
        double step = std::min(h, maxStep);
        bool landsOnBreakpoint = false;
        if (t + 1.1 * step >= target) {
            step = target - t;
            landsOnBreakpoint = true;
        }
        const double tNew = landsOnBreakpoint ? target : t + step;

        const bool useEuler = restart;
        const Circuit& ckt = active();
        for (std::size_t i = 0; i < elements; ++i) {
            const auto* c = std::get_if<Capacitor>(&ckt.elements()[i]);
            if (!c) continue;
            const double vPrev = detail::node_voltage(x, layout, c->a) - detail::node_voltage(x, layout, c->b);
            if (useEuler) {
                companion.geq[i] = c->farads / step;
                companion.ieq[i] = -companion.geq[i] * vPrev;
            } else {
                companion.geq[i] = 2.0 * c->farads / step;
                companion.ieq[i] = -companion.geq[i] * vPrev - capCurrent[i];
            }
        }

        const auto values = source_values(tNew);
        std::vector<double> xTry = x;
        const auto outcome = detail::newton_solve(ckt, layout, values, 1.0, &companion, xTry, newtonTol, 50);
        if (!outcome.converged) {
            ++trace.rejectedSteps;
            h = step / 8.0;
            if (h < options.minStepS)
                throw StallError("transient stalled at t=" + format_sci(t, 6) + " s (" +
                                     layout.describe(circuit, outcome.worstRow) + ")",
                                 t);
            continue;
        }

        std::vector<double> vNew(nodes, 0.0);
        for (std::size_t n = 1; n < nodes; ++n) vNew[n] = xTry[n - 1];

        // Local truncation error from divided differences over the samples since the last reset.
        double ratio = 0.0;
        int order = 0;
        if (histT.size() >= 2) {
            histT.push_back(tNew);
            histV.push_back(vNew);
            const bool cubic = !useEuler && histT.size() >= 4;
            order = cubic ? 3 : 2;
            for (std::size_t n = 1; n < nodes; ++n) {
                const double dd = divided_difference(histT, histV, n, static_cast<std::size_t>(order));
                const double lte = cubic ? 0.5 * step * step * step * std::abs(dd) : step * step * std::abs(dd);
                const double tol = std::max(options.tolRel * std::abs(vNew[n]), options.tolAbsV);
                ratio = std::max(ratio, lte / tol);
            }
            histT.pop_back();
            histV.pop_back();
        }
        if (ratio > 1.0 && step > options.minStepS) {
            ++trace.rejectedSteps;
            h = step / 2.0;
            continue;
        }

        for (std::size_t i = 0; i < elements; ++i) {
            const auto* c = std::get_if<Capacitor>(&ckt.elements()[i]);
            if (!c) continue;
            const double vc = vNew[c->a.index] - vNew[c->b.index];
            capCurrent[i] = companion.geq[i] * vc + companion.ieq[i];
        }
        x.swap(xTry);
        t = tNew;
        record(t, values);
        histT.push_back(t);
        histV.push_back(vNew);
        while (histT.size() > 4) {
            histT.pop_front();
            histV.pop_front();
        }
        restart = false;

        if (order > 0 && ratio < std::pow(0.5, order + 1)) h = std::min(2.0 * step, maxStep);
        else if (!landsOnBreakpoint) h = step;

        if (landsOnBreakpoint && t < tEnd) {
            for (const auto& c : crossings) {
                if (c.time != t) continue;
                high = c.rising;
                trace.events.push_back({t, digitalName + (c.rising ? ":high" : ":low")});
            }
            histT.assign(1, t);
            histV.assign(1, vNew);
            restart = true;
            const double next = breakpoints[bpIndex + 1];
            h = std::min(h, 1e-3 * (next - t));
        }
    }
    return trace;
}

TransientTrace simulate(const Circuit& circuit, std::span<const Stimulus> stimuli, double tEndS, double tolRel,
                        double tolAbsV, double maxStepS) {
    TransientOptions options;
    options.tEndS = tEndS;
    options.tolRel = tolRel;
    options.tolAbsV = tolAbsV;
    options.maxStepS = maxStepS;
    return simulate(circuit, stimuli, options);
}

std::string to_csv(const TransientTrace& trace, const Circuit& circuit) {
    std::string out = "time_s";
    for (const auto& [label, node] : circuit.labels()) out += ',' + label;
    out += '\n';
    for (std::size_t s = 0; s < trace.timesS.size(); ++s) {
        out += format_sci(trace.timesS[s]);
        for (const auto& [label, node] : circuit.labels()) out += ',' + format_sci(trace.nodeVoltages[node.index][s]);
        out += '\n';
    }
    for (const auto& e : trace.events) out += "# event," + format_sci(e.time) + ',' + e.label + '\n';
    return out;
}

std::vector<double> series(const TransientTrace& trace, const Circuit& circuit, const std::string& label) {
    return trace.voltage(circuit.node(label));
}

}  // namespace ldosim
