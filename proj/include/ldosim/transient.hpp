#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldosim/analysis.hpp"
#include "ldosim/circuit.hpp"

namespace ldosim {

struct PwlPoint {
    double t;
    double value;
};

struct SineRider {
    double amplitude;
    double frequencyHz;
};

/// Time-varying value of one V or I source: a piecewise-linear waveform held
/// at its end values outside the breakpoint range, plus an optional sine.
struct Stimulus {
    ElementId source;
    std::vector<PwlPoint> waveform;
    std::optional<SineRider> sine;
    /// Digital control: an event is recorded whenever the waveform crosses
    /// half its swing, and the engine switches circuit variants there.
    bool digital = false;
    std::string label;

    [[nodiscard]] double value(double t) const;
    /// Throws ArgumentError unless breakpoint times are strictly increasing and t >= 0.
    void check() const;
};

struct TransientOptions {
    double tEndS = 0.0;
    double tolRel = 1e-4;
    double tolAbsV = 1e-6;
    double maxStepS = 1e-6;
    double minStepS = 1e-15;
    DcOptions dc;
    /// Circuit stamped while the digital stimulus is above threshold. Must
    /// have the same nodes and element kinds as the base circuit.
    std::optional<Circuit> highStateCircuit;
};

struct TraceEvent {
    double time;
    std::string label;
};

struct TransientTrace {
    std::vector<double> timesS;
    std::vector<std::vector<double>> nodeVoltages;           ///< [node index][sample]
    std::map<std::size_t, std::vector<double>> branchCurrents;  ///< source element index -> series
    std::vector<TraceEvent> events;
    std::size_t rejectedSteps = 0;

    [[nodiscard]] const std::vector<double>& voltage(NodeId node) const { return nodeVoltages.at(node.index); }
};

/// Implicit adaptive-step integration (trapezoidal; backward Euler on the
/// first step and after every breakpoint or event). Steps land exactly on
/// stimulus breakpoints. Throws ArgumentError for tEnd <= 0 and StallError
/// when Newton keeps failing below minStepS.
TransientTrace simulate(const Circuit& circuit, std::span<const Stimulus> stimuli, const TransientOptions& options);

TransientTrace simulate(const Circuit& circuit, std::span<const Stimulus> stimuli, double tEndS, double tolRel,
                        double tolAbsV, double maxStepS);

/// CSV: `time_s,<label>...` over every labeled node, then `# event,<time>,<label>` lines.
std::string to_csv(const TransientTrace& trace, const Circuit& circuit);

/// Samples of the trace restricted to labels (convenience for reports/tests).
std::vector<double> series(const TransientTrace& trace, const Circuit& circuit, const std::string& label);

}  // namespace ldosim
