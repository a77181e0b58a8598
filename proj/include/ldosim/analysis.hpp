#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "ldosim/circuit.hpp"

namespace ldosim {

// ---------------------------------------------------------------------------
// DC operating point
// ---------------------------------------------------------------------------

struct DcOptions {
    double newtonTol = 1e-9;  ///< volts; KCL rows are checked against newtonTol * conductance scale
    int maxIter = 100;
    /// Starting node voltages (size node_count, index 0 ignored). Empty = all zero.
    std::vector<double> initialGuess;
    /// Retry with source stepping when plain damped Newton fails.
    bool sourceStepping = true;
};

struct OperatingPoint {
    std::vector<double> nodeVoltages;    ///< indexed by NodeId::index; [0] is ground
    std::vector<double> branchCurrents;  ///< per element; VSource current (pos -> neg through the source), else 0
    int iterations = 0;
    double residual = 0.0;               ///< final max KCL residual, amps

    [[nodiscard]] double v(NodeId node) const { return nodeVoltages.at(node.index); }
};

/// Newton-Raphson DC solve with capacitors open and AC magnitudes ignored.
/// Damping halves the step (up to 10 times) while the residual grows.
/// Throws ConvergenceError or SingularMatrixError (message names the node).
OperatingPoint dc_operating_point(const Circuit& circuit, const DcOptions& options = {});

/// Same as above with source values replaced: `sourceValues[i]` is used for
/// element i when it is a V or I source.
OperatingPoint dc_operating_point(const Circuit& circuit, const std::vector<double>& sourceValues,
                                  const DcOptions& options);

/// Replaces every NonlinearVccs by the Vccs tangent at `op`.
Circuit linearize(const Circuit& circuit, const OperatingPoint& op);

/// Max KCL residual (amps) of `op` in the DC circuit; for diagnostics and tests.
double kcl_residual(const Circuit& circuit, const OperatingPoint& op);

// ---------------------------------------------------------------------------
// Small-signal frequency analysis
// ---------------------------------------------------------------------------

struct FrequencySweep {
    double startHz = 1.0;
    double stopHz = 1e9;
    int pointsPerDecade = 40;

    /// Strictly increasing log grid; first point is startHz and last is stopHz
    /// exactly. Throws ArgumentError on a bad range.
    [[nodiscard]] std::vector<double> grid() const;
};

struct FrequencyResponse {
    std::vector<double> freqsHz;
    std::vector<std::complex<double>> values;

    [[nodiscard]] std::size_t size() const noexcept { return freqsHz.size(); }
    [[nodiscard]] std::vector<double> magnitude_db() const;
    /// Phase in degrees, unwrapped by continuity from the first sample's principal value.
    [[nodiscard]] std::vector<double> phase_deg_unwrapped() const;
};

struct AcOptions {
    DcOptions dc;
    /// Worker threads for per-frequency solves; 0 = LDOSIM_THREADS or hardware concurrency.
    unsigned threads = 0;
};

/// Raw complex node voltages (index = NodeId) at one frequency with every
/// source's AC magnitude applied. The circuit must be linear (see linearize).
std::vector<std::complex<double>> ac_solve(const Circuit& linearCircuit, double freqHz);

/// V(outputNode) / acMagnitude(input) over the sweep. Only the input source is
/// excited. Nonlinear elements are linearized at the DC operating point.
FrequencyResponse ac_sweep(const Circuit& circuit, const FrequencySweep& sweep, ElementId inputSource,
                           NodeId outputNode, const AcOptions& options = {});

/// Supply rejection V(out)/V(supply); negative dB means attenuation.
FrequencyResponse psr(const Circuit& circuit, const FrequencySweep& sweep, ElementId supplySource, NodeId outputNode,
                      const AcOptions& options = {});

struct LoopGainResult {
    FrequencyResponse response;   ///< T(f) = -v(return)/v(injected)
    double dcGainDb = 0.0;        ///< |T| at the lowest sweep frequency
    std::optional<double> ugbwHz;
    std::optional<double> phaseMarginDeg;
};

struct LoopGainOptions {
    AcOptions ac;
    double testAmplitude = 1.0;
    /// Further break ports opened for the measurement with their forward side
    /// held at the operating point; isolates one loop of a nested pair.
    std::vector<std::string> holdOpen;
};

/// Opens the named BreakPort and measures the return ratio.
///
/// The forward side (toNode) is driven by an ideal test source. Every element
/// terminal on toNode other than a controlled-source input is moved to
/// fromNode, so the return side keeps the loading it saw in the closed loop.
/// UGBW is the highest frequency where |T| falls through 1 (log-log
/// interpolation); phase margin is 180 + unwrapped phase there, wrapped into
/// (-180, 180].
LoopGainResult loop_gain(const Circuit& circuit, const std::string& breakLabel, const FrequencySweep& sweep,
                         const LoopGainOptions& options = {});

/// Crossing/margin extraction used by loop_gain; exposed for reuse and tests.
void measure_crossing(LoopGainResult& result);

/// CSV with header `freq_hz,re,im,mag_db,phase_deg`, 9 significant digits.
std::string to_csv(const FrequencyResponse& response);

}  // namespace ldosim
