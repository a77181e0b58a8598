#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldosim/analysis.hpp"
#include "ldosim/circuit.hpp"
#include "ldosim/kvfile.hpp"
#include "ldosim/transient.hpp"

namespace ldosim {

enum class Mode { Low, High };

std::string to_string(Mode mode);

/// Behavioral parameters of the dual-mode FVF regulator. Stage values are
/// given for the low-current mode; the high mode derives its values through
/// the bias scale (see bias_scale). Pass-device values are given per mode.
struct LdoParams {
    double vInV = 1.5;
    double vOutTargetV = 1.2;
    double vRefV = 1.2;

    double cCompF = 40e-12;
    double cLoadF = 160e-12;

    // Error amplifier, first stage (output V_EA) and second stage (output V_CTRL).
    double gmEa1 = 10e-6;
    double roEa1 = 2e6;
    double cEaF = 2e-15;
    double gmEa2 = 70e-6;
    double roEa2 = 1e9;

    // Flipped-follower sense leg: V_OUT against V_REF drives V_D, whose load
    // returns to V_B = V_IN - vthV. The amplifier steers V_D through gmCtrl.
    double gmSense = 6.7e-6;
    double roSense = 3e6;
    double cDrainF = 2e-15;
    double gmCtrl = 1.2e-6;

    // Gate buffer driving V_G.
    double bufferCurrentRatio = 4.0;
    double bufferPullUpMaxA = 20e-6;
    double bufferPullDownMaxA = 0.34e-6;
    double roBuffer = 2e3;

    // Pass switch, small-signal values at each mode's reference operating point.
    double gmPassLow = 0.23e-3;
    double gmPassHigh = 0.057;
    double roPassLow = 10e6;
    double roPassHigh = 1e3;
    double vthV = 0.4;

    double cGateF = 1e-12;

    // Bias branches in low mode. I_1 and I_2 take what is left of iqLowA.
    double iRefA = 0.4e-6;
    double iEa1A = 0.2e-6;
    double iEa2A = 0.9e-6;

    double iqLowA = 3e-6;
    double iqHighMinA = 50e-6;
    double iqHighMaxA = 110e-6;
    double loadLowMaxA = 500e-6;
    double loadHighMinA = 5e-3;
    double loadHighMaxA = 15e-3;
    double iqConventionalA = 42e-6;

    /// Throws ConfigError naming the first violated invariant.
    void check() const;

    /// Sense-leg bias I_1 in low mode.
    [[nodiscard]] double sense_current() const { return (iqLowA - iRefA - iEa1A - iEa2A) / (1.0 + bufferCurrentRatio); }
    /// Buffer bias I_2 in low mode.
    [[nodiscard]] double buffer_current() const { return bufferCurrentRatio * sense_current(); }
};

/// Every field name with a pointer to its member; drives the file format.
struct ParamField {
    const char* name;
    double LdoParams::*member;
};
const std::vector<ParamField>& param_fields();

/// Unknown keys and invalid values raise ParseError / ConfigError.
LdoParams params_from_kv(const KvFile& file);
LdoParams load_params(const std::string& path);
std::string params_to_text(const LdoParams& params);

/// Multiplier applied to the switched bias branches in a mode: 1 in low
/// mode, (iqHighMaxA - iRefA)/(iqLowA - iRefA) in high mode.
double bias_scale(const LdoParams& params, Mode mode);

/// Per-mode values of every behavioral block.
struct StageValues {
    double iRefA;  ///< reference branch, identical in both modes
    double gmEa1, roEa1, iMaxEa1;
    double gmEa2, roEa2, iMaxEa2;
    double gmSense, roSense, gmCtrl;
    double gmBuffer, pullUpA, pullDownA;
    double gmPass, roPass, passK;
    double biasSinkA;
};
StageValues stage_values(const LdoParams& params, Mode mode);

enum class LoadModel { Resistive, CurrentSink };

struct SmallSignalOptions {
    /// false replaces the buffer by a direct V_D to V_G connection.
    bool gateBuffer = true;
    LoadModel load = LoadModel::Resistive;
};

/// Linear model at (mode, load). Nodes V_IN, V_REF, V_EA, V_CTRL, V_B, V_D,
/// V_G, V_OUT are labeled. Break ports: "loop1" between V_D and the buffer
/// input, "loop2" at V_EA, "overall" at the pass gate. The supply source is named "vin". Throws RangeError when the
/// load is outside the mode's range.
Circuit build_small_signal(const LdoParams& params, Mode mode, double iLoadA, const SmallSignalOptions& options = {});

/// Options for measuring "loop1", "loop2" or "overall" on a small-signal
/// model. loop1 is measured in isolation, with the error-amplifier loop held open.
LoopGainOptions loop_options(const std::string& loop, const AcOptions& ac = {});

/// Time-varying inputs of the transient model.
struct LdoStimuli {
    std::vector<PwlPoint> loadA;    ///< load current waveform; empty means no load
    std::vector<PwlPoint> enableV;  ///< V_EN waveform; required
    std::optional<SineRider> supplyRipple;
};

struct LdoTransient {
    Circuit circuit;  ///< low-mode variant
    TransientOptions options;  ///< highStateCircuit filled in
    std::vector<Stimulus> stimuli;
};

/// Nonlinear model switched between mode variants on V_EN crossings.
/// Throws ConfigError when no V_EN waveform is given.
LdoTransient build_transient(const LdoParams& params, const LdoStimuli& stimuli);

/// Nonlinear model frozen in one mode with a constant load.
Circuit build_transient_circuit(const LdoParams& params, Mode mode, double iLoadA);

/// Mode-switch load step. V_EN and the load rise together at riseS; the load
/// falls at fallS and V_EN drops once the load has reached zero.
struct StepScenario {
    double riseS = 0.5e-6;
    double fallS = 3.0e-6;
    double edgeS = 80e-9;
    double enableEdgeS = 1e-9;
    double endS = 5.5e-6;
    double loadHighA = 15e-3;
};
LdoStimuli step_stimuli(const LdoParams& params, const StepScenario& scenario);

/// Scheduled supply current of the regulator excluding load. Throws
/// RangeError in low mode above loadLowMaxA and ArgumentError for a negative load.
double quiescent_current(const LdoParams& params, Mode mode, double iLoadA);

/// High iff venVolts > vInV/2.
Mode mode_from_ven(double venVolts, double vInV);

}  // namespace ldosim
