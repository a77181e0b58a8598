#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ldosim/analysis.hpp"
#include "ldosim/ldo.hpp"
#include "ldosim/metrics.hpp"

namespace ldosim {

enum class Command { Ac, LoopGain, Transient, Psr, Metrics, Report };

std::string to_string(Command command);
/// Throws ConfigError for an unknown name.
Command command_from_string(std::string_view name);

/// Process exit statuses of the batch front-end.
enum ExitStatus : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,      ///< bad flags, config, params or netlist; unsupported request
    kExitSolver = 3,      ///< DC, AC or transient solver failure
    kExitAcceptance = 4,  ///< report ran but a comparison row failed
};

/// Named node-voltage waveform source for netlist transients (`[stimulus.<name>]`).
struct NetlistStimulus {
    std::string name;
    std::string source;  ///< element name of a V or I source
    std::vector<PwlPoint> waveform;
    bool digital = false;
};

/// Everything a run needs. Defaults reproduce the shipped report.
struct RunConfig {
    Command command = Command::Report;
    std::string paramsPath;                  ///< empty: built-in defaults
    std::optional<std::string> netlistPath;  ///< replaces the built-in regulator model
    std::string outDir = ".";
    std::string configText;                  ///< raw config file bytes, hashed into sidecars

    // [ac]
    FrequencySweep acSweep{10.0, 1e9, 40};
    std::string acInput = "vin";
    std::string acOutput = "V_OUT";
    Mode acMode = Mode::Low;
    double acLoadA = 0.0;

    // [loopgain]
    FrequencySweep loopSweep{10.0, 1e10, 40};
    double loopLoadLowA = 0.0;
    double loopLoadHighA = 15e-3;
    /// Loads at which the overall loop phase margin is checked in `report`.
    std::vector<double> marginLoadsLowA{0.0, 500e-6};
    std::vector<double> marginLoadsHighA{5e-3, 15e-3};

    // [psr]
    FrequencySweep psrSweep{1e3, 1e7, 40};
    std::vector<double> psrLoadsLowA{0.0, 500e-6};
    std::vector<double> psrLoadsHighA{5e-3, 15e-3};
    std::string psrSupply = "vin";  ///< netlist runs only
    std::string psrOutput = "V_OUT";
    Band psrLowBand{1e3, 1e4};
    Band psrWideBand{1e3, 1e7};

    // [transient]
    StepScenario step;
    /// Overrides of the step waveforms; nullopt keeps the scenario's.
    std::optional<std::vector<PwlPoint>> loadWaveform;
    std::optional<std::vector<PwlPoint>> enableWaveform;  ///< empty vector = no V_EN stimulus
    double tolRel = 1e-4;
    double tolAbsV = 1e-5;
    double maxStepS = 20e-9;
    std::vector<NetlistStimulus> netlistStimuli;

    // [metrics]
    double settlingBandFrac = 0.01;

    /// Throws ConfigError on an inconsistent setting.
    void check() const;
};

/// Reads a config in the same key/value format as the parameter file.
/// Relative paths are taken relative to `baseDir`. Unknown sections or keys
/// raise ConfigError naming the line.
RunConfig parse_run_config(std::string_view text, const std::string& baseDir = ".");
RunConfig load_run_config(const std::string& path);

/// One row of the reproduction table written by `report`.
struct ComparisonRow {
    std::string quantity;
    std::optional<double> reference;  ///< target value, when one exists
    std::optional<double> model;      ///< nullopt when the quantity could not be measured
    double lower;                     ///< acceptance band, inclusive
    double upper;
    std::string unit;
    bool pass = false;
};

std::string to_csv(const std::vector<ComparisonRow>& rows);

struct Artifact {
    std::string name;  ///< file name inside the output directory
    std::string content;
};

struct RunResult {
    int exitStatus = kExitOk;
    std::string message;               ///< error text or a one-line summary
    std::vector<Artifact> artifacts;   ///< in write order, sidecars included
    std::vector<ComparisonRow> comparison;
    std::optional<MetricsReport> metrics;
};

/// Runs the command and writes artifacts (each with a `.meta.json` sidecar)
/// into outDir after all computation has finished. Never throws; failures
/// map onto ExitStatus.
RunResult run(const RunConfig& config);

/// As run() but without touching the file system.
RunResult run_in_memory(const RunConfig& config);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace ldosim
