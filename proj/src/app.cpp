#include "ldosim/app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ldosim/errors.hpp"
#include "ldosim/kvfile.hpp"
#include "ldosim/metrics.hpp"
#include "ldosim/netlist.hpp"
#include "ldosim/units.hpp"

namespace ldosim {

namespace fs = std::filesystem;

std::string to_string(Command command) {
    switch (command) {
        case Command::Ac: return "ac";
        case Command::LoopGain: return "loopgain";
        case Command::Transient: return "transient";
        case Command::Psr: return "psr";
        case Command::Metrics: return "metrics";
        case Command::Report: return "report";
    }
    return "?";
}

Command command_from_string(std::string_view name) {
    for (Command c : {Command::Ac, Command::LoopGain, Command::Transient, Command::Psr, Command::Metrics, Command::Report})
        if (to_string(c) == name) return c;
    throw ConfigError("unknown command '" + std::string(name) + "' (expected ac, loopgain, transient, psr, metrics or report)");
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

ConfigError entry_error(const KvFile::Entry& e, const std::string& what) {
    return ConfigError("line " + std::to_string(e.line) + ": [" + e.section + "] " + e.key + ": " + what);
}

/// Pulls typed values out of a KvFile and remembers which entries were read,
/// so leftovers can be reported as unknown keys.
class ConfigReader {
public:
    explicit ConfigReader(KvFile file) : file_(std::move(file)) {}

    const KvFile::Entry* take(std::string_view section, std::string_view key) {
        const auto* e = file_.find(section, key);
        if (e) used_.insert(e);
        return e;
    }

    void number(std::string_view section, std::string_view key, double& out) {
        if (const auto* e = take(section, key)) out = to_number(*e, e->value);
    }

    void integer(std::string_view section, std::string_view key, int& out) {
        double v = out;
        number(section, key, v);
        if (v != std::floor(v) || v < 1 || v > 1e6) throw entry_error(*file_.find(section, key), "expected a positive integer");
        out = static_cast<int>(v);
    }

    void text(std::string_view section, std::string_view key, std::string& out) {
        if (const auto* e = take(section, key)) {
            if (e->value.empty()) throw entry_error(*e, "empty value");
            out = e->value;
        }
    }

    void list(std::string_view section, std::string_view key, std::vector<double>& out) {
        const auto* e = take(section, key);
        if (!e) return;
        out.clear();
        for (const auto& item : split_list(e->value)) out.push_back(to_number(*e, item));
        if (out.empty()) throw entry_error(*e, "empty list");
    }

    void band(std::string_view section, std::string_view key, Band& out) {
        std::vector<double> v;
        list(section, key, v);
        if (v.empty()) return;
        if (v.size() != 2) throw entry_error(*file_.find(section, key), "expected two frequencies");
        out = {v[0], v[1]};
    }

    /// `t0 v0 t1 v1 ...`; "none" gives an empty waveform.
    std::optional<std::vector<PwlPoint>> pwl(std::string_view section, std::string_view key) {
        const auto* e = take(section, key);
        if (!e) return std::nullopt;
        if (lower(e->value) == "none") return std::vector<PwlPoint>{};
        const auto items = split_list(e->value);
        if (items.empty() || items.size() % 2 != 0) throw entry_error(*e, "expected time/value pairs or 'none'");
        std::vector<PwlPoint> pts;
        for (std::size_t i = 0; i < items.size(); i += 2) pts.push_back({to_number(*e, items[i]), to_number(*e, items[i + 1])});
        return pts;
    }

    void flag(std::string_view section, std::string_view key, bool& out) {
        const auto* e = take(section, key);
        if (!e) return;
        const auto v = lower(e->value);
        if (v == "true" || v == "yes" || v == "on" || v == "1") out = true;
        else if (v == "false" || v == "no" || v == "off" || v == "0") out = false;
        else throw entry_error(*e, "expected true or false");
    }

    void sweep(std::string_view section, FrequencySweep& out) {
        number(section, "start", out.startHz);
        number(section, "stop", out.stopHz);
        integer(section, "points_per_decade", out.pointsPerDecade);
    }

    [[nodiscard]] const KvFile& file() const { return file_; }

    /// Throws for the first entry nobody asked for.
    void reject_unused() const {
        for (const auto& e : file_.entries())
            if (!used_.count(&e)) throw entry_error(e, "unknown key");
    }

private:
    static double to_number(const KvFile::Entry& e, const std::string& text) {
        const auto v = parse_si(text);
        if (!v || !std::isfinite(*v)) throw entry_error(e, "'" + text + "' is not a number");
        return *v;
    }

    KvFile file_;
    std::set<const KvFile::Entry*> used_;
};

std::string resolve_path(const std::string& baseDir, const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? path : (fs::path(baseDir) / p).lexically_normal().string();
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& baseDir) {
    KvFile kv;
    try {
        kv = KvFile::parse(text);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ConfigReader r(std::move(kv));
    RunConfig c;
    c.configText = std::string(text);

    for (const auto& e : r.file().entries())
        if (e.section.empty()) throw entry_error(e, "keys must sit inside a section");

    std::string path;
    if (r.take("run", "params")) {
        r.text("run", "params", path);
        c.paramsPath = resolve_path(baseDir, path);
    }
    if (r.take("run", "out")) {
        r.text("run", "out", path);
        c.outDir = resolve_path(baseDir, path);
    }
    if (r.take("netlist", "path")) {
        r.text("netlist", "path", path);
        c.netlistPath = resolve_path(baseDir, path);
    }

    r.sweep("ac", c.acSweep);
    r.text("ac", "input", c.acInput);
    r.text("ac", "output", c.acOutput);
    if (const auto* e = r.take("ac", "mode")) {
        const auto m = lower(e->value);
        if (m == "low") c.acMode = Mode::Low;
        else if (m == "high") c.acMode = Mode::High;
        else throw entry_error(*e, "expected low or high");
    }
    r.number("ac", "load", c.acLoadA);

    r.sweep("loopgain", c.loopSweep);
    r.number("loopgain", "load_low", c.loopLoadLowA);
    r.number("loopgain", "load_high", c.loopLoadHighA);
    r.list("loopgain", "margin_loads_low", c.marginLoadsLowA);
    r.list("loopgain", "margin_loads_high", c.marginLoadsHighA);

    r.sweep("psr", c.psrSweep);
    r.list("psr", "loads_low", c.psrLoadsLowA);
    r.list("psr", "loads_high", c.psrLoadsHighA);
    r.text("psr", "supply", c.psrSupply);
    r.text("psr", "output", c.psrOutput);
    r.band("psr", "low_band", c.psrLowBand);
    r.band("psr", "wide_band", c.psrWideBand);

    r.number("transient", "rise", c.step.riseS);
    r.number("transient", "fall", c.step.fallS);
    r.number("transient", "edge", c.step.edgeS);
    r.number("transient", "enable_edge", c.step.enableEdgeS);
    r.number("transient", "end", c.step.endS);
    r.number("transient", "load_high", c.step.loadHighA);
    r.number("transient", "tol_rel", c.tolRel);
    r.number("transient", "tol_abs", c.tolAbsV);
    r.number("transient", "max_step", c.maxStepS);
    c.loadWaveform = r.pwl("transient", "load");
    c.enableWaveform = r.pwl("transient", "enable");

    for (const auto& section : r.file().sections()) {
        if (!section.starts_with("stimulus.")) continue;
        NetlistStimulus s;
        s.name = section.substr(9);
        if (s.name.empty()) throw ConfigError("config: empty stimulus name in [" + section + "]");
        r.text(section, "source", s.source);
        if (s.source.empty()) throw ConfigError("config: [" + section + "] needs a source");
        auto w = r.pwl(section, "pwl");
        if (!w || w->empty()) throw ConfigError("config: [" + section + "] needs a pwl waveform");
        s.waveform = std::move(*w);
        r.flag(section, "digital", s.digital);
        c.netlistStimuli.push_back(std::move(s));
    }

    r.number("metrics", "settling_band", c.settlingBandFrac);

    r.reject_unused();
    c.check();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    const std::string text = read_file(path);
    const auto base = fs::path(path).parent_path().string();
    try {
        return parse_run_config(text, base.empty() ? "." : base);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void RunConfig::check() const {
    auto sweepOk = [](const FrequencySweep& s, const char* name) {
        try {
            (void)s.grid();
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string(name) + " sweep: " + e.what());
        }
    };
    sweepOk(acSweep, "ac");
    sweepOk(loopSweep, "loopgain");
    sweepOk(psrSweep, "psr");

    auto nonNegative = [](const std::vector<double>& v, const char* name) {
        for (double x : v)
            if (!(x >= 0.0)) throw ConfigError(std::string(name) + ": load currents must be >= 0");
    };
    nonNegative({acLoadA, loopLoadLowA, loopLoadHighA, step.loadHighA}, "load");
    nonNegative(marginLoadsLowA, "loopgain margin_loads_low");
    nonNegative(marginLoadsHighA, "loopgain margin_loads_high");
    nonNegative(psrLoadsLowA, "psr loads_low");
    nonNegative(psrLoadsHighA, "psr loads_high");

    if (!(tolRel > 0.0 && tolAbsV > 0.0 && maxStepS > 0.0)) throw ConfigError("transient tolerances and max_step must be > 0");
    if (!(step.riseS >= 0.0 && step.edgeS > 0.0 && step.enableEdgeS > 0.0 &&
          step.riseS + step.edgeS <= step.fallS && step.fallS + step.edgeS + step.enableEdgeS <= step.endS))
        throw ConfigError("transient: need 0 <= rise, rise + edge <= fall and fall + edge + enable_edge <= end");
    if (!(settlingBandFrac > 0.0 && settlingBandFrac <= 0.1)) throw ConfigError("metrics settling_band must be in (0, 0.1]");
    if (!(psrLowBand.loHz <= psrLowBand.hiHz && psrWideBand.loHz <= psrWideBand.hiHz))
        throw ConfigError("psr bands must be given low edge first");
    if (!netlistPath && !netlistStimuli.empty())
        throw ConfigError("[stimulus.*] sections apply to netlist runs only");
}

std::string to_csv(const std::vector<ComparisonRow>& rows) {
    auto num = [](const std::optional<double>& v) { return v ? format_sci(*v, 6) : std::string(); };
    auto bound = [](double v) { return std::isinf(v) ? std::string(v > 0 ? "inf" : "-inf") : format_sci(v, 6); };
    std::string out = "quantity,reference,model,lower,upper,unit,status\n";
    for (const auto& r : rows)
        out += r.quantity + ',' + num(r.reference) + ',' + (r.model ? num(r.model) : "none") + ',' + bound(r.lower) + ',' +
               bound(r.upper) + ',' + r.unit + ',' + (r.pass ? "pass" : "fail") + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Command execution
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kLoops[] = {"loop1", "loop2", "overall"};

/// Compact value tags for file and row names: "0A", "500uA", "15mA", "10kHz".
std::string si_tag(double value, const std::string& unit) {
    if (value == 0.0) return "0" + unit;
    struct Prefix {
        double scale;
        const char* name;
    };
    static constexpr Prefix prefixes[] = {{1e9, "G"}, {1e6, "M"}, {1e3, "k"}, {1.0, ""}, {1e-3, "m"}, {1e-6, "u"}, {1e-9, "n"}};
    const Prefix* chosen = &prefixes[std::size(prefixes) - 1];
    for (const auto& pr : prefixes)
        if (std::abs(value) >= pr.scale * (1 - 1e-12)) {
            chosen = &pr;
            break;
        }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", value / chosen->scale);
    std::string s = buf;
    std::replace(s.begin(), s.end(), '.', 'p');
    return s + chosen->name + unit;
}

std::string load_tag(double amps) { return si_tag(amps, "A"); }

std::string mode_tag(Mode m) { return m == Mode::Low ? "low" : "high"; }

std::string opt_num(const std::optional<double>& v) { return v ? format_sci(*v, 6) : "none"; }

// Plot scripts only use matplotlib and the csv module.
const char* kPlotPrelude = R"(import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    return {h: [float(r[i]) for r in body] for i, h in enumerate(header)}


def save(fig):
    out = os.path.splitext(os.path.abspath(__file__))[0] + ".png"
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(out)

)";

std::string py_list(const std::vector<std::string>& items) {
    std::string s = "[";
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", \"" : "\"") + items[i] + "\"";
    return s + "]";
}

std::string bode_script(const std::string& title, const std::vector<std::string>& files, bool withPhase) {
    std::string s = kPlotPrelude;
    s += "FILES = " + py_list(files) + "\n\n";
    s += withPhase ? "fig, (ax_mag, ax_ph) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))\n"
                   : "fig, ax_mag = plt.subplots(figsize=(8, 4))\nax_ph = None\n";
    s += "for name in FILES:\n"
         "    d = read(name)\n"
         "    ax_mag.semilogx(d[\"freq_hz\"], d[\"mag_db\"], label=name[:-4])\n"
         "    if ax_ph is not None:\n"
         "        ax_ph.semilogx(d[\"freq_hz\"], d[\"phase_deg\"], label=name[:-4])\n"
         "ax_mag.set_ylabel(\"magnitude (dB)\")\n"
         "ax_mag.grid(True, which=\"both\", alpha=0.3)\n"
         "ax_mag.legend(fontsize=7)\n"
         "ax_mag.set_title(\"" + title + "\")\n"
         "if ax_ph is not None:\n"
         "    ax_ph.set_ylabel(\"phase (deg)\")\n"
         "    ax_ph.grid(True, which=\"both\", alpha=0.3)\n"
         "    ax_ph.set_xlabel(\"frequency (Hz)\")\n"
         "else:\n"
         "    ax_mag.set_xlabel(\"frequency (Hz)\")\n"
         "save(fig)\n";
    return s;
}

std::string transient_script(const std::string& file) {
    std::string s = kPlotPrelude;
    s += "d = read(\"" + file + "\")\n"
         "t = [x * 1e6 for x in d[\"time_s\"]]\n"
         "names = [k for k in d if k != \"time_s\"]\n"
         "shown = [k for k in (\"V_OUT\", \"V_EN\") if k in d] or names[:1]\n"
         "fig, axes = plt.subplots(len(shown), 1, sharex=True, figsize=(8, 2.5 * len(shown)), squeeze=False)\n"
         "for ax, name in zip(axes[:, 0], shown):\n"
         "    ax.plot(t, d[name])\n"
         "    ax.set_ylabel(name + \" (V)\")\n"
         "    ax.grid(True, alpha=0.3)\n"
         "axes[-1, 0].set_xlabel(\"time (us)\")\n"
         "save(fig)\n";
    return s;
}

struct Inputs {
    LdoParams params;
    std::string paramsSource;  ///< path or "built-in"
    std::string paramsHash;
    std::optional<Circuit> netlist;
    std::string netlistHash;
};

Inputs load_inputs(const RunConfig& cfg) {
    Inputs in;
    if (cfg.paramsPath.empty()) {
        in.paramsSource = "built-in";
        in.paramsHash = fnv1a_hex(params_to_text(in.params));
    } else {
        const std::string text = read_file(cfg.paramsPath);
        try {
            in.params = params_from_kv(KvFile::parse(text));
        } catch (const ParseError& e) {
            throw ConfigError(cfg.paramsPath + ": " + e.what());
        }
        in.paramsSource = cfg.paramsPath;
        in.paramsHash = fnv1a_hex(text);
    }
    in.params.check();
    if (cfg.netlistPath) {
        const std::string text = read_file(*cfg.netlistPath);
        try {
            in.netlist = parse_netlist(text);
        } catch (const ParseError& e) {
            throw ConfigError(*cfg.netlistPath + ": " + e.what());
        }
        const auto report = validate(*in.netlist);
        if (!report.ok()) throw ConfigError(*cfg.netlistPath + ": " + report.violations.front().message);
        in.netlistHash = fnv1a_hex(text);
    }
    return in;
}

NodeId resolve_node(const Circuit& c, const std::string& name) {
    if (auto n = c.find_node(name)) return *n;
    if (!name.empty() && std::all_of(name.begin(), name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        const auto idx = std::stoul(name);
        if (idx < c.node_count()) return NodeId{idx};
    }
    throw ConfigError("unknown node '" + name + "'");
}

ElementId resolve_source(const Circuit& c, const std::string& name) {
    const auto id = c.find_element(name);
    if (!id) throw ConfigError("unknown source element '" + name + "'");
    const auto& e = c.element(*id);
    if (!std::holds_alternative<VSource>(e) && !std::holds_alternative<ISource>(e))
        throw ConfigError("element '" + name + "' is not a voltage or current source");
    return *id;
}

struct LoopRow {
    Mode mode;
    double loadA;
    std::string loop;
    LoopGainResult result;
};

struct PsrRow {
    Mode mode;
    double loadA;
    std::string file;
    FrequencyResponse response;
    PsrMargins margins;
};

struct TransientRun {
    Circuit circuit;
    TransientTrace trace;
};

/// Executes one command, collecting artifacts in write order.
class Runner {
public:
    Runner(const RunConfig& cfg, Inputs in) : cfg_(cfg), in_(std::move(in)) {}

    RunResult execute() {
        switch (cfg_.command) {
            case Command::Ac: ac(); break;
            case Command::LoopGain: loopgain(); break;
            case Command::Psr: psr_cmd(); break;
            case Command::Transient: transient(); break;
            case Command::Metrics: metrics(); break;
            case Command::Report: report(); break;
        }
        RunResult r;
        r.artifacts = with_sidecars();
        r.comparison = comparison_;
        r.metrics = metrics_;
        r.message = summary_;
        if (cfg_.command == Command::Report &&
            std::any_of(comparison_.begin(), comparison_.end(), [](const ComparisonRow& row) { return !row.pass; }))
            r.exitStatus = kExitAcceptance;
        return r;
    }

private:
    void emit(std::string name, std::string content) { out_.push_back({std::move(name), std::move(content)}); }

    std::vector<Artifact> with_sidecars() const {
        std::vector<Artifact> all;
        for (const auto& a : out_) {
            nlohmann::ordered_json meta;
            meta["artifact"] = a.name;
            meta["command"] = to_string(cfg_.command);
            meta["config_hash"] = fnv1a_hex(cfg_.configText);
            meta["params_source"] = in_.paramsSource;
            meta["params_hash"] = in_.paramsHash;
            if (cfg_.netlistPath) {
                meta["netlist_source"] = *cfg_.netlistPath;
                meta["netlist_hash"] = in_.netlistHash;
            }
            meta["content_hash"] = fnv1a_hex(a.content);
            all.push_back(a);
            all.push_back({a.name + ".meta.json", meta.dump(2) + "\n"});
        }
        return all;
    }

    AcOptions ac_options() const { return AcOptions{}; }

    // -- ac ------------------------------------------------------------------

    void ac() {
        const Circuit c = in_.netlist ? *in_.netlist : build_small_signal(in_.params, cfg_.acMode, cfg_.acLoadA);
        const auto r = ac_sweep(c, cfg_.acSweep, resolve_source(c, cfg_.acInput), resolve_node(c, cfg_.acOutput), ac_options());
        emit("ac.csv", to_csv(r));
        emit("plot_ac.py", bode_script("V(" + cfg_.acOutput + ") / " + cfg_.acInput, {"ac.csv"}, true));
        summary_ = "ac: " + std::to_string(r.size()) + " points";
    }

    // -- loop gain -------------------------------------------------------------

    std::vector<LoopRow> run_loops() const {
        std::vector<LoopRow> rows;
        for (Mode m : {Mode::Low, Mode::High}) {
            const double load = m == Mode::Low ? cfg_.loopLoadLowA : cfg_.loopLoadHighA;
            const Circuit c = build_small_signal(in_.params, m, load);
            for (const char* loop : kLoops)
                rows.push_back({m, load, loop, loop_gain(c, loop, cfg_.loopSweep, loop_options(loop, ac_options()))});
        }
        return rows;
    }

    static std::string loop_file(const LoopRow& r) { return "loopgain_" + mode_tag(r.mode) + "_" + r.loop + ".csv"; }

    void emit_loops(const std::vector<LoopRow>& rows) {
        std::string summary = "mode,load_a,loop,dc_gain_db,ugbw_hz,phase_margin_deg\n";
        std::vector<std::string> files;
        for (const auto& r : rows) {
            emit(loop_file(r), to_csv(r.result.response));
            files.push_back(loop_file(r));
            summary += mode_tag(r.mode) + ',' + format_sci(r.loadA, 6) + ',' + r.loop + ',' +
                       format_sci(r.result.dcGainDb, 6) + ',' + opt_num(r.result.ugbwHz) + ',' +
                       opt_num(r.result.phaseMarginDeg) + '\n';
        }
        emit("loopgain_summary.csv", summary);
        emit("plot_loopgain.py", bode_script("loop gain", files, true));
    }

    void loopgain() {
        if (in_.netlist) {
            const Circuit& c = *in_.netlist;
            std::string summary = "loop,dc_gain_db,ugbw_hz,phase_margin_deg\n";
            std::vector<std::string> files;
            for (const auto& e : c.elements()) {
                const auto* bp = std::get_if<BreakPort>(&e);
                if (!bp) continue;
                LoopGainOptions opt;
                opt.ac = ac_options();
                const auto r = loop_gain(c, bp->label, cfg_.loopSweep, opt);
                files.push_back("loopgain_" + bp->label + ".csv");
                emit(files.back(), to_csv(r.response));
                summary += bp->label + ',' + format_sci(r.dcGainDb, 6) + ',' + opt_num(r.ugbwHz) + ',' +
                           opt_num(r.phaseMarginDeg) + '\n';
            }
            if (files.empty()) throw ConfigError("netlist has no BREAK ports");
            emit("loopgain_summary.csv", summary);
            emit("plot_loopgain.py", bode_script("loop gain", files, true));
            summary_ = "loopgain: " + std::to_string(files.size()) + " break ports";
            return;
        }
        emit_loops(run_loops());
        summary_ = "loopgain: 3 loops in 2 modes";
    }

    // -- PSR -------------------------------------------------------------------

    std::vector<PsrRow> run_psr() const {
        std::vector<PsrRow> rows;
        for (Mode m : {Mode::Low, Mode::High})
            for (double load : m == Mode::Low ? cfg_.psrLoadsLowA : cfg_.psrLoadsHighA) {
                const Circuit c = build_small_signal(in_.params, m, load);
                auto resp = psr(c, cfg_.psrSweep, resolve_source(c, "vin"), c.node("V_OUT"), ac_options());
                const auto margins = psr_margins(resp, cfg_.psrLowBand, cfg_.psrWideBand);
                rows.push_back({m, load, "psr_" + mode_tag(m) + "_" + load_tag(load) + ".csv", std::move(resp), margins});
            }
        return rows;
    }

    void emit_psr(const std::vector<PsrRow>& rows) {
        std::string summary = "mode,load_a,worst_db_low_band,worst_db_wide_band\n";
        std::vector<std::string> files;
        for (const auto& r : rows) {
            emit(r.file, to_csv(r.response));
            files.push_back(r.file);
            summary += mode_tag(r.mode) + ',' + format_sci(r.loadA, 6) + ',' + format_sci(r.margins.worstDbLow, 6) + ',' +
                       format_sci(r.margins.worstDbWide, 6) + '\n';
        }
        emit("psr_summary.csv", summary);
        emit("plot_psr.py", bode_script("supply rejection", files, false));
    }

    void psr_cmd() {
        if (in_.netlist) {
            const Circuit& c = *in_.netlist;
            const auto r = psr(c, cfg_.psrSweep, resolve_source(c, cfg_.psrSupply), resolve_node(c, cfg_.psrOutput), ac_options());
            emit("psr.csv", to_csv(r));
            emit("plot_psr.py", bode_script("supply rejection", {"psr.csv"}, false));
            summary_ = "psr: " + std::to_string(r.size()) + " points";
            return;
        }
        const auto rows = run_psr();
        emit_psr(rows);
        summary_ = "psr: " + std::to_string(rows.size()) + " operating points";
    }

    // -- transient ---------------------------------------------------------------

    TransientRun run_step() const {
        LdoStimuli st = step_stimuli(in_.params, cfg_.step);
        if (cfg_.loadWaveform) st.loadA = *cfg_.loadWaveform;
        if (cfg_.enableWaveform) st.enableV = *cfg_.enableWaveform;
        auto lt = build_transient(in_.params, st);
        lt.options.tEndS = cfg_.step.endS;
        lt.options.tolRel = cfg_.tolRel;
        lt.options.tolAbsV = cfg_.tolAbsV;
        lt.options.maxStepS = cfg_.maxStepS;
        auto trace = simulate(lt.circuit, lt.stimuli, lt.options);
        return {std::move(lt.circuit), std::move(trace)};
    }

    TransientRun run_netlist_transient() const {
        const Circuit& c = *in_.netlist;
        std::vector<Stimulus> stimuli;
        for (const auto& s : cfg_.netlistStimuli) {
            Stimulus st{resolve_source(c, s.source), s.waveform, std::nullopt, s.digital, s.name};
            try {
                st.check();
            } catch (const ArgumentError& e) {
                throw ConfigError("[stimulus." + s.name + "]: " + e.what());
            }
            stimuli.push_back(std::move(st));
        }
        TransientOptions opt;
        opt.tEndS = cfg_.step.endS;
        opt.tolRel = cfg_.tolRel;
        opt.tolAbsV = cfg_.tolAbsV;
        opt.maxStepS = cfg_.maxStepS;
        return {c, simulate(c, stimuli, opt)};
    }

    void emit_transient(const TransientRun& t) {
        emit("transient.csv", to_csv(t.trace, t.circuit));
        emit("plot_transient.py", transient_script("transient.csv"));
    }

    void transient() {
        const auto t = in_.netlist ? run_netlist_transient() : run_step();
        emit_transient(t);
        summary_ = "transient: " + std::to_string(t.trace.timesS.size()) + " samples";
    }

    // -- metrics -----------------------------------------------------------------

    MetricsReport compute_metrics(const TransientRun& t, const std::vector<PsrRow>& psrRows) const {
        const auto& p = in_.params;
        const double target = p.vOutTargetV;
        MetricsReport m;
        const auto ex = excursions(t.trace, t.circuit, "V_OUT", target);
        m.undershootV = ex.undershootV;
        m.overshootV = ex.overshootV;
        // Step-up settling: the window closes when the load starts to fall.
        const auto v = series(t.trace, t.circuit, "V_OUT");
        const auto& times = t.trace.timesS;
        const auto stop = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), cfg_.step.fallS) - times.begin());
        m.settlingTimeS = settling_time(std::span(times).first(stop), std::span(v).first(stop), target, cfg_.settlingBandFrac,
                                        cfg_.step.riseS);
        const double iqLow = quiescent_current(p, Mode::Low, 0.0);
        m.responseTimeS = response_time(p.cLoadF, m.undershootV, cfg_.step.loadHighA);
        m.fomS = m.responseTimeS > 0.0 ? fom(m.responseTimeS, iqLow, cfg_.step.loadHighA) : 0.0;
        m.currentEfficiency = current_efficiency(cfg_.step.loadHighA, iqLow);
        m.psrWorstDbLow = -HUGE_VAL;
        m.psrWorstDbWide = -HUGE_VAL;
        for (const auto& r : psrRows) {
            m.psrWorstDbLow = std::max(m.psrWorstDbLow, r.margins.worstDbLow);
            m.psrWorstDbWide = std::max(m.psrWorstDbWide, r.margins.worstDbWide);
        }
        m.iqReductionFactor = iq_reduction(p.iqConventionalA, iqLow);
        m.check();
        return m;
    }

    std::string iq_table() const {
        const auto& p = in_.params;
        std::vector<std::pair<Mode, double>> points{{Mode::Low, 0.0}, {Mode::Low, p.loadLowMaxA}};
        for (double f : {0.0, 0.25, 0.5, 0.75, 1.0})
            points.push_back({Mode::High, p.loadHighMinA + f * (p.loadHighMaxA - p.loadHighMinA)});
        std::string s = "mode,load_a,iq_a,current_efficiency\n";
        for (const auto& [m, load] : points) {
            const double iq = quiescent_current(p, m, load);
            s += mode_tag(m) + ',' + format_sci(load, 6) + ',' + format_sci(iq, 6) + ',' +
                 format_sci(current_efficiency(load, iq), 6) + '\n';
        }
        return s;
    }

    void emit_metrics(const MetricsReport& m) {
        const auto rs = rows(m);
        emit("metrics.csv", to_csv(rs));
        emit("metrics.txt", to_text_table(rs));
        emit("iq_table.csv", iq_table());
    }

    void metrics() {
        metrics_ = compute_metrics(run_step(), run_psr());
        emit_metrics(*metrics_);
        summary_ = "metrics: " + std::to_string(rows(*metrics_).size()) + " values";
    }

    // -- report ------------------------------------------------------------------

    void add_row(std::string quantity, std::optional<double> reference, std::optional<double> model, double lower,
                 double upper, std::string unit, bool strictLower = false) {
        bool pass = model.has_value() && std::isfinite(*model) && *model <= upper &&
                    (strictLower ? *model > lower : *model >= lower);
        comparison_.push_back({std::move(quantity), reference, model, lower, upper, std::move(unit), pass});
    }

    std::optional<double> overall_pm(Mode m, double load, bool buffer) const {
        SmallSignalOptions opt;
        opt.gateBuffer = buffer;
        return loop_gain(build_small_signal(in_.params, m, load, opt), "overall", cfg_.loopSweep,
                         loop_options("overall", ac_options()))
            .phaseMarginDeg;
    }

    void report() {
        const auto& p = in_.params;
        constexpr double inf = std::numeric_limits<double>::infinity();

        const auto loops = run_loops();
        const auto psrRows = run_psr();
        const auto step = run_step();
        metrics_ = compute_metrics(step, psrRows);
        const auto& m = *metrics_;

        // Metric identities evaluated at the reference operating point.
        const double trId = response_time(p.cLoadF, 0.100, p.loadHighMaxA);
        const double iqLow = quiescent_current(p, Mode::Low, 0.0);
        add_row("response_time_identity", 1.07e-9, trId, 1.07e-9 * 0.99, 1.07e-9 * 1.01, "s");
        add_row("fom_identity", 0.21e-12, fom(trId, iqLow, p.loadHighMaxA), 0.21e-12 * 0.97, 0.21e-12 * 1.03, "s");
        add_row("current_efficiency", 0.9998, current_efficiency(p.loadHighMaxA, iqLow), 0.9998 - 5e-5, 0.9998 + 5e-5, "1");
        add_row("iq_reduction", 14.0, m.iqReductionFactor, 14.0 * (1 - 1e-12), 14.0 * (1 + 1e-12), "1");

        // Loop dynamics.
        for (const auto& r : loops) {
            if (r.loop == "overall") {
                const bool low = r.mode == Mode::Low;
                add_row("ugbw_overall_" + mode_tag(r.mode) + "_" + load_tag(r.loadA), low ? 4.5e6 : 165e6, r.result.ugbwHz,
                        low ? 3e6 : 120e6, low ? 6e6 : 200e6, "Hz");
            } else {
                add_row("phase_margin_" + r.loop + "_" + mode_tag(r.mode) + "_" + load_tag(r.loadA), std::nullopt,
                        r.result.phaseMarginDeg, 45.0, 180.0, "deg", true);
            }
        }
        for (Mode md : {Mode::Low, Mode::High})
            for (double load : md == Mode::Low ? cfg_.marginLoadsLowA : cfg_.marginLoadsHighA)
                add_row("phase_margin_overall_" + mode_tag(md) + "_" + load_tag(load), std::nullopt,
                        overall_pm(md, load, true), 45.0, 180.0, "deg", true);
        const auto withBuf = overall_pm(Mode::High, cfg_.loopLoadHighA, true);
        const auto noBuf = overall_pm(Mode::High, cfg_.loopLoadHighA, false);
        std::optional<double> gain;
        if (withBuf && noBuf) gain = *withBuf - *noBuf;
        add_row("buffer_phase_margin_gain_" + load_tag(cfg_.loopLoadHighA), std::nullopt, gain, 0.0, inf, "deg", true);

        // Supply rejection.
        add_row("psr_worst_to_" + si_tag(cfg_.psrLowBand.hiHz, "Hz"), -40.0, m.psrWorstDbLow, -inf, -40.0, "dB");
        add_row("psr_worst_to_" + si_tag(cfg_.psrWideBand.hiHz, "Hz"), -32.0, m.psrWorstDbWide, -inf, -32.0, "dB");

        // Load step.
        add_row("undershoot", 0.100, m.undershootV, 0.070, 0.130, "V");
        add_row("overshoot", 0.060, m.overshootV, 0.040, 0.080, "V");
        add_row("settling_time", 500e-9, m.settlingTimeS, 0.0, 500e-9, "s");

        // Quiescent-current schedule.
        add_row("iq_low", 3e-6, iqLow, 3e-6, 3e-6, "A");
        const double iq5 = quiescent_current(p, Mode::High, p.loadHighMinA);
        const double iq15 = quiescent_current(p, Mode::High, p.loadHighMaxA);
        add_row("iq_high_" + load_tag(p.loadHighMinA), 50e-6, iq5, 50e-6, 50e-6, "A");
        add_row("iq_high_" + load_tag(p.loadHighMaxA), 110e-6, iq15, 110e-6, 110e-6, "A");

        emit_loops(loops);
        emit_psr(psrRows);
        emit_transient(step);
        emit_metrics(m);
        emit("comparison.csv", to_csv(comparison_));
        emit("report.txt", report_text());

        const auto failed = std::count_if(comparison_.begin(), comparison_.end(), [](const ComparisonRow& r) { return !r.pass; });
        summary_ = "report: " + std::to_string(comparison_.size() - failed) + "/" + std::to_string(comparison_.size()) +
                   " comparison rows pass";
    }

    std::string report_text() const {
        std::ostringstream s;
        s << "Metrics\n\n" << to_text_table(rows(*metrics_)) << "\nComparison with reference values\n\n";
        std::size_t w = 8;
        for (const auto& r : comparison_) w = std::max(w, r.quantity.size());
        auto pad = [](std::string x, std::size_t n) { return x + std::string(n > x.size() ? n - x.size() : 0, ' '); };
        auto num = [](const std::optional<double>& v) { return v ? format_sci(*v, 4) : std::string("-"); };
        auto bound = [](double v) { return std::isinf(v) ? std::string(v > 0 ? "inf" : "-inf") : format_sci(v, 4); };
        s << pad("quantity", w + 2) << pad("reference", 13) << pad("model", 13) << pad("band", 27) << pad("unit", 6) << "status\n";
        s << std::string(w + 2 + 13 + 13 + 27 + 6 + 6, '-') << '\n';
        for (const auto& r : comparison_)
            s << pad(r.quantity, w + 2) << pad(num(r.reference), 13) << pad(num(r.model), 13)
              << pad("[" + bound(r.lower) + ", " + bound(r.upper) + "]", 27) << pad(r.unit, 6) << (r.pass ? "pass" : "FAIL")
              << '\n';
        return s.str();
    }

    const RunConfig& cfg_;
    Inputs in_;
    std::vector<Artifact> out_;
    std::vector<ComparisonRow> comparison_;
    std::optional<MetricsReport> metrics_;
    std::string summary_;
};

RunResult failure(int status, const std::string& what) {
    RunResult r;
    r.exitStatus = status;
    r.message = what;
    return r;
}

}  // namespace

RunResult run_in_memory(const RunConfig& config) {
    try {
        config.check();
        if (config.netlistPath && (config.command == Command::Metrics || config.command == Command::Report))
            throw ConfigError(to_string(config.command) + " needs the built-in regulator model; remove the netlist path");
        Runner runner(config, load_inputs(config));
        return runner.execute();
    } catch (const ConfigError& e) {
        return failure(kExitConfig, std::string("configuration error: ") + e.what());
    } catch (const ParseError& e) {
        return failure(kExitConfig, std::string("parse error: ") + e.what());
    } catch (const StructuralError& e) {
        return failure(kExitConfig, std::string("structural error: ") + e.what());
    } catch (const RangeError& e) {
        return failure(kExitConfig, std::string("range error: ") + e.what());
    } catch (const ArgumentError& e) {
        return failure(kExitConfig, std::string("invalid argument: ") + e.what());
    } catch (const ConvergenceError& e) {
        return failure(kExitSolver, std::string("solver error: ") + e.what());
    } catch (const SingularMatrixError& e) {
        return failure(kExitSolver, std::string("solver error: ") + e.what());
    } catch (const StallError& e) {
        return failure(kExitSolver, std::string("solver error: ") + e.what());
    } catch (const std::exception& e) {
        return failure(kExitInternal, std::string("internal error: ") + e.what());
    }
}

RunResult run(const RunConfig& config) {
    RunResult r = run_in_memory(config);
    if (r.exitStatus != kExitOk && r.exitStatus != kExitAcceptance) return r;
    std::error_code ec;
    fs::create_directories(config.outDir, ec);
    if (ec) return failure(kExitConfig, "cannot create output directory " + config.outDir + ": " + ec.message());
    for (const auto& a : r.artifacts) {
        const auto path = fs::path(config.outDir) / a.name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(a.content.data(), static_cast<std::streamsize>(a.content.size()));
        if (!f) return failure(kExitConfig, "cannot write " + path.string());
    }
    return r;
}

}  // namespace ldosim
