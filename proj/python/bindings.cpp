#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ldosim/analysis.hpp"
#include "ldosim/app.hpp"
#include "ldosim/errors.hpp"
#include "ldosim/ldo.hpp"
#include "ldosim/metrics.hpp"
#include "ldosim/netlist.hpp"
#include "ldosim/transient.hpp"

namespace py = pybind11;
using namespace ldosim;

namespace {

ElementId element_by_name(const Circuit& c, const std::string& name) {
    if (auto id = c.find_element(name)) return *id;
    throw StructuralError("unknown element '" + name + "'");
}

py::dict step_response(const LdoParams& params, const StepScenario& scenario, double tolRel, double maxStepS) {
    auto lt = build_transient(params, step_stimuli(params, scenario));
    lt.options.tEndS = scenario.endS;
    lt.options.tolRel = tolRel;
    lt.options.tolAbsV = 1e-5;
    lt.options.maxStepS = maxStepS;
    const auto trace = simulate(lt.circuit, lt.stimuli, lt.options);
    py::dict out;
    out["time_s"] = trace.timesS;
    for (const auto& [label, node] : lt.circuit.labels()) out[py::str(label)] = trace.voltage(node);
    py::list events;
    for (const auto& e : trace.events) events.append(py::make_tuple(e.time, e.label));
    out["events"] = events;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Behavioral simulator of a dual-range capacitor-less LDO regulator";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<SingularMatrixError>(m, "SingularMatrixError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<StallError>(m, "StallError", base.ptr());

    py::enum_<Mode>(m, "Mode").value("Low", Mode::Low).value("High", Mode::High);

    py::class_<LdoParams> params(m, "LdoParams");
    params.def(py::init<>())
        .def("check", &LdoParams::check)
        .def("to_text", [](const LdoParams& p) { return params_to_text(p); })
        .def_static("load", &load_params, py::arg("path"))
        .def_static("fields", [] {
            std::vector<std::string> names;
            for (const auto& f : param_fields()) names.emplace_back(f.name);
            return names;
        })
        .def("__repr__", [](const LdoParams& p) { return "<LdoParams vOutTargetV=" + std::to_string(p.vOutTargetV) + ">"; });
    for (const auto& f : param_fields()) {
        const auto member = f.member;
        params.def_property(
            f.name, [member](const LdoParams& p) { return p.*member; }, [member](LdoParams& p, double v) { p.*member = v; });
    }

    py::class_<StepScenario>(m, "StepScenario")
        .def(py::init<>())
        .def_readwrite("rise_s", &StepScenario::riseS)
        .def_readwrite("fall_s", &StepScenario::fallS)
        .def_readwrite("edge_s", &StepScenario::edgeS)
        .def_readwrite("enable_edge_s", &StepScenario::enableEdgeS)
        .def_readwrite("end_s", &StepScenario::endS)
        .def_readwrite("load_high_a", &StepScenario::loadHighA);

    py::class_<Circuit>(m, "Circuit")
        .def_property_readonly("node_count", &Circuit::node_count)
        .def_property_readonly("element_count", &Circuit::element_count)
        .def_property_readonly("labels", [](const Circuit& c) {
            std::vector<std::string> out;
            for (const auto& [label, node] : c.labels()) out.push_back(label);
            return out;
        })
        .def("to_netlist", [](const Circuit& c) { return write_netlist(c); });

    py::class_<FrequencySweep>(m, "FrequencySweep")
        .def(py::init([](double start, double stop, int ppd) { return FrequencySweep{start, stop, ppd}; }),
             py::arg("start_hz"), py::arg("stop_hz"), py::arg("points_per_decade") = 40)
        .def_readwrite("start_hz", &FrequencySweep::startHz)
        .def_readwrite("stop_hz", &FrequencySweep::stopHz)
        .def_readwrite("points_per_decade", &FrequencySweep::pointsPerDecade)
        .def("grid", &FrequencySweep::grid);

    py::class_<FrequencyResponse>(m, "FrequencyResponse")
        .def_readonly("freqs_hz", &FrequencyResponse::freqsHz)
        .def_readonly("values", &FrequencyResponse::values)
        .def("magnitude_db", &FrequencyResponse::magnitude_db)
        .def("phase_deg", &FrequencyResponse::phase_deg_unwrapped)
        .def("__len__", &FrequencyResponse::size);

    py::class_<LoopGainResult>(m, "LoopGainResult")
        .def_readonly("response", &LoopGainResult::response)
        .def_readonly("dc_gain_db", &LoopGainResult::dcGainDb)
        .def_readonly("ugbw_hz", &LoopGainResult::ugbwHz)
        .def_readonly("phase_margin_deg", &LoopGainResult::phaseMarginDeg);

    m.def("parse_netlist", &parse_netlist, py::arg("text"));
    m.def("load_netlist", &load_netlist, py::arg("path"));
    m.def(
        "build_small_signal",
        [](const LdoParams& p, Mode mode, double load, bool gateBuffer) {
            SmallSignalOptions opt;
            opt.gateBuffer = gateBuffer;
            return build_small_signal(p, mode, load, opt);
        },
        py::arg("params"), py::arg("mode"), py::arg("load_a"), py::arg("gate_buffer") = true);

    m.def(
        "ac_sweep",
        [](const Circuit& c, const FrequencySweep& s, const std::string& input, const std::string& output) {
            return ac_sweep(c, s, element_by_name(c, input), c.node(output));
        },
        py::arg("circuit"), py::arg("sweep"), py::arg("input_source"), py::arg("output_node"),
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "psr",
        [](const Circuit& c, const FrequencySweep& s, const std::string& supply, const std::string& output) {
            return psr(c, s, element_by_name(c, supply), c.node(output));
        },
        py::arg("circuit"), py::arg("sweep"), py::arg("supply_source") = "vin", py::arg("output_node") = "V_OUT",
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "loop_gain",
        [](const Circuit& c, const std::string& label, const FrequencySweep& s, std::vector<std::string> holdOpen) {
            LoopGainOptions opt;
            opt.holdOpen = std::move(holdOpen);
            return loop_gain(c, label, s, opt);
        },
        py::arg("circuit"), py::arg("label"), py::arg("sweep"), py::arg("hold_open") = std::vector<std::string>{},
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "regulator_loop_gain",
        [](const Circuit& c, const std::string& loop, const FrequencySweep& s) {
            return loop_gain(c, loop, s, loop_options(loop));
        },
        py::arg("circuit"), py::arg("loop"), py::arg("sweep"), py::call_guard<py::gil_scoped_release>(),
        "Loop gain of 'loop1', 'loop2' or 'overall' on a regulator model, with the measurement conventions of the report.");

    m.def("step_response", &step_response, py::arg("params"), py::arg("scenario") = StepScenario{},
          py::arg("tol_rel") = 1e-4, py::arg("max_step_s") = 20e-9,
          "Load-step transient; returns a dict of node waveforms keyed by label plus 'time_s' and 'events'.");

    m.def("quiescent_current", &quiescent_current, py::arg("params"), py::arg("mode"), py::arg("load_a"));
    m.def("bias_scale", &bias_scale, py::arg("params"), py::arg("mode"));
    m.def("mode_from_ven", &mode_from_ven, py::arg("ven_v"), py::arg("vin_v"));

    m.def("response_time", &response_time, py::arg("c_load_f"), py::arg("delta_vout_v"), py::arg("i_load_max_a"));
    m.def("fom", &fom, py::arg("response_time_s"), py::arg("iq_a"), py::arg("i_load_max_a"));
    m.def("current_efficiency", &current_efficiency, py::arg("i_load_a"), py::arg("iq_a"));
    m.def("iq_reduction", &iq_reduction, py::arg("iq_conventional_a"), py::arg("iq_dual_a"));
    m.def(
        "excursions",
        [](const std::vector<double>& v, double target) {
            const auto e = excursions(v, target);
            return py::make_tuple(e.undershootV, e.overshootV);
        },
        py::arg("values"), py::arg("target_v"), "Returns (undershoot, overshoot) in volts.");
    m.def(
        "settling_time",
        [](const std::vector<double>& t, const std::vector<double>& v, double target, double band, double from) {
            return settling_time(t, v, target, band, from);
        },
        py::arg("times_s"), py::arg("values"), py::arg("target_v"), py::arg("band_frac") = 0.01, py::arg("from_s") = 0.0);

    m.def(
        "run",
        [](const std::string& command, const std::string& paramsPath, const std::string& outDir, const std::string& configPath,
           bool write) {
            RunConfig cfg = configPath.empty() ? RunConfig{} : load_run_config(configPath);
            cfg.command = command_from_string(command);
            if (!paramsPath.empty()) cfg.paramsPath = paramsPath;
            if (!outDir.empty()) cfg.outDir = outDir;
            RunResult r;
            {
                py::gil_scoped_release release;
                r = write ? run(cfg) : run_in_memory(cfg);
            }
            py::dict out;
            out["exit_status"] = r.exitStatus;
            out["message"] = r.message;
            py::dict artifacts;
            for (const auto& a : r.artifacts) artifacts[py::str(a.name)] = py::bytes(a.content);
            out["artifacts"] = artifacts;
            py::list rows;
            for (const auto& row : r.comparison) {
                py::dict d;
                d["quantity"] = row.quantity;
                d["reference"] = row.reference;
                d["model"] = row.model;
                d["lower"] = row.lower;
                d["upper"] = row.upper;
                d["unit"] = row.unit;
                d["pass"] = row.pass;
                rows.append(d);
            }
            out["comparison"] = rows;
            return out;
        },
        py::arg("command"), py::arg("params_path") = "", py::arg("out_dir") = "", py::arg("config_path") = "",
        py::arg("write") = false,
        "Runs a CLI command. With write=False nothing touches the file system; artifacts come back as bytes.");
}
