#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "prosim/config.hpp"
#include "prosim/export.hpp"
#include "prosim/feedback.hpp"
#include "prosim/scenario.hpp"
#include "prosim/tactile.hpp"
#include "prosim/trials.hpp"

namespace py = pybind11;
using namespace prosim;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package wraps it in dicts.
SessionConfig config_arg(const std::string& config_json, const std::string& condition) {
    SessionConfig cfg = config_json.empty() ? default_config() : config_from_json(json::parse(config_json));
    if (!condition.empty()) cfg.set_condition(condition_from_string(condition));
    cfg.validate();
    return cfg;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::dict record_to_dict(const trials::TrialRecord& r) {
    py::dict d;
    d["trial_id"] = r.trial_id;
    d["condition"] = to_string(r.condition);
    d["seed"] = r.seed;
    d["aborted"] = r.aborted;
    d["abort_reason"] = r.abort_reason;
    d["final_status"] = plant::to_string(r.final_status);

    const auto& m = r.metrics;
    py::dict metrics;
    metrics["success"] = m.success;
    metrics["elapsed_s"] = m.elapsed_s;
    metrics["score"] = m.score;
    metrics["time_remaining"] = m.time_remaining;
    metrics["exploration_contact_rate"] = m.exploration_contact_rate;
    metrics["fast_slip_rate"] = m.fast_slip_rate;
    metrics["pre_grasp_contacts"] = m.pre_grasp_contacts;
    metrics["fast_slips"] = m.fast_slips;
    d["metrics"] = metrics;

    auto opt = [](const std::optional<Tick>& t) { return t ? py::object(py::int_(*t)) : py::object(py::none()); };
    py::dict ms;
    ms["lifted"] = opt(r.milestones.lifted);
    ms["near_end_bin"] = opt(r.milestones.near_end_bin);
    ms["placed"] = opt(r.milestones.placed);
    d["milestones"] = ms;

    json events = json::array();
    for (const auto& e : r.events) events.push_back(trials::event_to_json(e));
    d["events_json"] = events.dump();

    const auto ch = interface::channels_from_trace(r.trace);
    py::dict channels;
    channels["t"] = to_array(ch.t);
    channels["u_c"] = to_array(ch.u_c);
    channels["aperture"] = to_array(ch.aperture);
    channels["p"] = to_array(ch.p);
    std::vector<std::string> sides;
    sides.reserve(ch.side.size());
    for (auto s : ch.side) sides.push_back(tactile::to_string(s));
    channels["contact_side"] = sides;
    channels["contact_x"] = to_array(ch.x);
    channels["tactor_current"] = to_array(ch.tactor_current);
    channels["D"] = to_array(ch.d);
    channels["H"] = to_array(ch.h);
    d["channels"] = channels;
    return d;
}

}  // namespace

PYBIND11_MODULE(_prosim, m) {
    m.doc() = "Bindings for the prosim control stack";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<trials::TraceIntegrityError>(m, "TraceIntegrityError", PyExc_ValueError);

    m.def("default_config_json", [](const std::string& condition) {
        return config_to_json(default_config(condition_from_string(condition))).dump();
    }, py::arg("condition") = "tactile");

    m.def("standard_batch_json", [] {
        json out = json::array();
        for (const auto& s : trials::make_standard_batch()) out.push_back(trials::scenario_to_json(s));
        return out.dump();
    });
    m.def("overgrasp_scenario_json", [] { return trials::scenario_to_json(trials::make_overgrasp_scenario()).dump(); });
    m.def("antislip_scenario_json", [](const std::string& id, std::uint64_t seed) {
        return trials::scenario_to_json(trials::make_antislip_scenario(id, seed)).dump();
    }, py::arg("id"), py::arg("seed"));

    m.def("run_trial", [](const std::string& scenario_json, const std::string& config_json, const std::string& condition,
                          std::uint64_t seed) {
        const auto scenario = trials::scenario_from_json(json::parse(scenario_json));
        const auto cfg = config_arg(config_json, condition);
        trials::TrialRecord rec;
        {
            py::gil_scoped_release release;
            rec = trials::run_trial(scenario, cfg, seed);
        }
        return record_to_dict(rec);
    }, py::arg("scenario_json"), py::arg("config_json") = "", py::arg("condition") = "", py::arg("seed") = 1);

    m.def("run_batch", [](const std::vector<std::string>& scenario_jsons, const std::string& config_json,
                          const std::string& condition, std::uint64_t seed, const std::filesystem::path& out_dir,
                          int jobs) {
        std::vector<trials::Scenario> scenarios;
        for (const auto& s : scenario_jsons) scenarios.push_back(trials::scenario_from_json(json::parse(s)));
        const auto cfg = config_arg(config_json, condition);
        trials::BatchResult res;
        {
            py::gil_scoped_release release;
            res = trials::run_batch(scenarios, cfg, seed, out_dir, jobs);
        }
        py::list out;
        for (const auto& r : res.records) out.append(record_to_dict(r));
        return out;
    }, py::arg("scenario_jsons"), py::arg("config_json") = "", py::arg("condition") = "", py::arg("seed") = 1,
       py::arg("out_dir"), py::arg("jobs") = 1);

    m.def("pressure_from_force", [](double force) { return tactile::pressure_from_force(force, {}); },
          py::arg("grip_force"));

    m.def("spectral_probe", [](py::array_t<double, py::array::c_style | py::array::forcecast> current) {
        const auto buf = current.request();
        if (buf.ndim != 1) throw std::invalid_argument("expected a 1-D array");
        const auto peaks = feedback::spectral_probe(
            std::span<const double>(static_cast<const double*>(buf.ptr), static_cast<std::size_t>(buf.shape[0])));
        return py::make_tuple(peaks.carrier_hz ? py::object(py::float_(*peaks.carrier_hz)) : py::object(py::none()),
                              peaks.modulation_hz ? py::object(py::float_(*peaks.modulation_hz)) : py::object(py::none()));
    }, py::arg("current"));

    m.def("export_trial", [](const std::filesystem::path& trace_csv, const std::string& format,
                             std::optional<std::filesystem::path> out) {
        return interface::export_trial(trace_csv, interface::export_format_from_string(format), out);
    }, py::arg("trace_csv"), py::arg("format") = "csv", py::arg("out") = std::nullopt);

    m.def("score", [](bool lifted, bool near_end_bin, bool placed) {
        trials::Milestones ms;
        if (lifted) ms.lifted = 0;
        if (near_end_bin) ms.near_end_bin = 1;
        if (placed) ms.placed = 2;
        return trials::score(ms);
    }, py::arg("lifted"), py::arg("near_end_bin"), py::arg("placed"));
}
