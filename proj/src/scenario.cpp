#include "prosim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "prosim/config.hpp"

namespace prosim::trials {

using nlohmann::json;

emg::Intent Scenario::intent_at(Tick tick) const {
    const double t = ticks_to_seconds(tick);
    emg::Intent current;
    for (const auto& step : intent) {
        if (step.t > t + 1e-12) break;
        current = step.intent;
    }
    return current;
}

Vec3 Scenario::arm_position(double t) const {
    Vec3 from = arm_start;
    double t_from = 0.0;
    for (const auto& wp : waypoints) {
        if (t <= wp.t) {
            const double span = wp.t - t_from;
            if (span <= 0.0) return wp.pos;
            const double a = std::clamp((t - t_from) / span, 0.0, 1.0);
            return from + (wp.pos - from) * a;
        }
        from = wp.pos;
        t_from = wp.t;
    }
    return from;
}

Vec3 Scenario::arm_velocity(Tick tick) const {
    return (arm_position(ticks_to_seconds(tick + 1)) - arm_position(ticks_to_seconds(tick))) * kTickRateHz;
}

double Scenario::max_arm_speed() const {
    double best = 0.0;
    Vec3 from = arm_start;
    double t_from = 0.0;
    for (const auto& wp : waypoints) {
        const Vec3 d = wp.pos - from;
        const double dist = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
        const double span = wp.t - t_from;
        if (dist > 0.0) best = std::max(best, span > 0.0 ? dist / span : INFINITY);
        from = wp.pos;
        t_from = wp.t;
    }
    return best;
}

void Scenario::validate() const {
    if (id.empty()) throw std::invalid_argument("scenario id must not be empty");
    if (id.find_first_of("/\\") != std::string::npos) throw std::invalid_argument("scenario id must not contain path separators");
    if (!(time_limit_s > 0.0)) throw std::invalid_argument("time_limit_s must be positive");
    double last = 0.0;
    for (const auto& wp : waypoints) {
        if (wp.t < last) throw std::invalid_argument("waypoint times must be non-decreasing and >= 0");
        last = wp.t;
    }
    last = 0.0;
    for (const auto& st : intent) {
        if (st.t < last) throw std::invalid_argument("intent times must be non-decreasing and >= 0");
        last = st.t;
    }
    for (double t : rezero_times) {
        if (t < 0.0) throw std::invalid_argument("rezero times must be >= 0");
    }
    for (const auto& p : perturbations) {
        if (p.tick < 0 || p.duration < 0 || p.ramp < 0) throw std::invalid_argument("perturbation time, duration and ramp must be >= 0");
        if (p.duration > 0 && p.ramp > p.duration) throw std::invalid_argument("perturbation ramp must not outlast its duration");
        if (!(p.magnitude > 0.0)) throw std::invalid_argument("perturbation magnitude must be positive");
    }
    if (emg_trace && !emg_calibration) throw std::invalid_argument("emg_trace requires emg_calibration");
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& pointer, const std::string& what) {
    throw ParseError(fmt::format("{}: at {}: {}", origin, pointer.empty() ? "/" : pointer, what));
}

double number(const json& j, const std::string& origin, const std::string& pointer) {
    if (!j.is_number()) fail(origin, pointer, "expected a number");
    return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& origin, const std::string& pointer) {
    if (!j.is_array() || j.size() != 3) fail(origin, pointer, "expected [x, y, z]");
    return {number(j[0], origin, pointer + "/0"), number(j[1], origin, pointer + "/1"), number(j[2], origin, pointer + "/2")};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& origin, const std::string& pointer) {
    if (!j.is_object()) fail(origin, pointer, "expected an object");
    for (const auto& [k, _] : j.items()) {
        if (!allowed.count(k)) fail(origin, pointer + "/" + k, "unknown key");
    }
}

const json& required(const json& j, const char* key, const std::string& origin, const std::string& pointer) {
    const auto it = j.find(key);
    if (it == j.end()) fail(origin, pointer, fmt::format("missing required key '{}'", key));
    return *it;
}

}  // namespace

Scenario scenario_from_json(const json& j, const std::string& origin) {
    check_keys(j,
               {"v", "id", "time_limit_s", "scene", "arm", "intent", "rezero", "perturbations", "emg_trace",
                "emg_calibration"},
               origin, "");
    Scenario s;
    const auto& v = required(j, "v", origin, "");
    if (!v.is_number_integer() || v.get<int>() != kScenarioVersion) {
        fail(origin, "/v", fmt::format("unsupported scenario version (expected {})", kScenarioVersion));
    }
    const auto& id = required(j, "id", origin, "");
    if (!id.is_string()) fail(origin, "/id", "expected a string");
    s.id = id.get<std::string>();
    if (j.contains("time_limit_s")) s.time_limit_s = number(j["time_limit_s"], origin, "/time_limit_s");

    if (j.contains("scene")) {
        // Validated here so errors point into the scenario file.
        plant::SceneSpec probe;
        apply_scene_overrides(probe, j["scene"], origin);
        s.scene_overrides = j["scene"];
    }

    const auto& arm = required(j, "arm", origin, "");
    check_keys(arm, {"start", "waypoints"}, origin, "/arm");
    s.arm_start = vec3(required(arm, "start", origin, "/arm"), origin, "/arm/start");
    if (arm.contains("waypoints")) {
        const auto& wps = arm["waypoints"];
        if (!wps.is_array()) fail(origin, "/arm/waypoints", "expected an array");
        for (std::size_t i = 0; i < wps.size(); ++i) {
            const std::string ptr = fmt::format("/arm/waypoints/{}", i);
            check_keys(wps[i], {"t", "pos"}, origin, ptr);
            s.waypoints.push_back({number(required(wps[i], "t", origin, ptr), origin, ptr + "/t"),
                                   vec3(required(wps[i], "pos", origin, ptr), origin, ptr + "/pos")});
        }
    }

    if (j.contains("intent")) {
        const auto& steps = j["intent"];
        if (!steps.is_array()) fail(origin, "/intent", "expected an array");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const std::string ptr = fmt::format("/intent/{}", i);
            check_keys(steps[i], {"t", "flexion", "extension"}, origin, ptr);
            IntentStep st;
            st.t = number(required(steps[i], "t", origin, ptr), origin, ptr + "/t");
            if (steps[i].contains("flexion")) st.intent.flexion = number(steps[i]["flexion"], origin, ptr + "/flexion");
            if (steps[i].contains("extension")) st.intent.extension = number(steps[i]["extension"], origin, ptr + "/extension");
            if (st.intent.flexion < 0.0 || st.intent.flexion > 1.0 || st.intent.extension < 0.0 || st.intent.extension > 1.0) {
                fail(origin, ptr, "intent levels must lie in [0, 1]");
            }
            s.intent.push_back(st);
        }
    }

    if (j.contains("rezero")) {
        const auto& rz = j["rezero"];
        if (!rz.is_array()) fail(origin, "/rezero", "expected an array of times");
        for (std::size_t i = 0; i < rz.size(); ++i) s.rezero_times.push_back(number(rz[i], origin, fmt::format("/rezero/{}", i)));
    }

    if (j.contains("perturbations")) {
        const auto& ps = j["perturbations"];
        if (!ps.is_array()) fail(origin, "/perturbations", "expected an array");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const std::string ptr = fmt::format("/perturbations/{}", i);
            check_keys(ps[i], {"t", "type", "magnitude", "duration_s", "ramp_s"}, origin, ptr);
            plant::Perturbation p;
            p.tick = seconds_to_ticks(number(required(ps[i], "t", origin, ptr), origin, ptr + "/t"));
            const auto& type = required(ps[i], "type", origin, ptr);
            if (!type.is_string()) fail(origin, ptr + "/type", "expected a string");
            try {
                p.type = plant::perturbation_type_from_string(type.get<std::string>());
            } catch (const std::invalid_argument& e) {
                fail(origin, ptr + "/type", e.what());
            }
            p.magnitude = number(required(ps[i], "magnitude", origin, ptr), origin, ptr + "/magnitude");
            if (ps[i].contains("duration_s")) p.duration = seconds_to_ticks(number(ps[i]["duration_s"], origin, ptr + "/duration_s"));
            if (ps[i].contains("ramp_s")) p.ramp = seconds_to_ticks(number(ps[i]["ramp_s"], origin, ptr + "/ramp_s"));
            s.perturbations.push_back(p);
        }
    }

    for (const char* key : {"emg_trace", "emg_calibration"}) {
        if (!j.contains(key)) continue;
        if (!j[key].is_string()) fail(origin, std::string("/") + key, "expected a path string");
        (std::string(key) == "emg_trace" ? s.emg_trace : s.emg_calibration) = std::filesystem::path(j[key].get<std::string>());
    }

    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(fmt::format("{}: {}", origin, e.what()));
    }
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["v"] = kScenarioVersion;
    j["id"] = s.id;
    j["time_limit_s"] = s.time_limit_s;
    if (!s.scene_overrides.empty()) j["scene"] = s.scene_overrides;
    json wps = json::array();
    for (const auto& wp : s.waypoints) wps.push_back({{"t", wp.t}, {"pos", {wp.pos.x, wp.pos.y, wp.pos.z}}});
    j["arm"] = {{"start", {s.arm_start.x, s.arm_start.y, s.arm_start.z}}, {"waypoints", wps}};
    json steps = json::array();
    for (const auto& st : s.intent) {
        steps.push_back({{"t", st.t}, {"flexion", st.intent.flexion}, {"extension", st.intent.extension}});
    }
    j["intent"] = steps;
    if (!s.rezero_times.empty()) j["rezero"] = s.rezero_times;
    if (!s.perturbations.empty()) {
        json ps = json::array();
        for (const auto& p : s.perturbations) {
            ps.push_back({{"t", ticks_to_seconds(p.tick)},
                          {"type", plant::to_string(p.type)},
                          {"magnitude", p.magnitude},
                          {"duration_s", ticks_to_seconds(p.duration)},
                          {"ramp_s", ticks_to_seconds(p.ramp)}});
        }
        j["perturbations"] = ps;
    }
    if (s.emg_trace) j["emg_trace"] = s.emg_trace->string();
    if (s.emg_calibration) j["emg_calibration"] = s.emg_calibration->string();
    return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
    Scenario s = scenario_from_json(parse_json_file(path), path.string());
    const auto base = path.parent_path();
    if (s.emg_trace && s.emg_trace->is_relative()) s.emg_trace = base / *s.emg_trace;
    if (s.emg_calibration && s.emg_calibration->is_relative()) s.emg_calibration = base / *s.emg_calibration;
    return s;
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(fmt::format("cannot write scenario '{}'", path.string()));
    out << scenario_to_json(s).dump(2) << '\n';
}

namespace {

// Builds a waypoint path segment by segment at a fixed speed.
class PathBuilder {
public:
    PathBuilder(Scenario& s, double speed) : s_(s), speed_(speed), pos_(s.arm_start) {}

    double now() const { return t_; }
    void wait(double dt) {
        if (dt <= 0.0) return;
        t_ = std::round((t_ + dt) * 1000.0) / 1000.0;
        s_.waypoints.push_back({t_, pos_});
    }
    void move_to(Vec3 target) {
        const Vec3 d = target - pos_;
        const double dist = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
        // Round segment ends to the tick grid so scripts stay exact in JSON.
        t_ = std::round((t_ + dist / speed_) * 1000.0) / 1000.0;
        s_.waypoints.push_back({t_, target});
        pos_ = target;
    }
    void intent(double flexion, double extension) { s_.intent.push_back({t_, {flexion, extension}}); }
    Vec3 pos() const { return pos_; }

private:
    Scenario& s_;
    double speed_;
    Vec3 pos_;
    double t_ = 0.0;
};

struct PickPlaceTimeline {
    Scenario scenario;
    double lift_done_s = 0.0;
    double place_start_s = 0.0;
};

PickPlaceTimeline build_pick_and_place(const std::string& id, const PickPlaceParams& p) {
    const plant::SceneSpec scene;
    const plant::HandSpec hand;
    PickPlaceTimeline out;
    Scenario& s = out.scenario;
    s.id = id;
    s.time_limit_s = p.time_limit_s;
    const double grasp_y = scene.start_bin.center.y - p.grasp_fraction * hand.finger_length;
    s.arm_start = {scene.start_bin.center.x, grasp_y, 0.25};

    PathBuilder b(s, p.speed);
    b.intent(0.0, 0.0);
    b.wait(p.start_delay);
    b.move_to({scene.start_bin.center.x, grasp_y, p.approach_z});
    b.wait(p.pause_s);
    b.intent(p.flexion, 0.0);
    b.wait(p.close_s);
    b.intent(0.0, 0.0);
    b.wait(p.pause_s);
    b.move_to({scene.start_bin.center.x, grasp_y, p.lift_z});
    out.lift_done_s = b.now();
    b.wait(p.pause_s);
    const double dy = scene.end_bin.center.y - scene.start_bin.center.y;
    b.move_to({scene.end_bin.center.x, grasp_y + dy, p.lift_z});
    b.wait(p.pause_s);
    b.move_to({scene.end_bin.center.x, grasp_y + dy, p.place_z});
    out.place_start_s = b.now();
    b.wait(p.pause_s);
    b.intent(0.0, p.extension);
    b.wait(1.0);
    b.intent(0.0, 0.0);
    return out;
}

}  // namespace

Scenario make_pick_and_place(const std::string& id, const PickPlaceParams& params) {
    return build_pick_and_place(id, params).scenario;
}

Scenario make_overgrasp_scenario(const std::string& id) {
    PickPlaceParams p;
    p.grasp_fraction = 0.8;
    p.flexion = 1.0;
    p.time_limit_s = 6.0;
    const plant::SceneSpec scene;
    const plant::HandSpec hand;
    Scenario s;
    s.id = id;
    s.time_limit_s = p.time_limit_s;
    const double grasp_y = scene.start_bin.center.y - p.grasp_fraction * hand.finger_length;
    s.arm_start = {scene.start_bin.center.x, grasp_y, 0.25};
    PathBuilder b(s, p.speed);
    b.intent(0.0, 0.0);
    b.move_to({scene.start_bin.center.x, grasp_y, p.approach_z});
    b.wait(p.pause_s);
    // Full flexion for the rest of the trial.
    b.intent(p.flexion, 0.0);
    b.wait(p.close_s);
    b.move_to({scene.start_bin.center.x, grasp_y, p.lift_z});
    return s;
}

Scenario make_antislip_scenario(const std::string& id, std::uint64_t seed, const AntislipParams& params) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const double required = draw(params.required_force_lo, params.required_force_hi);
    const double onset = draw(params.onset_lo_s, params.onset_hi_s);
    const double ramp = draw(params.ramp_lo_s, params.ramp_hi_s);
    const bool friction = unit(rng) < params.friction_share;

    PickPlaceParams p;
    p.grasp_fraction = draw(0.45, 0.55);
    p.flexion = draw(0.33, 0.37);
    auto built = build_pick_and_place(id, p);

    const plant::SceneSpec scene;
    const double nominal = scene.mass() * scene.gravity / (2.0 * scene.friction);
    plant::Perturbation pert;
    pert.tick = seconds_to_ticks(built.lift_done_s + onset);
    pert.type = friction ? plant::PerturbationType::friction_scale : plant::PerturbationType::mass_scale;
    pert.magnitude = friction ? nominal / required : required / nominal;
    pert.ramp = seconds_to_ticks(ramp);
    built.scenario.perturbations.push_back(pert);
    return built.scenario;
}

std::vector<Scenario> make_standard_batch() {
    std::vector<Scenario> out;
    for (int i = 0; i < 20; ++i) {
        PickPlaceParams p;
        p.grasp_fraction = 0.40 + 0.01 * (i % 7) * 3.0;
        p.flexion = 0.30 + 0.02 * (i % 5);
        p.start_delay = 0.1 * (i % 4);
        p.speed = 0.12 + 0.01 * (i % 6);
        p.close_s = 1.8 + 0.1 * (i % 3);
        out.push_back(make_pick_and_place(fmt::format("pick_place_{:02d}", i + 1), p));
    }
    return out;
}

}  // namespace prosim::trials
