#include "prosim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace prosim {

using nlohmann::json;

std::string to_string(Condition c) { return c == Condition::standard ? "standard" : "tactile"; }

Condition condition_from_string(const std::string& s) {
    if (s == "standard") return Condition::standard;
    if (s == "tactile") return Condition::tactile;
    throw std::invalid_argument(fmt::format("unknown condition '{}' (expected standard or tactile)", s));
}

void SessionConfig::set_condition(Condition c) {
    condition = c;
    gains.reflexes_enabled = c == Condition::tactile;
}

void SessionConfig::validate() const {
    if (tick_rate_hz != kTickRateHz) {
        throw std::invalid_argument(fmt::format("tick_rate_hz is fixed at {} Hz", kTickRateHz));
    }
    if (stream_decimation < 1) throw std::invalid_argument("stream_decimation must be >= 1");
    if (grasp_debounce_ticks < 1 || contact_debounce_ticks < 1) throw std::invalid_argument("debounce windows must be >= 1 tick");
    gains.validate();
    pressure_sensor.validate();
    scene.validate();
    hand.validate();
    if (gains.v_max != hand.v_max) throw std::invalid_argument("gains.v_max must match hand.v_max");
}

SessionConfig default_config(Condition c) {
    SessionConfig cfg;
    cfg.set_condition(c);
    return cfg;
}

namespace {

// Reads known keys from one JSON object and rejects anything else, so a typo
// in a config file is reported instead of silently ignored.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string origin, std::string pointer)
        : j_(j), origin_(std::move(origin)), pointer_(std::move(pointer)) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.count(key)) fail(key, "unknown key");
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            fail(key, fmt::format("wrong type ({})", e.what()));
        }
    }

    void read_vec3(const char* key, Vec3& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_array() || it->size() != 3 || !(*it)[0].is_number() || !(*it)[1].is_number() ||
            !(*it)[2].is_number()) {
            fail(key, "expected [x, y, z]");
        }
        out = {(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>()};
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(const std::string& key) const { return pointer_ + "/" + key; }
    const std::string& origin() const { return origin_; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ParseError(fmt::format("{}: at {}: {}", origin_, key.empty() ? (pointer_.empty() ? "/" : pointer_) : path(key), what));
    }

private:
    const json& j_;
    std::string origin_;
    std::string pointer_;
    std::set<std::string> seen_;
};

void read_bin(const json& j, plant::BinSpec& bin, const std::string& origin, const std::string& pointer) {
    ObjectReader r(j, origin, pointer);
    r.read_vec3("center", bin.center);
    r.read_vec3("size", bin.size);
}

void read_scene(const json& j, plant::SceneSpec& scene, const std::string& origin, const std::string& pointer) {
    ObjectReader r(j, origin, pointer);
    if (const auto* b = r.child("start_bin")) read_bin(*b, scene.start_bin, origin, r.path("start_bin"));
    if (const auto* b = r.child("end_bin")) read_bin(*b, scene.end_bin, origin, r.path("end_bin"));
    r.read("object_length", scene.object_length);
    r.read("object_diameter", scene.object_diameter);
    if (const auto* m = r.child("object_mass")) {
        if (m->is_null()) {
            scene.object_mass.reset();
        } else if (m->is_number()) {
            scene.object_mass = m->get<double>();
        } else {
            r.fail("object_mass", "expected a number or null");
        }
    }
    r.read("friction", scene.friction);
    r.read("eject_force", scene.eject_force);
    r.read("gravity", scene.gravity);
    r.read("vicinity_radius", scene.vicinity_radius);
}

json bin_to_json(const plant::BinSpec& b) {
    return {{"center", {b.center.x, b.center.y, b.center.z}}, {"size", {b.size.x, b.size.y, b.size.z}}};
}

}  // namespace

void apply_scene_overrides(plant::SceneSpec& scene, const json& overrides, const std::string& origin) {
    read_scene(overrides, scene, origin, "/scene");
}

SessionConfig config_from_json(const json& j, const std::string& origin) {
    SessionConfig cfg;
    ObjectReader r(j, origin, "");

    std::string condition = to_string(cfg.condition);
    r.read("condition", condition);
    try {
        cfg.set_condition(condition_from_string(condition));
    } catch (const std::invalid_argument& e) {
        r.fail("condition", e.what());
    }

    if (const auto* g = r.child("gains")) {
        ObjectReader gr(*g, origin, "/gains");
        gr.read("k_overgrasp", cfg.gains.k_overgrasp);
        gr.read("p_g", cfg.gains.p_g);
        gr.read("q_fs", cfg.gains.q_fs);
        gr.read("p_ss", cfg.gains.p_ss);
        gr.read("fast_pulse_ms", cfg.gains.fast_pulse_ms);
        gr.read("slow_pulse_ms", cfg.gains.slow_pulse_ms);
        gr.read("release_override_u_o", cfg.gains.release_override_u_o);
        // Reflex enablement follows the condition unless stated explicitly.
        gr.read("reflexes_enabled", cfg.gains.reflexes_enabled);
    }
    if (const auto* p = r.child("pressure_sensor")) {
        ObjectReader pr(*p, origin, "/pressure_sensor");
        pr.read("supply_v", cfg.pressure_sensor.supply_v);
        pr.read("series_r", cfg.pressure_sensor.series_r);
        pr.read("r_unloaded", cfg.pressure_sensor.r_unloaded);
        pr.read("r_saturated", cfg.pressure_sensor.r_saturated);
        pr.read("force_scale", cfg.pressure_sensor.force_scale);
        pr.read("noise_sigma", cfg.pressure_sensor.noise_sigma);
    }
    if (const auto* c = r.child("contact_sensor")) {
        ObjectReader cr(*c, origin, "/contact_sensor");
        cr.read("v_low", cfg.contact_sensor.v_low);
        cr.read("v_high", cfg.contact_sensor.v_high);
        cr.read("adc_full_scale_v", cfg.contact_sensor.adc_full_scale_v);
        cr.read("adc_bits", cfg.contact_sensor.adc_bits);
    }
    if (const auto* s = r.child("scene")) read_scene(*s, cfg.scene, origin, "/scene");
    if (const auto* h = r.child("hand")) {
        ObjectReader hr(*h, origin, "/hand");
        auto& hand = cfg.hand;
        hr.read("a_max", hand.a_max);
        hr.read("v_max", hand.v_max);
        hr.read("contact_stiffness", hand.contact_stiffness);
        hr.read("stall_force", hand.stall_force);
        hr.read("finger_length", hand.finger_length);
        hr.read("finger_thickness", hand.finger_thickness);
        hr.read("finger_height", hand.finger_height);
        hr.read("contact_tolerance", hand.contact_tolerance);
        hr.read("slip_speed_gain", hand.slip_speed_gain);
        hr.read("slip_unload_stiffness", hand.slip_unload_stiffness);
        hr.read("eject_offcenter_tolerance", hand.eject_offcenter_tolerance);
        hr.read("eject_lateral_speed", hand.eject_lateral_speed);
        hr.read("eject_down_speed", hand.eject_down_speed);
        hr.read("arm_speed_limit", hand.arm_speed_limit);
    }
    cfg.gains.v_max = cfg.hand.v_max;
    if (const auto* e = r.child("emg")) {
        ObjectReader er(*e, origin, "/emg");
        auto& emg = cfg.emg;
        std::string mode = emg::to_string(emg.mode);
        er.read("mode", mode);
        try {
            emg.mode = emg::source_mode_from_string(mode);
        } catch (const std::invalid_argument& ex) {
            er.fail("mode", ex.what());
        }
        er.read("drift_rate", emg.drift_rate);
        er.read("drift_walk", emg.drift_walk);
        if (const auto* band = er.child("noise_band")) {
            if (!band->is_array() || band->size() != 2) er.fail("noise_band", "expected [low_hz, high_hz]");
            emg.noise_low_hz = (*band)[0].get<double>();
            emg.noise_high_hz = (*band)[1].get<double>();
        }
        er.read("noise_amplitude", emg.noise_amplitude);
        er.read("flexor_baseline_v", emg.flexor_baseline_v);
        er.read("extensor_baseline_v", emg.extensor_baseline_v);
        er.read("flexor_mvc_v", emg.flexor_mvc_v);
        er.read("extensor_mvc_v", emg.extensor_mvc_v);
        er.read("crosstalk", emg.crosstalk);
        er.read("seed", emg.seed);
    }
    r.read("tick_rate_hz", cfg.tick_rate_hz);
    r.read("stream_decimation", cfg.stream_decimation);
    r.read("grasp_debounce_ticks", cfg.grasp_debounce_ticks);
    r.read("contact_debounce_ticks", cfg.contact_debounce_ticks);

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(fmt::format("{}: {}", origin, e.what()));
    }
    return cfg;
}

json config_to_json(const SessionConfig& c) {
    json j;
    j["condition"] = to_string(c.condition);
    j["gains"] = {{"k_overgrasp", c.gains.k_overgrasp},
                  {"p_g", c.gains.p_g},
                  {"q_fs", c.gains.q_fs},
                  {"p_ss", c.gains.p_ss},
                  {"fast_pulse_ms", c.gains.fast_pulse_ms},
                  {"slow_pulse_ms", c.gains.slow_pulse_ms},
                  {"release_override_u_o", c.gains.release_override_u_o},
                  {"reflexes_enabled", c.gains.reflexes_enabled}};
    j["pressure_sensor"] = {{"supply_v", c.pressure_sensor.supply_v},
                            {"series_r", c.pressure_sensor.series_r},
                            {"r_unloaded", c.pressure_sensor.r_unloaded},
                            {"r_saturated", c.pressure_sensor.r_saturated},
                            {"force_scale", c.pressure_sensor.force_scale},
                            {"noise_sigma", c.pressure_sensor.noise_sigma}};
    j["contact_sensor"] = {{"v_low", c.contact_sensor.v_low},
                           {"v_high", c.contact_sensor.v_high},
                           {"adc_full_scale_v", c.contact_sensor.adc_full_scale_v},
                           {"adc_bits", c.contact_sensor.adc_bits}};
    json scene = {{"start_bin", bin_to_json(c.scene.start_bin)},
                  {"end_bin", bin_to_json(c.scene.end_bin)},
                  {"object_length", c.scene.object_length},
                  {"object_diameter", c.scene.object_diameter},
                  {"friction", c.scene.friction},
                  {"eject_force", c.scene.eject_force},
                  {"gravity", c.scene.gravity},
                  {"vicinity_radius", c.scene.vicinity_radius}};
    scene["object_mass"] = c.scene.object_mass ? json(*c.scene.object_mass) : json(nullptr);
    j["scene"] = scene;
    j["hand"] = {{"a_max", c.hand.a_max},
                 {"v_max", c.hand.v_max},
                 {"contact_stiffness", c.hand.contact_stiffness},
                 {"stall_force", c.hand.stall_force},
                 {"finger_length", c.hand.finger_length},
                 {"finger_thickness", c.hand.finger_thickness},
                 {"finger_height", c.hand.finger_height},
                 {"contact_tolerance", c.hand.contact_tolerance},
                 {"slip_speed_gain", c.hand.slip_speed_gain},
                 {"slip_unload_stiffness", c.hand.slip_unload_stiffness},
                 {"eject_offcenter_tolerance", c.hand.eject_offcenter_tolerance},
                 {"eject_lateral_speed", c.hand.eject_lateral_speed},
                 {"eject_down_speed", c.hand.eject_down_speed},
                 {"arm_speed_limit", c.hand.arm_speed_limit}};
    j["emg"] = {{"mode", emg::to_string(c.emg.mode)},
                {"drift_rate", c.emg.drift_rate},
                {"drift_walk", c.emg.drift_walk},
                {"noise_band", {c.emg.noise_low_hz, c.emg.noise_high_hz}},
                {"noise_amplitude", c.emg.noise_amplitude},
                {"flexor_baseline_v", c.emg.flexor_baseline_v},
                {"extensor_baseline_v", c.emg.extensor_baseline_v},
                {"flexor_mvc_v", c.emg.flexor_mvc_v},
                {"extensor_mvc_v", c.emg.extensor_mvc_v},
                {"crosstalk", c.emg.crosstalk},
                {"seed", c.emg.seed}};
    j["tick_rate_hz"] = c.tick_rate_hz;
    j["stream_decimation"] = c.stream_decimation;
    j["grasp_debounce_ticks"] = c.grasp_debounce_ticks;
    j["contact_debounce_ticks"] = c.contact_debounce_ticks;
    return j;
}

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(fmt::format("{}: file not found or unreadable", path.string()));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        // nlohmann reports "line L, column C" in what().
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

SessionConfig load_config(const std::filesystem::path& path) {
    return config_from_json(parse_json_file(path), path.string());
}

}  // namespace prosim
