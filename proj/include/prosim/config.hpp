#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "prosim/control.hpp"
#include "prosim/emg.hpp"
#include "prosim/plant.hpp"
#include "prosim/tactile.hpp"

namespace prosim {

enum class Condition { standard, tactile };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

/// Raised for unreadable or malformed configuration and scenario files. The
/// message carries the file name and a line or JSON-pointer location.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SessionConfig {
    Condition condition = Condition::tactile;
    control::ControlGains gains;
    tactile::PressureSensorModel pressure_sensor;
    tactile::ContactSensorModel contact_sensor;
    plant::SceneSpec scene;
    plant::HandSpec hand;
    emg::EmgSourceSpec emg;
    int tick_rate_hz = kTickRateHz;
    int stream_decimation = 20;
    Tick grasp_debounce_ticks = 20;
    Tick contact_debounce_ticks = 20;

    bool feedback_enabled() const { return condition == Condition::tactile; }

    /// Switches reflexes and feedback together for a study condition.
    void set_condition(Condition c);
    void validate() const;
};

SessionConfig default_config(Condition c = Condition::tactile);

SessionConfig config_from_json(const nlohmann::json& j, const std::string& origin = "<config>");
nlohmann::json config_to_json(const SessionConfig& c);
SessionConfig load_config(const std::filesystem::path& path);

/// Merges scene overrides (a partial "scene" object) onto a scene.
void apply_scene_overrides(plant::SceneSpec& scene, const nlohmann::json& overrides, const std::string& origin);

nlohmann::json parse_json_file(const std::filesystem::path& path);

}  // namespace prosim
