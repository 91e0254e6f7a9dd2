#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prosim/emg.hpp"
#include "prosim/plant.hpp"
#include "prosim/units.hpp"

namespace prosim::trials {

inline constexpr int kScenarioVersion = 1;

struct Waypoint {
    double t = 0.0;  // s
    Vec3 pos;
};

/// Intent holds from `t` until the next step.
struct IntentStep {
    double t = 0.0;
    emg::Intent intent;
};

/// A scripted trial: arm path, operator intent, scheduled events and scene
/// overrides. Times are seconds from trial start.
struct Scenario {
    std::string id = "scenario";
    double time_limit_s = 60.0;
    nlohmann::json scene_overrides = nlohmann::json::object();
    Vec3 arm_start{0.0, -0.04, 0.25};
    std::vector<Waypoint> waypoints;
    std::vector<IntentStep> intent;
    std::vector<double> rezero_times;
    std::vector<plant::Perturbation> perturbations;
    // Replay inputs; relative paths resolve against the scenario file.
    std::optional<std::filesystem::path> emg_trace;
    std::optional<std::filesystem::path> emg_calibration;

    emg::Intent intent_at(Tick tick) const;
    Vec3 arm_position(double t) const;
    /// Velocity that carries the wrist from its scripted position at `tick`
    /// to the one at `tick + 1`.
    Vec3 arm_velocity(Tick tick) const;
    /// Highest speed along the waypoint path.
    double max_arm_speed() const;
    Tick time_limit_ticks() const { return seconds_to_ticks(time_limit_s); }

    void validate() const;
};

Scenario scenario_from_json(const nlohmann::json& j, const std::string& origin = "<scenario>");
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& s);

/// Knobs for the scripted reach-grasp-lift-place sequence.
struct PickPlaceParams {
    double grasp_fraction = 0.5;   // contact point along the finger
    double flexion = 0.35;         // closing intent
    double extension = 0.6;        // opening intent at release
    double approach_z = 0.10;      // wrist height at the grasp
    double lift_z = 0.20;
    double place_z = 0.095;
    double start_delay = 0.0;      // s before the reach starts
    double close_s = 2.0;          // how long the closing intent is held
    double speed = 0.15;           // m/s along each arm segment
    double pause_s = 0.2;          // dwell between segments
    double time_limit_s = 60.0;
};

Scenario make_pick_and_place(const std::string& id, const PickPlaceParams& params = {});

/// Grasp at the finger's distal end with full flexion held throughout lift.
Scenario make_overgrasp_scenario(const std::string& id = "overgrasp");

/// Seeded draw for the anti-slip battery. While the object is carried its
/// load (mass) or grip (friction) changes along a geometric ramp until the
/// grip force needed to hold it reaches a random level.
struct AntislipParams {
    double required_force_lo = 27.0;  // N at the end of the ramp
    double required_force_hi = 32.0;
    double onset_lo_s = 0.1;  // after the lift completes
    double onset_hi_s = 0.3;
    double ramp_lo_s = 0.6;
    double ramp_hi_s = 1.0;
    double friction_share = 0.5;  // probability of a friction rather than a mass perturbation
};

Scenario make_antislip_scenario(const std::string& id, std::uint64_t seed, const AntislipParams& params = {});

/// Twenty varied pick-and-place scripts.
std::vector<Scenario> make_standard_batch();

}  // namespace prosim::trials
