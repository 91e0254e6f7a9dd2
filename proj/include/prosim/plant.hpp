#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prosim/tactile.hpp"
#include "prosim/units.hpp"

namespace prosim::plant {

struct BinSpec {
    Vec3 center;  // floor-level center
    Vec3 size;    // x, y, wall height
};

struct SceneSpec {
    BinSpec start_bin{{0.0, 0.0, 0.0}, {0.038, 0.038, 0.076}};
    BinSpec end_bin{{0.175, 0.0, 0.0}, {0.038, 0.038, 0.051}};
    double object_length = 0.12;
    double object_diameter = 0.02;
    std::optional<double> object_mass;  // defaults to a solid aluminium cylinder
    double friction = 0.4;
    double eject_force = 25.0;  // N
    double gravity = kGravity;
    double vicinity_radius = 0.05;

    double bin_separation() const { return (end_bin.center - start_bin.center).horizontal_norm(); }
    double mass() const;
    void validate() const;
};

/// Reduced-order hand: a 1-DoF gripper whose fingers extend along +y from
/// the wrist, closing palmar surface toward the thumb along x.
struct HandSpec {
    double a_max = 0.10;              // m
    double v_max = 6.0;               // V
    double contact_stiffness = 8000;  // N/m
    double stall_force = 35.0;        // N, current limit at full voltage
    double finger_length = 0.08;
    double finger_thickness = 0.015;
    double finger_height = 0.02;
    double contact_tolerance = 0.002;
    double slip_speed_gain = 0.10;    // m/s of sliding per N of hold deficit
    double slip_unload_stiffness = 3000;  // N of grip lost per m slid
    double eject_offcenter_tolerance = 0.2;  // fraction of finger length from its center
    double eject_lateral_speed = 0.5;
    double eject_down_speed = 0.3;
    double arm_speed_limit = 0.25;

    /// Closing speed at full voltage; the hand goes from a_max to closed in 1 s.
    double max_closing_speed() const { return a_max; }
    void validate() const;
};

inline constexpr double kAluminiumDensity = 2700.0;  // kg/m^3

double object_mass_default(const SceneSpec& scene);

struct HandState {
    double aperture = 0.10;
    double aperture_rate = 0.0;
    double grip_force = 0.0;
    Vec3 wrist_pos{0.0, -0.04, 0.25};
};

enum class ObjectStatus { in_start_bin, held, slipping, free_fall, settled_out, in_end_bin, ejected };

std::string to_string(ObjectStatus s);

struct ObjectState {
    Vec3 pos{0.0, 0.0, 0.06};  // cylinder center
    Vec3 vel;
    ObjectStatus status = ObjectStatus::in_start_bin;
    double mass = 0.0;
};

struct GripState {
    bool engaged = false;
    double offset = 0.0;        // wrist z minus object center z
    double arc_fraction = 0.5;  // contact point along the finger
};

struct PlantState {
    HandState hand;
    ObjectState object;
    GripState grip;
    double mass_scale = 1.0;
    double friction_scale = 1.0;
};

struct ContactGeometry {
    bool touching = false;
    tactile::FingerSurfacePoint point;
};

struct StepEvents {
    bool grip_formed = false;
    bool released = false;
    bool ejected = false;
    bool lost = false;  // slid out of a grip
    bool landed = false;
};

struct StepResult {
    PlantState state;
    ContactGeometry contact;
    StepEvents events;
};

/// Initial scene: object standing in the start bin, hand open above it.
PlantState initial_state(const SceneSpec& scene, const HandSpec& hand, Vec3 wrist_start);

double object_weight(const PlantState& s, const SceneSpec& scene);
double required_grip_force(const PlantState& s, const SceneSpec& scene);
bool object_supported(const PlantState& s, const SceneSpec& scene);

/// Finger contact for the sensors, evaluated on a state.
ContactGeometry contact_geometry(const PlantState& s, const SceneSpec& scene, const HandSpec& hand);

/// Advances the plant by one 1 ms tick.
StepResult step(const PlantState& s, double motor_voltage, Vec3 arm_vel, const SceneSpec& scene, const HandSpec& hand);

enum class Region { in_start_bin, near_end_bin, in_end_bin, elsewhere };

std::string to_string(Region r);

Region classify_region(const ObjectState& obj, const SceneSpec& scene);

/// Object displacement from the end bin (horizontal) and height of its base
/// above the force plate.
double displacement_from_end_bin(const ObjectState& obj, const SceneSpec& scene);
double height_above_plate(const ObjectState& obj, const SceneSpec& scene);

enum class PerturbationType { mass_scale, friction_scale };

std::string to_string(PerturbationType t);
PerturbationType perturbation_type_from_string(const std::string& s);

struct Perturbation {
    Tick tick = 0;
    PerturbationType type = PerturbationType::friction_scale;
    double magnitude = 1.0;
    Tick duration = 0;  // 0 keeps the change for the rest of the trial
    Tick ramp = 0;      // ticks to reach the magnitude; 0 applies it at once
};

/// Applies scheduled perturbations (and their expiry) for `now` to `s`.
class PerturbationSchedule {
public:
    explicit PerturbationSchedule(std::vector<Perturbation> events = {});
    void apply(Tick now, PlantState& s) const;
    const std::vector<Perturbation>& events() const { return events_; }

private:
    std::vector<Perturbation> events_;
};

/// Owns a plant state and advances it.
class Plant {
public:
    Plant(SceneSpec scene, HandSpec hand, Vec3 wrist_start);

    const StepResult& step(double motor_voltage, Vec3 arm_vel);
    const PlantState& state() const { return last_.state; }
    PlantState& mutable_state() { return last_.state; }
    const ContactGeometry& contact() const { return last_.contact; }
    const SceneSpec& scene() const { return scene_; }
    const HandSpec& hand() const { return hand_; }

private:
    SceneSpec scene_;
    HandSpec hand_;
    StepResult last_;
};

}  // namespace prosim::plant
