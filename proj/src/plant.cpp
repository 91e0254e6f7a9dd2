#include "prosim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace prosim::plant {

namespace {

constexpr double kFloorEps = 1e-9;

bool resting(ObjectStatus s) {
    return s == ObjectStatus::in_start_bin || s == ObjectStatus::in_end_bin || s == ObjectStatus::settled_out;
}

bool airborne(ObjectStatus s) { return s == ObjectStatus::free_fall || s == ObjectStatus::ejected; }

bool within_bin(const Vec3& pos, const BinSpec& bin) {
    return std::abs(pos.x - bin.center.x) <= 0.5 * bin.size.x && std::abs(pos.y - bin.center.y) <= 0.5 * bin.size.y;
}

ObjectStatus resting_status(const Vec3& pos, const SceneSpec& scene) {
    if (within_bin(pos, scene.end_bin)) return ObjectStatus::in_end_bin;
    if (within_bin(pos, scene.start_bin)) return ObjectStatus::in_start_bin;
    return ObjectStatus::settled_out;
}

double radius(const SceneSpec& scene) { return 0.5 * scene.object_diameter; }

double finger_fraction(const PlantState& s, const HandSpec& hand) {
    return (s.object.pos.y - s.hand.wrist_pos.y) / hand.finger_length;
}

bool vertical_overlap(const PlantState& s, const SceneSpec& scene, const HandSpec& hand) {
    return std::abs(s.hand.wrist_pos.z - s.object.pos.z) <= 0.5 * scene.object_length + 0.5 * hand.finger_height;
}

bool along_finger(double frac, const SceneSpec& scene, const HandSpec& hand) {
    const double slack = radius(scene) / hand.finger_length;
    return frac >= -slack && frac <= 1.0 + slack;
}

// Object sits between the thumb and the finger mid-plane, i.e. where closing
// the hand would capture it.
bool in_grasp_window(const PlantState& s, const SceneSpec& scene, const HandSpec& hand) {
    if (!resting(s.object.status) || !vertical_overlap(s, scene, hand)) return false;
    if (!along_finger(finger_fraction(s, hand), scene, hand)) return false;
    const double r = radius(scene);
    const double x_thumb = s.hand.wrist_pos.x - 0.5 * s.hand.aperture;
    const double x_mid = s.hand.wrist_pos.x + 0.5 * s.hand.aperture + 0.5 * hand.finger_thickness;
    return s.object.pos.x >= x_thumb - r && s.object.pos.x <= x_mid;
}

}  // namespace

double object_mass_default(const SceneSpec& scene) {
    const double r = radius(scene);
    return kAluminiumDensity * std::numbers::pi * r * r * scene.object_length;
}

double SceneSpec::mass() const { return object_mass.value_or(object_mass_default(*this)); }

void SceneSpec::validate() const {
    if (!(object_length > 0.0) || !(object_diameter > 0.0)) throw std::invalid_argument("object dimensions must be positive");
    if (!(friction > 0.0)) throw std::invalid_argument("friction must be positive");
    if (!(eject_force > 0.0)) throw std::invalid_argument("eject_force must be positive");
    if (!(gravity > 0.0)) throw std::invalid_argument("gravity must be positive");
    if (object_mass && !(*object_mass > 0.0)) throw std::invalid_argument("object_mass must be positive");
}

void HandSpec::validate() const {
    if (!(a_max > 0.0) || !(v_max > 0.0)) throw std::invalid_argument("hand a_max and v_max must be positive");
    if (!(contact_stiffness > 0.0) || !(stall_force > 0.0)) throw std::invalid_argument("hand stiffness and stall force must be positive");
    if (!(finger_length > 0.0)) throw std::invalid_argument("finger_length must be positive");
    if (slip_speed_gain < 0.0 || slip_unload_stiffness < 0.0) throw std::invalid_argument("slip parameters must be non-negative");
}

std::string to_string(ObjectStatus s) {
    switch (s) {
        case ObjectStatus::in_start_bin: return "in_start_bin";
        case ObjectStatus::held: return "held";
        case ObjectStatus::slipping: return "slipping";
        case ObjectStatus::free_fall: return "free_fall";
        case ObjectStatus::settled_out: return "settled_out";
        case ObjectStatus::in_end_bin: return "in_end_bin";
        case ObjectStatus::ejected: return "ejected";
    }
    return "settled_out";
}

std::string to_string(Region r) {
    switch (r) {
        case Region::in_start_bin: return "in_start_bin";
        case Region::near_end_bin: return "near_end_bin";
        case Region::in_end_bin: return "in_end_bin";
        case Region::elsewhere: return "elsewhere";
    }
    return "elsewhere";
}

std::string to_string(PerturbationType t) {
    return t == PerturbationType::mass_scale ? "mass_scale" : "friction_scale";
}

PerturbationType perturbation_type_from_string(const std::string& s) {
    if (s == "mass_scale") return PerturbationType::mass_scale;
    if (s == "friction_scale") return PerturbationType::friction_scale;
    throw std::invalid_argument(fmt::format("unknown perturbation type '{}'", s));
}

PlantState initial_state(const SceneSpec& scene, const HandSpec& hand, Vec3 wrist_start) {
    PlantState s;
    s.hand.aperture = hand.a_max;
    s.hand.wrist_pos = wrist_start;
    s.object.mass = scene.mass();
    s.object.pos = scene.start_bin.center;
    s.object.pos.z = 0.5 * scene.object_length;
    s.object.status = ObjectStatus::in_start_bin;
    return s;
}

double object_weight(const PlantState& s, const SceneSpec& scene) {
    return s.object.mass * s.mass_scale * scene.gravity;
}

double required_grip_force(const PlantState& s, const SceneSpec& scene) {
    // Two friction contacts (thumb and fingers) carry the weight.
    return object_weight(s, scene) / (2.0 * scene.friction * s.friction_scale);
}

bool object_supported(const PlantState& s, const SceneSpec& scene) {
    return s.object.pos.z - 0.5 * scene.object_length <= kFloorEps;
}

ContactGeometry contact_geometry(const PlantState& s, const SceneSpec& scene, const HandSpec& hand) {
    ContactGeometry g;
    if (s.grip.engaged) {
        g.touching = true;
        g.point = {std::clamp(s.grip.arc_fraction, 0.0, 1.0), tactile::Side::palmar};
        return g;
    }
    if (!vertical_overlap(s, scene, hand)) return g;
    const double frac = finger_fraction(s, hand);
    if (!along_finger(frac, scene, hand)) return g;

    const double x_mid = s.hand.wrist_pos.x + 0.5 * s.hand.aperture + 0.5 * hand.finger_thickness;
    const double gap = std::abs(s.object.pos.x - x_mid);
    if (gap > 0.5 * hand.finger_thickness + radius(scene) + hand.contact_tolerance) return g;

    g.touching = true;
    g.point.arc_fraction = std::clamp(frac, 0.0, 1.0);
    g.point.side = s.object.pos.x < x_mid ? tactile::Side::palmar : tactile::Side::dorsal;
    return g;
}

StepResult step(const PlantState& in, double motor_voltage, Vec3 arm_vel, const SceneSpec& scene, const HandSpec& hand) {
    StepResult out;
    PlantState s = in;
    StepEvents& ev = out.events;
    const double r = radius(scene);
    const double half_len = 0.5 * scene.object_length;

    s.hand.wrist_pos = s.hand.wrist_pos + arm_vel * kDt;
    s.hand.wrist_pos.z = std::max(s.hand.wrist_pos.z, 0.5 * hand.finger_height);

    const double u = std::clamp(motor_voltage / hand.v_max, -1.0, 1.0);
    const double prev_aperture = s.hand.aperture;

    if (s.grip.engaged) {
        double& force = s.hand.grip_force;
        if (u > 0.0) {
            // Non-backdrivable, current-limited motor: closes at commanded speed
            // until the grip reaches u * stall_force.
            const double limit = u * hand.stall_force;
            if (force < limit) {
                force = std::min(limit, force + hand.contact_stiffness * hand.max_closing_speed() * u * kDt);
            }
        } else if (u < 0.0) {
            force += hand.contact_stiffness * hand.max_closing_speed() * u * kDt;
        }

        if (force <= 0.0 && u < 0.0) {
            force = 0.0;
            s.grip.engaged = false;
            ev.released = true;
        }
    }

    if (s.grip.engaged) {
        const double eject_excess = s.hand.grip_force - scene.eject_force;
        const double off_center = std::abs(s.grip.arc_fraction - 0.5);
        if (eject_excess > 0.0 && off_center > hand.eject_offcenter_tolerance) {
            const double dir = s.grip.arc_fraction >= 0.5 ? 1.0 : -1.0;
            s.grip.engaged = false;
            s.hand.grip_force = 0.0;
            s.object.vel = {0.0, dir * hand.eject_lateral_speed, -hand.eject_down_speed};
            s.object.status = ObjectStatus::ejected;
            ev.ejected = true;
        }
    }

    if (s.grip.engaged) {
        const Vec3 w = s.hand.wrist_pos;
        s.object.pos.x = w.x;
        s.object.pos.y = w.y + s.grip.arc_fraction * hand.finger_length;

        const double required = required_grip_force(s, scene);
        const bool holds = s.hand.grip_force >= required;
        const bool supported = object_supported(s, scene);

        if (holds) {
            s.object.pos.z = w.z - s.grip.offset;
            s.object.status = ObjectStatus::held;
        } else if (supported) {
            // Grip too weak to lift: the fingers slide along the resting object.
            s.grip.offset = w.z - s.object.pos.z;
            s.object.status = resting_status(s.object.pos, scene);
        } else {
            const double deficit = object_weight(s, scene) - 2.0 * scene.friction * s.friction_scale * s.hand.grip_force;
            const double slide = hand.slip_speed_gain * deficit;
            s.grip.offset += slide * kDt;
            s.hand.grip_force = std::max(0.0, s.hand.grip_force - hand.slip_unload_stiffness * slide * kDt);
            s.object.pos.z = w.z - s.grip.offset;
            s.object.status = ObjectStatus::slipping;
        }

        if (s.object.pos.z < half_len) {
            s.object.pos.z = half_len;
            s.grip.offset = w.z - s.object.pos.z;
        }
        s.object.vel = {};

        const double reach = half_len + 0.5 * hand.finger_height;
        if (std::abs(s.grip.offset) > reach) {
            s.grip.engaged = false;
            s.hand.grip_force = 0.0;
            ev.lost = true;
            s.object.status = object_supported(s, scene) ? resting_status(s.object.pos, scene) : ObjectStatus::free_fall;
        }
        if (s.grip.engaged) {
            s.hand.aperture = scene.object_diameter;
        }
    } else {
        s.hand.grip_force = 0.0;
        s.hand.aperture = std::clamp(s.hand.aperture - u * hand.max_closing_speed() * kDt, 0.0, hand.a_max);

        if (u > 0.0 && in_grasp_window(s, scene, hand)) {
            const double x_thumb = s.hand.wrist_pos.x - 0.5 * s.hand.aperture;
            const double x_palm = s.hand.wrist_pos.x + 0.5 * s.hand.aperture;
            if (s.hand.aperture <= scene.object_diameter) {
                s.hand.aperture = scene.object_diameter;
                s.object.pos.x = s.hand.wrist_pos.x;
                s.grip.engaged = true;
                s.grip.offset = s.hand.wrist_pos.z - s.object.pos.z;
                s.grip.arc_fraction = std::clamp(finger_fraction(s, hand), 0.0, 1.0);
                ev.grip_formed = true;
            } else {
                // Closing jaws push the object toward the middle of the hand.
                const double max_push = (hand.max_closing_speed() + hand.arm_speed_limit) * kDt;
                const double target = std::clamp(s.object.pos.x, x_thumb + r, x_palm - r);
                s.object.pos.x += std::clamp(target - s.object.pos.x, -max_push, max_push);
            }
        }
    }

    const bool at_rest_ejected = s.object.status == ObjectStatus::ejected && s.object.vel == Vec3{};
    if (!s.grip.engaged && airborne(s.object.status) && !at_rest_ejected) {
        s.object.vel.z -= scene.gravity * kDt;
        s.object.pos = s.object.pos + s.object.vel * kDt;
        if (s.object.pos.z - half_len <= 0.0) {
            s.object.pos.z = half_len;
            s.object.vel = {};
            // A squeezed-out object ends up knocked over and out of reach.
            if (s.object.status != ObjectStatus::ejected) s.object.status = resting_status(s.object.pos, scene);
            ev.landed = true;
        }
    } else if (!s.grip.engaged && !resting(s.object.status) && !at_rest_ejected) {
        // Just released or slid out.
        s.object.status = object_supported(s, scene) ? resting_status(s.object.pos, scene) : ObjectStatus::free_fall;
    }

    s.hand.aperture_rate = (s.hand.aperture - prev_aperture) / kDt;
    out.state = s;
    out.contact = contact_geometry(s, scene, hand);
    return out;
}

Region classify_region(const ObjectState& obj, const SceneSpec& scene) {
    if (obj.status == ObjectStatus::in_end_bin) return Region::in_end_bin;
    if (obj.status == ObjectStatus::in_start_bin) return Region::in_start_bin;
    const Vec3 d = obj.pos - scene.end_bin.center;
    if (d.horizontal_norm() <= scene.vicinity_radius) return Region::near_end_bin;
    return Region::elsewhere;
}

double displacement_from_end_bin(const ObjectState& obj, const SceneSpec& scene) {
    return (obj.pos - scene.end_bin.center).horizontal_norm();
}

double height_above_plate(const ObjectState& obj, const SceneSpec& scene) {
    return obj.pos.z - 0.5 * scene.object_length;
}

PerturbationSchedule::PerturbationSchedule(std::vector<Perturbation> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
}

void PerturbationSchedule::apply(Tick now, PlantState& s) const {
    for (const auto& e : events_) {
        double& target = e.type == PerturbationType::mass_scale ? s.mass_scale : s.friction_scale;
        if (e.ramp > 0 && now >= e.tick && now <= e.tick + e.ramp) {
            // Geometric ramp from 1 to the final multiplier.
            target = std::pow(e.magnitude, static_cast<double>(now - e.tick) / static_cast<double>(e.ramp));
        } else if (e.tick == now) {
            target = e.magnitude;
        }
        if (e.duration > 0 && e.tick + e.duration == now) {
            target = 1.0;
        }
    }
}

Plant::Plant(SceneSpec scene, HandSpec hand, Vec3 wrist_start) : scene_(scene), hand_(hand) {
    scene_.validate();
    hand_.validate();
    last_.state = initial_state(scene_, hand_, wrist_start);
    last_.contact = contact_geometry(last_.state, scene_, hand_);
}

const StepResult& Plant::step(double motor_voltage, Vec3 arm_vel) {
    last_ = plant::step(last_.state, motor_voltage, arm_vel, scene_, hand_);
    return last_;
}

}  // namespace prosim::plant
