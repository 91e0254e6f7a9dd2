#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "prosim/units.hpp"

namespace prosim::tactile {

struct PressureReading {
    double p = 0.0;
    double dp_dt = 0.0;  // 1/s
    bool dp_ready = false;
    Tick tick = 0;
};

enum class Side { none, palmar, dorsal };

/// Contact location on the wrapped finger sensor. `x` is 0 at the proximal
/// end and 1 at the fingertip, and is only meaningful when side != none.
struct ContactReading {
    Side side = Side::none;
    double x = 0.0;

    bool touching() const { return side != Side::none; }
    friend bool operator==(const ContactReading&, const ContactReading&) = default;
};

std::string to_string(Side side);
Side side_from_string(const std::string& s);

/// Thumb pressure sensor: a piezoresistive element in series with a fixed
/// resistor, read across the fixed resistor.
struct PressureSensorModel {
    double supply_v = 5.0;
    double series_r = 1000.0;
    double r_unloaded = 30000.0;
    double r_saturated = 200.0;
    double force_scale = 10.0;  // N
    double noise_sigma = 0.001;

    void validate() const;
};

double sensor_resistance(double grip_force, const PressureSensorModel& model);
double divider_voltage(double resistance, const PressureSensorModel& model);

/// Normalized pressure signal p in [0, 1]; 1 corresponds to the divider
/// voltage at r_saturated. Throws std::domain_error for negative force.
double pressure_from_force(double grip_force, const PressureSensorModel& model);

/// Ring of (tick, p) samples at the control rate.
class PressureHistory {
public:
    explicit PressureHistory(std::size_t capacity = 1024);

    void push(Tick tick, double p);
    void clear();

    std::size_t size() const { return count_; }
    std::size_t capacity() const { return buffer_.size(); }
    bool empty() const { return count_ == 0; }

    /// i = 0 is the newest sample.
    struct Entry {
        Tick tick;
        double p;
    };
    Entry from_newest(std::size_t i) const;
    Entry newest() const { return from_newest(0); }
    Entry oldest() const { return from_newest(count_ - 1); }

    /// Sample whose tick is nearest to `tick`.
    std::optional<Entry> nearest(Tick tick) const;

private:
    std::vector<Entry> buffer_;
    std::size_t head_ = 0;  // next write slot
    std::size_t count_ = 0;
};

inline constexpr Tick kDerivativeWindowTicks = 10;
inline constexpr Tick kSlowSlipLagTicks = 500;

struct Derivative {
    double dp_dt = 0.0;
    bool ready = false;
};

/// Causal two-point difference across 10 ms.
Derivative derivative(const PressureHistory& history);

struct SlowSlipDelta {
    double delta = 0.0;
    bool ready = false;
};

/// p(t) - p(t - 0.5 s). Not ready until the history spans 500 ms.
SlowSlipDelta slow_slip_delta(const PressureHistory& history);

/// The wrapped finger sensor as one voltage gradient: palmar surface occupies
/// the first half (proximal to tip), dorsal the second half (tip back to
/// proximal). Readings are quantized by the ADC.
struct ContactSensorModel {
    double v_low = 0.5;
    double v_high = 4.5;
    double adc_full_scale_v = 5.0;
    int adc_bits = 12;
};

struct FingerSurfacePoint {
    double arc_fraction = 0.0;  // 0 proximal, 1 distal, along the touched side
    Side side = Side::palmar;
};

double encode_contact_voltage(const FingerSurfacePoint& point, const ContactSensorModel& model);
ContactReading decode_contact_voltage(double voltage, Side geometric_side, const ContactSensorModel& model);

ContactReading contact_from_geometry(const FingerSurfacePoint& point, bool touching,
                                     const ContactSensorModel& model = {});

/// Stateful grasp detector: asserts after p >= p_g holds for the debounce
/// window and releases after p < p_g holds for the same window.
class GraspDetector {
public:
    explicit GraspDetector(double p_g = 0.15, Tick debounce_ticks = 20) : p_g_(p_g), debounce_(debounce_ticks) {}

    bool update(const PressureReading& p);
    bool grasped() const { return grasped_; }
    void reset();

private:
    double p_g_;
    Tick debounce_;
    Tick run_ = 0;
    bool grasped_ = false;
};

/// Per-tick sensor front end: turns grip force and finger geometry into the
/// pressure and contact readings, keeping the pressure history.
class TactileFrontEnd {
public:
    struct Frame {
        PressureReading pressure;
        SlowSlipDelta slow;
        ContactReading contact;
        double divider_v = 0.0;
    };

    TactileFrontEnd(PressureSensorModel pressure_model, ContactSensorModel contact_model, std::uint64_t seed);

    Frame sample(Tick tick, double grip_force, const std::optional<FingerSurfacePoint>& contact_point);
    const PressureHistory& history() const { return history_; }

private:
    PressureSensorModel pressure_model_;
    ContactSensorModel contact_model_;
    PressureHistory history_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> noise_{0.0, 1.0};
};

}  // namespace prosim::tactile
