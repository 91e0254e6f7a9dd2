#include "prosim/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace prosim::tactile {

std::string to_string(Side side) {
    switch (side) {
        case Side::none: return "none";
        case Side::palmar: return "palmar";
        case Side::dorsal: return "dorsal";
    }
    return "none";
}

Side side_from_string(const std::string& s) {
    if (s == "none") return Side::none;
    if (s == "palmar") return Side::palmar;
    if (s == "dorsal") return Side::dorsal;
    throw std::invalid_argument(fmt::format("unknown contact side '{}'", s));
}

void PressureSensorModel::validate() const {
    if (!(supply_v > 0.0)) throw std::invalid_argument("pressure sensor supply_v must be positive");
    if (!(series_r > 0.0)) throw std::invalid_argument("pressure sensor series_r must be positive");
    if (!(r_saturated > 0.0) || !(r_unloaded > r_saturated)) {
        throw std::invalid_argument("pressure sensor requires r_unloaded > r_saturated > 0");
    }
    if (!(force_scale > 0.0)) throw std::invalid_argument("pressure sensor force_scale must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("pressure sensor noise_sigma must be non-negative");
}

double sensor_resistance(double grip_force, const PressureSensorModel& model) {
    return model.r_saturated + (model.r_unloaded - model.r_saturated) * std::exp(-grip_force / model.force_scale);
}

double divider_voltage(double resistance, const PressureSensorModel& model) {
    return model.supply_v * model.series_r / (model.series_r + resistance);
}

double pressure_from_force(double grip_force, const PressureSensorModel& model) {
    if (grip_force < 0.0 || std::isnan(grip_force)) {
        throw std::domain_error(fmt::format("grip force must be non-negative, got {}", grip_force));
    }
    const double v_out = divider_voltage(sensor_resistance(grip_force, model), model);
    const double v_max = divider_voltage(model.r_saturated, model);
    return std::clamp(v_out / v_max, 0.0, 1.0);
}

PressureHistory::PressureHistory(std::size_t capacity) : buffer_(std::max<std::size_t>(capacity, 2)) {}

void PressureHistory::push(Tick tick, double p) {
    buffer_[head_] = {tick, p};
    head_ = (head_ + 1) % buffer_.size();
    count_ = std::min(count_ + 1, buffer_.size());
}

void PressureHistory::clear() {
    head_ = 0;
    count_ = 0;
}

PressureHistory::Entry PressureHistory::from_newest(std::size_t i) const {
    if (i >= count_) {
        throw std::out_of_range("pressure history index out of range");
    }
    const std::size_t n = buffer_.size();
    return buffer_[(head_ + n - 1 - i) % n];
}

std::optional<PressureHistory::Entry> PressureHistory::nearest(Tick tick) const {
    if (count_ == 0) {
        return std::nullopt;
    }
    // Ticks are ordered, so walk back from the newest until we pass `tick`.
    Entry best = newest();
    for (std::size_t i = 0; i < count_; ++i) {
        const Entry e = from_newest(i);
        if (std::llabs(e.tick - tick) < std::llabs(best.tick - tick)) {
            best = e;
        }
        if (e.tick <= tick) {
            break;
        }
    }
    return best;
}

Derivative derivative(const PressureHistory& history) {
    if (history.size() < 2) {
        return {};
    }
    const auto now = history.newest();
    if (now.tick - history.oldest().tick < kDerivativeWindowTicks) {
        return {};
    }
    const auto past = *history.nearest(now.tick - kDerivativeWindowTicks);
    const double dt = ticks_to_seconds(now.tick - past.tick);
    return {(now.p - past.p) / dt, true};
}

SlowSlipDelta slow_slip_delta(const PressureHistory& history) {
    if (history.empty()) {
        return {};
    }
    const auto now = history.newest();
    if (now.tick - history.oldest().tick < kSlowSlipLagTicks) {
        return {};
    }
    const auto past = *history.nearest(now.tick - kSlowSlipLagTicks);
    return {now.p - past.p, true};
}

namespace {

double adc_lsb(const ContactSensorModel& model) {
    return model.adc_full_scale_v / static_cast<double>((1 << model.adc_bits) - 1);
}

}  // namespace

double encode_contact_voltage(const FingerSurfacePoint& point, const ContactSensorModel& model) {
    const double x = std::clamp(point.arc_fraction, 0.0, 1.0);
    const double along = point.side == Side::dorsal ? 1.0 - 0.5 * x : 0.5 * x;
    const double v = model.v_low + along * (model.v_high - model.v_low);
    const double lsb = adc_lsb(model);
    return std::round(v / lsb) * lsb;
}

ContactReading decode_contact_voltage(double voltage, Side geometric_side, const ContactSensorModel& model) {
    const double along = std::clamp((voltage - model.v_low) / (model.v_high - model.v_low), 0.0, 1.0);
    const double tip_band = adc_lsb(model) / (model.v_high - model.v_low);
    if (std::abs(along - 0.5) <= tip_band) {
        // Both half-ranges meet at the fingertip; the voltage alone cannot
        // tell the sides apart there.
        return {geometric_side, 1.0};
    }
    if (along < 0.5) {
        return {Side::palmar, std::clamp(2.0 * along, 0.0, 1.0)};
    }
    return {Side::dorsal, std::clamp(2.0 * (1.0 - along), 0.0, 1.0)};
}

ContactReading contact_from_geometry(const FingerSurfacePoint& point, bool touching, const ContactSensorModel& model) {
    if (!touching || point.side == Side::none) {
        return {};
    }
    return decode_contact_voltage(encode_contact_voltage(point, model), point.side, model);
}

bool GraspDetector::update(const PressureReading& p) {
    const bool above = p.p >= p_g_;
    if (above != grasped_) {
        ++run_;
        if (run_ >= debounce_) {
            grasped_ = above;
            run_ = 0;
        }
    } else {
        run_ = 0;
    }
    return grasped_;
}

void GraspDetector::reset() {
    run_ = 0;
    grasped_ = false;
}

TactileFrontEnd::TactileFrontEnd(PressureSensorModel pressure_model, ContactSensorModel contact_model, std::uint64_t seed)
    : pressure_model_(pressure_model), contact_model_(contact_model), rng_(seed) {
    pressure_model_.validate();
}

TactileFrontEnd::Frame TactileFrontEnd::sample(Tick tick, double grip_force,
                                               const std::optional<FingerSurfacePoint>& contact_point) {
    Frame f;
    double p = pressure_from_force(std::max(grip_force, 0.0), pressure_model_);
    if (pressure_model_.noise_sigma > 0.0) {
        p += pressure_model_.noise_sigma * noise_(rng_);
    }
    p = std::clamp(p, 0.0, 1.0);
    f.divider_v = p * divider_voltage(pressure_model_.r_saturated, pressure_model_);

    history_.push(tick, p);
    const auto d = derivative(history_);
    f.pressure = {p, d.dp_dt, d.ready, tick};
    f.slow = slow_slip_delta(history_);
    f.contact = contact_point ? contact_from_geometry(*contact_point, true, contact_model_) : ContactReading{};
    return f;
}

}  // namespace prosim::tactile
