#pragma once

#include <string>

#include "prosim/emg.hpp"
#include "prosim/tactile.hpp"
#include "prosim/units.hpp"

namespace prosim::control {

struct ControlGains {
    double k_overgrasp = 2.0;
    double p_g = 0.15;
    double q_fs = -2.0;   // 1/s, negative
    double p_ss = -0.05;  // negative
    int fast_pulse_ms = 60;
    int slow_pulse_ms = 30;
    double release_override_u_o = 0.8;
    double v_max = 6.0;  // motor supply, mirrors the hand's rating
    bool reflexes_enabled = true;

    void validate() const;
};

enum class CommandSource { volitional, overgrasp_modulated, fast_reflex, slow_reflex };

std::string to_string(CommandSource s);

struct MotorCommand {
    double u_c = 0.0;
    double u_o = 0.0;
    double voltage = 0.0;  // + closes, - opens
    CommandSource source = CommandSource::volitional;

    friend bool operator==(const MotorCommand&, const MotorCommand&) = default;
};

struct ReflexState {
    int fast_pulse_remaining = 0;
    int slow_pulse_remaining = 0;
    Tick last_fast_slip_tick = -1;
    Tick last_slow_slip_tick = -1;

    bool pulse_active() const { return fast_pulse_remaining > 0 || slow_pulse_remaining > 0; }
    friend bool operator==(const ReflexState&, const ReflexState&) = default;
};

/// Proportional closing/opening laws; the stronger channel wins and a tie
/// commands nothing.
MotorCommand volitional(const emg::NormalizedEmgPair& s, double v_max);

/// Scales the closing command by exp(-K p) once palmar grasp pressure is
/// reached.
MotorCommand overgrasp_modulate(const MotorCommand& cmd, const tactile::PressureReading& p,
                                const tactile::ContactReading& contact, const ControlGains& g);

bool detect_fast_slip(double dp_dt, const ControlGains& g);
bool detect_slow_slip(double delta, const ControlGains& g);

struct Arbitration {
    MotorCommand command;
    ReflexState state;
};

Arbitration arbitrate(const MotorCommand& volitional_cmd, const ReflexState& reflex, bool fast, bool slow,
                      const ControlGains& g, Tick now = 0);

struct TactileFrame {
    tactile::PressureReading pressure;
    tactile::SlowSlipDelta slow;
    tactile::ContactReading contact;
};

struct TickResult {
    MotorCommand command;
    ReflexState state;
    bool fast_slip = false;  // detector outputs, reported even with reflexes disabled
    bool slow_slip = false;
};

/// One control cycle: volitional -> over-grasp modulation -> slip detection
/// -> arbitration. Pure in its arguments.
TickResult tick(const emg::NormalizedEmgPair& s, const TactileFrame& frame, const ReflexState& state,
                const ControlGains& g);

}  // namespace prosim::control
