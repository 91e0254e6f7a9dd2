#include "prosim/control.hpp"

#include <cmath>
#include <stdexcept>

namespace prosim::control {

void ControlGains::validate() const {
    if (!(q_fs < 0.0)) throw std::invalid_argument("q_fs must be negative");
    if (!(p_ss < 0.0)) throw std::invalid_argument("p_ss must be negative");
    if (!(k_overgrasp >= 0.0)) throw std::invalid_argument("k_overgrasp must be non-negative");
    if (fast_pulse_ms <= 0 || slow_pulse_ms <= 0) throw std::invalid_argument("pulse durations must be positive");
    if (!(v_max > 0.0)) throw std::invalid_argument("v_max must be positive");
}

std::string to_string(CommandSource s) {
    switch (s) {
        case CommandSource::volitional: return "volitional";
        case CommandSource::overgrasp_modulated: return "overgrasp-modulated";
        case CommandSource::fast_reflex: return "fast-reflex";
        case CommandSource::slow_reflex: return "slow-reflex";
    }
    return "volitional";
}

MotorCommand volitional(const emg::NormalizedEmgPair& s, double v_max) {
    MotorCommand cmd;
    cmd.u_c = (s.s_f - s.s_x > 0.0) ? s.s_f : 0.0;
    cmd.u_o = (s.s_x - s.s_f > 0.0) ? s.s_x : 0.0;
    cmd.voltage = (cmd.u_c - cmd.u_o) * v_max;
    cmd.source = CommandSource::volitional;
    return cmd;
}

MotorCommand overgrasp_modulate(const MotorCommand& cmd, const tactile::PressureReading& p,
                                const tactile::ContactReading& contact, const ControlGains& g) {
    if (!(p.p >= g.p_g) || contact.side != tactile::Side::palmar) {
        return cmd;
    }
    MotorCommand out = cmd;
    out.u_c = cmd.u_c * std::exp(-g.k_overgrasp * p.p);
    out.voltage = (out.u_c - out.u_o) * g.v_max;
    out.source = CommandSource::overgrasp_modulated;
    return out;
}

bool detect_fast_slip(double dp_dt, const ControlGains& g) { return dp_dt <= g.q_fs; }

bool detect_slow_slip(double delta, const ControlGains& g) { return delta < g.p_ss; }

Arbitration arbitrate(const MotorCommand& volitional_cmd, const ReflexState& reflex, bool fast, bool slow,
                      const ControlGains& g, Tick now) {
    if (!g.reflexes_enabled) {
        return {volitional_cmd, reflex};
    }

    ReflexState st = reflex;
    if (fast) {
        // A renewed fast slip restarts the pulse and pre-empts any slow one.
        st.fast_pulse_remaining = g.fast_pulse_ms;
        st.slow_pulse_remaining = 0;
        st.last_fast_slip_tick = now;
    } else if (slow && !st.pulse_active()) {
        st.slow_pulse_remaining = g.slow_pulse_ms;
        st.last_slow_slip_tick = now;
    }

    if (volitional_cmd.u_o >= g.release_override_u_o) {
        st.fast_pulse_remaining = 0;
        st.slow_pulse_remaining = 0;
    }

    if (!st.pulse_active()) {
        return {volitional_cmd, st};
    }

    MotorCommand out;
    out.u_c = 1.0;
    out.u_o = 0.0;
    out.voltage = g.v_max;
    if (st.fast_pulse_remaining > 0) {
        out.source = CommandSource::fast_reflex;
        --st.fast_pulse_remaining;
    } else {
        out.source = CommandSource::slow_reflex;
        --st.slow_pulse_remaining;
    }
    return {out, st};
}

TickResult tick(const emg::NormalizedEmgPair& s, const TactileFrame& frame, const ReflexState& state,
                const ControlGains& g) {
    MotorCommand cmd = volitional(s, g.v_max);
    if (g.reflexes_enabled) {
        cmd = overgrasp_modulate(cmd, frame.pressure, frame.contact, g);
    }
    const bool fast = frame.pressure.dp_ready && detect_fast_slip(frame.pressure.dp_dt, g);
    const bool slow = frame.slow.ready && detect_slow_slip(frame.slow.delta, g);
    auto [out, next] = arbitrate(cmd, state, fast, slow, g, frame.pressure.tick);
    return {out, next, fast, slow};
}

}  // namespace prosim::control
