#include "prosim/session.hpp"

#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "prosim/scenario.hpp"

namespace prosim::interface {

using nlohmann::json;

namespace {

double finite_number(const json& j, const char* key) {
    if (!j.is_number()) throw ProtocolError("bad_field", fmt::format("'{}' must be a number", key));
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ProtocolError("bad_field", fmt::format("'{}' must be finite", key));
    return v;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ProtocolError("unknown_field", fmt::format("unknown field '{}'", key));
    }
}

}  // namespace

Command parse_message(std::string_view text, double max_arm_speed) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError("bad_json", e.what());
    }
    if (!j.is_object()) throw ProtocolError("bad_message", "message must be a JSON object");
    if (!j.contains("v") || j["v"] != kProtocolVersion) {
        throw ProtocolError("bad_version", fmt::format("expected \"v\": {}", kProtocolVersion));
    }
    if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("bad_message", "missing \"type\"");
    const std::string type = j["type"];

    if (type == "intent") {
        reject_unknown(j, {"v", "type", "flexion", "extension", "arm_vel", "rezero", "ts"});
        IntentMessage m;
        if (j.contains("flexion")) m.flexion = std::clamp(finite_number(j["flexion"], "flexion"), 0.0, 1.0);
        if (j.contains("extension")) m.extension = std::clamp(finite_number(j["extension"], "extension"), 0.0, 1.0);
        if (j.contains("arm_vel")) {
            const json& a = j["arm_vel"];
            if (!a.is_array() || a.size() != 3) throw ProtocolError("bad_field", "'arm_vel' must be [x, y, z]");
            m.arm_vel = {finite_number(a[0], "arm_vel"), finite_number(a[1], "arm_vel"), finite_number(a[2], "arm_vel")};
            const double speed = std::sqrt(m.arm_vel.x * m.arm_vel.x + m.arm_vel.y * m.arm_vel.y + m.arm_vel.z * m.arm_vel.z);
            if (speed > max_arm_speed) m.arm_vel = m.arm_vel * (max_arm_speed / speed);
        }
        if (j.contains("rezero")) {
            if (!j["rezero"].is_boolean()) throw ProtocolError("bad_field", "'rezero' must be a boolean");
            m.rezero = j["rezero"];
        }
        if (j.contains("ts")) m.client_ts = finite_number(j["ts"], "ts");
        return m;
    }
    if (type == "start_trial") {
        reject_unknown(j, {"v", "type", "trial_id", "seed", "time_limit_s", "scene"});
        StartTrialMessage m;
        if (j.contains("trial_id")) {
            if (!j["trial_id"].is_string() || j["trial_id"].get<std::string>().empty()) {
                throw ProtocolError("bad_field", "'trial_id' must be a non-empty string");
            }
            m.trial_id = j["trial_id"].get<std::string>();
        }
        if (j.contains("seed")) {
            if (!j["seed"].is_number_unsigned()) throw ProtocolError("bad_field", "'seed' must be a non-negative integer");
            m.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("time_limit_s")) {
            m.time_limit_s = finite_number(j["time_limit_s"], "time_limit_s");
            if (!(m.time_limit_s > 0.0)) throw ProtocolError("bad_field", "'time_limit_s' must be positive");
        }
        if (j.contains("scene")) {
            if (!j["scene"].is_object()) throw ProtocolError("bad_field", "'scene' must be an object");
            m.scene = j["scene"];
        }
        return m;
    }
    if (type == "abort") {
        reject_unknown(j, {"v", "type", "reason"});
        AbortMessage m;
        if (j.contains("reason")) {
            if (!j["reason"].is_string()) throw ProtocolError("bad_field", "'reason' must be a string");
            m.reason = j["reason"];
        }
        return m;
    }
    if (type == "set_condition") {
        reject_unknown(j, {"v", "type", "condition"});
        if (!j.contains("condition") || !j["condition"].is_string()) {
            throw ProtocolError("bad_field", "'condition' must be \"standard\" or \"tactile\"");
        }
        try {
            return SetConditionMessage{condition_from_string(j["condition"])};
        } catch (const std::exception& e) {
            throw ProtocolError("bad_field", e.what());
        }
    }
    if (type == "recalibrate") {
        reject_unknown(j, {"v", "type"});
        return RecalibrateMessage{};
    }
    throw ProtocolError("unknown_type", fmt::format("unknown message type '{}'", type));
}

json error_message(const std::string& code, const std::string& message) {
    return {{"v", kProtocolVersion}, {"type", "error"}, {"code", code}, {"message", message}};
}

Clock::time_point SteadyClock::now() { return std::chrono::steady_clock::now(); }
void SteadyClock::sleep_until(time_point t) { std::this_thread::sleep_until(t); }

Session::Session(SessionOptions options)
    : options_(std::move(options)),
      inbound_(options_.inbound_capacity),
      outbound_(options_.outbound_capacity),
      config_(options_.config) {
    config_.validate();
    if (options_.log_dir) std::filesystem::create_directories(*options_.log_dir);
}

void Session::receive(std::string_view text) {
    try {
        inbound_.push(parse_message(text, options_.max_arm_speed));
    } catch (const ProtocolError& e) {
        spdlog::debug("rejected message: {}", e.what());
        outbound_.push(error_message(e.code(), e.what()).dump());
    }
}

void Session::disconnect() { inbound_.push(DisconnectNotice{}); }

std::optional<std::string> Session::next_outbound() { return outbound_.try_pop(); }

std::optional<std::string> Session::wait_outbound(std::chrono::milliseconds timeout) {
    return outbound_.pop_for(timeout);
}

Condition Session::condition() const { return config_.condition; }

void Session::emit(json msg) { outbound_.push(msg.dump()); }

void Session::apply(const Command& cmd) {
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IntentMessage>) {
                intent_ = m;
            } else if constexpr (std::is_same_v<T, StartTrialMessage>) {
                if (runner_) {
                    emit(error_message("trial_active", "a trial is already running"));
                    return;
                }
                start_trial(m);
            } else if constexpr (std::is_same_v<T, AbortMessage>) {
                if (!runner_) {
                    emit(error_message("no_trial", "no trial is running"));
                    return;
                }
                runner_->abort(m.reason);
                end_trial();
            } else if constexpr (std::is_same_v<T, SetConditionMessage>) {
                if (runner_) {
                    emit(error_message("trial_active", "condition cannot change during a trial"));
                    return;
                }
                config_.set_condition(m.condition);
                emit({{"v", kProtocolVersion}, {"type", "ack"}, {"command", "set_condition"},
                      {"condition", to_string(m.condition)}});
            } else if constexpr (std::is_same_v<T, RecalibrateMessage>) {
                if (!runner_) {
                    emit(error_message("no_trial", "calibration runs at trial start; no trial is running"));
                    return;
                }
                runner_->recalibrate();
                emit({{"v", kProtocolVersion}, {"type", "ack"}, {"command", "recalibrate"}, {"tick", runner_->now()}});
            } else if constexpr (std::is_same_v<T, DisconnectNotice>) {
                intent_ = {};
                if (runner_) {
                    spdlog::warn("operator disconnected during trial {}", trial_id_);
                    runner_->abort("operator disconnected");
                    end_trial();
                }
            }
        },
        cmd);
}

void Session::start_trial(const StartTrialMessage& msg) {
    ++trials_started_;
    trials::Scenario sc;
    sc.id = msg.trial_id.value_or(fmt::format("live_{:03}", trials_started_));
    sc.time_limit_s = msg.time_limit_s;
    sc.scene_overrides = msg.scene;
    const std::uint64_t seed = msg.seed.value_or(options_.base_seed + trials_started_ - 1);
    try {
        auto [cfg, setup] = trials::prepare_trial(sc, config_, seed);
        runner_ = std::make_unique<trials::TrialRunner>(std::move(cfg), std::move(setup));
    } catch (const std::exception& e) {
        emit(error_message("bad_trial", e.what()));
        return;
    }
    trial_id_ = sc.id;
    intent_.rezero = false;
    applied_ts_.reset();
    applied_tick_ = -1;
    trial_active_ = true;
    spdlog::info("trial {} started (condition {}, seed {})", sc.id, to_string(config_.condition), seed);
    emit({{"v", kProtocolVersion}, {"type", "ack"}, {"command", "start_trial"}, {"trial_id", sc.id}, {"seed", seed},
          {"condition", to_string(config_.condition)}});
}

void Session::end_trial() {
    trials::TrialRecord rec = runner_->take_record();
    runner_.reset();
    trial_active_ = false;
    if (options_.log_dir) {
        try {
            trials::write_trace_csv(*options_.log_dir / fmt::format("trial_{}.csv", rec.trial_id), rec.trace);
            trials::write_events_jsonl(*options_.log_dir / fmt::format("trial_{}.events.jsonl", rec.trial_id),
                                       rec.events);
        } catch (const std::exception& e) {
            spdlog::error("writing logs for trial {} failed: {}", rec.trial_id, e.what());
        }
    }
    const auto& m = rec.metrics;
    spdlog::info("trial {} ended: score {:.3f}{}", rec.trial_id, m.score, rec.aborted ? " (aborted)" : "");
    emit({{"v", kProtocolVersion},
          {"type", "trial_end"},
          {"trial_id", rec.trial_id},
          {"aborted", rec.aborted},
          {"reason", rec.abort_reason},
          {"success", m.success},
          {"elapsed_s", m.elapsed_s},
          {"score", m.score},
          {"time_remaining", m.time_remaining},
          {"exploration_contact_rate", m.exploration_contact_rate},
          {"fast_slip_rate", m.fast_slip_rate},
          {"final_status", plant::to_string(rec.final_status)}});
    rec.trace.clear();
    rec.trace.shrink_to_fit();
    history_.push_back(std::move(rec));
}

json Session::telemetry(const trials::TraceRow& row) const {
    const auto& st = runner_->plant_state();
    const auto& drive = runner_->tactor();
    const auto& ms = runner_->milestones();
    auto opt_tick = [](const std::optional<Tick>& t) { return t ? json(ticks_to_seconds(*t)) : json(nullptr); };
    json frame = {
        {"v", kProtocolVersion},
        {"type", "telemetry"},
        {"trial_id", trial_id_},
        {"tick", row.tick},
        {"t", ticks_to_seconds(row.tick)},
        {"hand",
         {{"aperture", row.aperture},
          {"grip_force", st.hand.grip_force},
          {"wrist", {st.hand.wrist_pos.x, st.hand.wrist_pos.y, st.hand.wrist_pos.z}},
          {"u_c", row.u_c},
          {"u_o", row.u_o},
          {"voltage", row.voltage}}},
        {"object",
         {{"status", plant::to_string(row.status)},
          {"pos", {st.object.pos.x, st.object.pos.y, st.object.pos.z}},
          {"D", row.d},
          {"H", row.h}}},
        {"p", row.p},
        {"contact", {{"side", tactile::to_string(row.side)},
                     {"x", row.side == tactile::Side::none ? json(nullptr) : json(row.x)}}},
        {"tactor",
         {{"current", drive.current},
          {"carrier_f", drive.carrier_f},
          {"envelope_active", drive.envelope_active},
          {"amplitude_scale", drive.amplitude_scale}}},
        {"milestones",
         {{"lifted", opt_tick(ms.lifted)},
          {"near_end_bin", opt_tick(ms.near_end_bin)},
          {"placed", opt_tick(ms.placed)},
          {"score", trials::score(ms)}}},
        {"intent", {{"applied_tick", applied_tick_}, {"ts", applied_ts_ ? json(*applied_ts_) : json(nullptr)}}},
        {"dropped", outbound_.dropped()},
    };
    return frame;
}

void Session::tick() {
    // Everything received before this tick takes effect in it.
    while (auto cmd = inbound_.try_pop()) {
        const bool is_intent = std::holds_alternative<IntentMessage>(*cmd);
        apply(*cmd);
        if (is_intent && runner_) {
            applied_ts_ = intent_.client_ts;
            applied_tick_ = runner_->now();
        }
    }
    if (!runner_) return;

    const trials::TickInputs in{{intent_.flexion, intent_.extension}, intent_.arm_vel, intent_.rezero};
    intent_.rezero = false;
    const trials::TraceRow& row = runner_->step(in);
    if (row.tick % config_.stream_decimation == 0) emit(telemetry(row));
    if (runner_->finished()) end_trial();
}

void run_control_loop(Session& session, Clock& clock, const std::atomic<bool>& stop) {
    constexpr auto kPeriod = std::chrono::milliseconds(1);
    constexpr auto kMaxLag = std::chrono::milliseconds(100);
    auto next = clock.now();
    while (!stop.load()) {
        session.tick();
        next += kPeriod;
        const auto now = clock.now();
        if (now - next > kMaxLag) {
            spdlog::warn("control loop fell {} ms behind; resynchronizing",
                         std::chrono::duration_cast<std::chrono::milliseconds>(now - next).count());
            next = now;
        }
        clock.sleep_until(next);
    }
}

}  // namespace prosim::interface
