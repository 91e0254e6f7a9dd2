#include "prosim/trials.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace prosim::trials {

using nlohmann::json;

double score(const Milestones& m) {
    if (!m.lifted) return 0.0;
    if (!m.near_end_bin) return 1.0 / 3.0;
    if (!m.placed) return 2.0 / 3.0;
    return 1.0;
}

double score(std::span<const Event> events) {
    Milestones m;
    for (const auto& e : events) {
        if (e.type == event::kLifted) {
            m.lifted = e.tick;
        } else if (e.type == event::kNearEndBin && m.lifted) {
            m.near_end_bin = e.tick;
        } else if (e.type == event::kPlaced && m.near_end_bin) {
            m.placed = e.tick;
        }
    }
    return score(m);
}

double time_remaining(bool success, double elapsed_s, double time_limit_s) {
    if (!success) return 0.0;
    return std::max(0.1, time_limit_s - elapsed_s);
}

double rate_divisor(bool success, double elapsed_s, double time_limit_s) {
    return success ? elapsed_s : time_limit_s;
}

double exploration_contact_rate(std::span<const Event> events, double trial_time_s) {
    if (!(trial_time_s > 0.0)) throw std::invalid_argument("trial time must be positive");
    int count = 0;
    for (const auto& e : events) {
        if (e.type == event::kGraspDetected) break;
        if (e.type == event::kContactStart) ++count;
    }
    return count / trial_time_s;
}

double fast_slip_rate(std::span<const Event> events, double trial_time_s) {
    if (!(trial_time_s > 0.0)) throw std::invalid_argument("trial time must be positive");
    const auto count = std::count_if(events.begin(), events.end(), [](const Event& e) { return e.type == event::kFastSlip; });
    return static_cast<double>(count) / trial_time_s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

emg::EmgSource make_source(const SessionConfig& cfg, const TrialSetup& setup) {
    auto spec = cfg.emg;
    spec.seed = derive_seed(setup.seed, 1);
    if (!setup.emg_trace.empty()) {
        spec.mode = emg::SourceMode::replay;
        return emg::EmgSource(spec, setup.emg_trace);
    }
    if (spec.mode == emg::SourceMode::replay) spec.mode = emg::SourceMode::synthetic;
    return emg::EmgSource(spec);
}

emg::EmgCalibration protocol_calibration(const SessionConfig& cfg, std::uint64_t seed) {
    auto spec = cfg.emg;
    spec.mode = emg::SourceMode::synthetic;
    spec.seed = seed;
    emg::EmgSource source(spec);
    return emg::run_calibration_protocol(source);
}

json calibration_json(const emg::EmgCalibration& c) {
    return {{"flexor_offset", c.flexor_offset}, {"extensor_offset", c.extensor_offset},
            {"flexor_upper", c.flexor_upper},   {"flexor_lower", c.flexor_lower},
            {"extensor_upper", c.extensor_upper}, {"extensor_lower", c.extensor_lower}};
}

Vec3 clamp_speed(Vec3 v, double limit) {
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (n <= limit || n == 0.0) return v;
    return v * (limit / n);
}

}  // namespace

TrialRunner::TrialRunner(SessionConfig config, TrialSetup setup)
    : config_(std::move(config)),
      setup_(std::move(setup)),
      emg_source_(make_source(config_, setup_)),
      front_end_(config_.pressure_sensor, config_.contact_sensor, derive_seed(setup_.seed, 3)),
      grasp_(config_.gains.p_g, config_.grasp_debounce_ticks),
      renderer_(config_.feedback_enabled()),
      plant_(config_.scene, config_.hand, setup_.arm_start),
      perturbations_(setup_.perturbations) {
    config_.validate();
    if (!(setup_.time_limit_s > 0.0)) throw std::invalid_argument("time limit must be positive");
    limit_ticks_ = seconds_to_ticks(setup_.time_limit_s);
    calibration_ = setup_.calibration ? *setup_.calibration : protocol_calibration(config_, derive_seed(setup_.seed, 2));

    record_.trial_id = setup_.trial_id;
    record_.condition = config_.condition;
    record_.seed = setup_.seed;
    record_.time_limit_s = setup_.time_limit_s;
    record_.trace.reserve(static_cast<std::size_t>(std::min<Tick>(limit_ticks_, 20000)));

    log(0, event::kTrialStart,
        {{"trial_id", setup_.trial_id},
         {"condition", to_string(config_.condition)},
         {"seed", setup_.seed},
         {"time_limit_s", setup_.time_limit_s},
         {"emg_mode", emg::to_string(emg_source_.spec().mode)},
         {"calibration", calibration_json(calibration_)},
         {"config", config_to_json(config_)}});
}

void TrialRunner::log(Tick tick, const char* type, json data) {
    record_.events.push_back({tick, type, std::move(data)});
}

void TrialRunner::track_contact(Tick tick, bool touching, tactile::Side side) {
    // Symmetric debounce: an episode opens after the window of continuous
    // touch and closes after the same window of continuous release.
    if (touching != contact_on_) {
        ++contact_run_;
    } else {
        contact_run_ = 0;
    }
    if (contact_run_ < config_.contact_debounce_ticks) return;
    contact_run_ = 0;
    contact_on_ = touching;
    const Tick onset = tick - config_.contact_debounce_ticks + 1;
    if (touching) {
        if (!first_grasp_) ++pre_grasp_contacts_;
        log(tick, event::kContactStart, {{"onset_tick", onset}, {"side", tactile::to_string(side)}});
    } else {
        log(tick, event::kContactEnd, {{"onset_tick", onset}});
    }
}

void TrialRunner::check_milestones(Tick tick) {
    const auto& obj = plant_.state().object;
    const auto& scene = plant_.scene();
    if (!milestones_.lifted && obj.status == plant::ObjectStatus::held &&
        plant::height_above_plate(obj, scene) > scene.start_bin.size.z) {
        milestones_.lifted = tick;
        log(tick, event::kLifted, {{"H", plant::height_above_plate(obj, scene)}});
    }
    if (!milestones_.lifted) return;
    const double d = plant::displacement_from_end_bin(obj, scene);
    const bool placed = obj.status == plant::ObjectStatus::in_end_bin;
    if (!milestones_.near_end_bin && (d <= scene.vicinity_radius || placed)) {
        milestones_.near_end_bin = tick;
        log(tick, event::kNearEndBin, {{"D", d}});
    }
    if (!milestones_.placed && placed) {
        milestones_.placed = tick;
        log(tick, event::kPlaced, {{"D", d}});
    }
}

bool TrialRunner::check_finite(Tick tick) {
    const auto& s = plant_.state();
    const std::array<std::pair<const char*, double>, 10> values{{
        {"grip_force", s.hand.grip_force},
        {"aperture", s.hand.aperture},
        {"wrist_x", s.hand.wrist_pos.x},
        {"wrist_y", s.hand.wrist_pos.y},
        {"wrist_z", s.hand.wrist_pos.z},
        {"object_x", s.object.pos.x},
        {"object_y", s.object.pos.y},
        {"object_z", s.object.pos.z},
        {"p", frame_.pressure.p},
        {"voltage", control_.command.voltage},
    }};
    for (const auto& [name, v] : values) {
        if (!std::isfinite(v)) {
            log(tick, event::kNumericFault, {{"field", name}, {"value", fmt::format("{}", v)}});
            record_.aborted = true;
            record_.abort_reason = fmt::format("numeric fault in {} at tick {}", name, tick);
            return false;
        }
    }
    return true;
}

const TraceRow& TrialRunner::step(const TickInputs& in) {
    if (finished_) throw std::logic_error("trial already finished");
    const Tick k = tick_;

    const double mass_before = plant_.state().mass_scale;
    const double friction_before = plant_.state().friction_scale;
    perturbations_.apply(k, plant_.mutable_state());
    if (plant_.state().mass_scale != mass_before || plant_.state().friction_scale != friction_before) {
        log(k, event::kPerturbation,
            {{"mass_scale", plant_.state().mass_scale}, {"friction_scale", plant_.state().friction_scale}});
    }

    if (in.rezero) {
        const std::vector<emg::RawEmgSample> window(recent_raw_.begin(), recent_raw_.end());
        if (auto c = emg::rezero(calibration_, window)) {
            calibration_ = *c;
            log(k, event::kRezero, {{"flexor_offset", c->flexor_offset}, {"extensor_offset", c->extensor_offset}});
        } else {
            log(k, event::kRezeroRejected, {{"samples", window.size()}});
        }
    }

    if (auto raw = emg_source_.next_sample(in.intent)) {
        recent_raw_.push_back(*raw);
        if (recent_raw_.size() > static_cast<std::size_t>(emg::kMinRezeroTicks)) recent_raw_.pop_front();
        emg_ = emg::normalize(conditioner_.process(*raw), calibration_);
    } else {
        // An exhausted replay reads as a quiescent operator.
        if (!emg_exhausted_) log(k, event::kEmgExhausted);
        emg_exhausted_ = true;
        emg_ = {};
    }

    const auto& contact = plant_.contact();
    const std::optional<tactile::FingerSurfacePoint> point =
        contact.touching ? std::optional(contact.point) : std::nullopt;
    frame_ = front_end_.sample(k, plant_.state().hand.grip_force, point);

    const bool was_grasped = grasp_.grasped();
    const bool grasped = grasp_.update(frame_.pressure);
    if (grasped && !was_grasped) {
        if (!first_grasp_) first_grasp_ = k;
        log(k, event::kGraspDetected, {{"p", frame_.pressure.p}});
    } else if (!grasped && was_grasped) {
        log(k, event::kGraspReleased, {{"p", frame_.pressure.p}});
    }

    control_ = control::tick(emg_, {frame_.pressure, frame_.slow, frame_.contact}, reflex_, config_.gains);
    reflex_ = control_.state;
    if (control_.fast_slip && !prev_fast_) {
        ++fast_slips_;
        log(k, event::kFastSlip, {{"dp_dt", frame_.pressure.dp_dt}});
    }
    if (control_.slow_slip && !prev_slow_) {
        log(k, event::kSlowSlip, {{"delta", frame_.slow.delta}});
    }
    prev_fast_ = control_.fast_slip;
    prev_slow_ = control_.slow_slip;

    drive_ = renderer_.step(frame_.contact, grasped, k);
    track_contact(k, frame_.contact.touching(), frame_.contact.side);

    const Vec3 arm_vel = clamp_speed(in.arm_vel, config_.hand.arm_speed_limit);
    const double force_before = plant_.state().hand.grip_force;
    const auto& result = plant_.step(control_.command.voltage, arm_vel);
    const auto& ev = result.events;
    const auto& obj = result.state.object;
    if (ev.grip_formed) log(k, event::kGripFormed, {{"arc_fraction", result.state.grip.arc_fraction}});
    if (ev.released) log(k, event::kReleased);
    if (ev.ejected) log(k, event::kEjected, {{"grip_force", force_before}});
    if (ev.lost) log(k, event::kLost);
    if (ev.landed) log(k, event::kLanded, {{"status", plant::to_string(obj.status)}});

    const bool ok = check_finite(k);
    if (ok) check_milestones(k);

    TraceRow row;
    row.tick = k;
    row.u_c = control_.command.u_c;
    row.u_o = control_.command.u_o;
    row.voltage = control_.command.voltage;
    row.aperture = result.state.hand.aperture;
    row.p = frame_.pressure.p;
    row.side = frame_.contact.side;
    row.x = frame_.contact.x;
    row.tactor_current = drive_.current;
    row.carrier_f = drive_.carrier_f;
    row.d = plant::displacement_from_end_bin(obj, plant_.scene());
    row.h = plant::height_above_plate(obj, plant_.scene());
    row.status = obj.status;
    record_.trace.push_back(row);

    tick_ = k + 1;
    if (!ok || milestones_.placed) {
        finished_ = true;
    } else if (tick_ >= limit_ticks_) {
        log(k, event::kTimeout);
        finished_ = true;
    }
    if (finished_) finalize();
    return record_.trace.back();
}

void TrialRunner::abort(const std::string& reason) {
    if (finished_) return;
    record_.aborted = true;
    record_.abort_reason = reason;
    log(tick_, event::kAborted, {{"reason", reason}});
    finished_ = true;
    finalize();
}

void TrialRunner::recalibrate() {
    ++recalibrations_;
    calibration_ = protocol_calibration(config_, derive_seed(setup_.seed, 100 + static_cast<std::uint32_t>(recalibrations_)));
    conditioner_.reset();
    log(tick_, event::kRecalibrated, {{"calibration", calibration_json(calibration_)}});
}

void TrialRunner::finalize() {
    if (closed_) return;
    closed_ = true;
    auto& m = record_.metrics;
    m.success = milestones_.placed.has_value() && !record_.aborted;
    m.elapsed_s = m.success ? ticks_to_seconds(*milestones_.placed + 1) : ticks_to_seconds(tick_);
    const double divisor = rate_divisor(m.success, m.elapsed_s, setup_.time_limit_s);
    m.score = score(milestones_);
    m.time_remaining = time_remaining(m.success, m.elapsed_s, setup_.time_limit_s);
    m.exploration_contact_rate = exploration_contact_rate(record_.events, divisor);
    m.fast_slip_rate = fast_slip_rate(record_.events, divisor);
    m.pre_grasp_contacts = pre_grasp_contacts_;
    m.fast_slips = fast_slips_;
    record_.milestones = milestones_;
    record_.final_status = plant_.state().object.status;

    json end = {{"success", m.success},
                {"aborted", record_.aborted},
                {"elapsed_s", m.elapsed_s},
                {"score", m.score},
                {"time_remaining", m.time_remaining},
                {"exploration_contact_rate", m.exploration_contact_rate},
                {"fast_slip_rate", m.fast_slip_rate},
                {"pre_grasp_contacts", m.pre_grasp_contacts},
                {"fast_slips", m.fast_slips},
                {"final_status", plant::to_string(record_.final_status)}};
    if (record_.aborted) end["abort_reason"] = record_.abort_reason;
    log(tick_, event::kTrialEnd, std::move(end));
}

TrialRecord TrialRunner::take_record() {
    if (!finished_) abort("closed before completion");
    return std::move(record_);
}

std::pair<SessionConfig, TrialSetup> prepare_trial(const Scenario& scenario, const SessionConfig& config,
                                                   std::uint64_t seed) {
    scenario.validate();
    SessionConfig cfg = config;
    if (!scenario.scene_overrides.empty()) apply_scene_overrides(cfg.scene, scenario.scene_overrides, scenario.id);
    cfg.validate();
    if (scenario.max_arm_speed() > cfg.hand.arm_speed_limit + 1e-9) {
        throw ParseError(fmt::format("{}: arm path reaches {:.3f} m/s, above the {:.3f} m/s limit", scenario.id,
                                     scenario.max_arm_speed(), cfg.hand.arm_speed_limit));
    }

    TrialSetup setup;
    setup.trial_id = scenario.id;
    setup.seed = seed;
    setup.time_limit_s = scenario.time_limit_s;
    setup.arm_start = scenario.arm_start;
    setup.perturbations = scenario.perturbations;
    if (scenario.emg_trace) setup.emg_trace = emg::load_trace_csv(*scenario.emg_trace);
    if (scenario.emg_calibration) setup.calibration = emg::load_calibration(*scenario.emg_calibration);
    return {cfg, setup};
}

TrialRecord run_trial(const Scenario& scenario, const SessionConfig& config, std::uint64_t seed) {
    auto [cfg, setup] = prepare_trial(scenario, config, seed);
    std::vector<Tick> rezero_ticks;
    for (double t : scenario.rezero_times) rezero_ticks.push_back(seconds_to_ticks(t));
    std::sort(rezero_ticks.begin(), rezero_ticks.end());

    TrialRunner runner(std::move(cfg), std::move(setup));
    auto next_rezero = rezero_ticks.begin();
    while (!runner.finished()) {
        const Tick k = runner.now();
        TickInputs in;
        in.intent = scenario.intent_at(k);
        in.arm_vel = scenario.arm_velocity(k);
        while (next_rezero != rezero_ticks.end() && *next_rezero < k) ++next_rezero;
        in.rezero = next_rezero != rezero_ticks.end() && *next_rezero == k;
        runner.step(in);
    }
    return runner.take_record();
}

SessionSummary summarize(std::span<const TrialRecord> records) {
    if (records.empty()) throw std::invalid_argument("cannot summarize an empty set of trials");
    SessionSummary s;
    for (const auto& r : records) {
        s.trials.push_back(r.metrics);
        s.trial_ids.push_back(r.trial_id);
    }
    const std::array<std::pair<const char*, double TrialMetrics::*>, 4> metrics{{
        {"score", &TrialMetrics::score},
        {"time_remaining", &TrialMetrics::time_remaining},
        {"exploration_contact_rate", &TrialMetrics::exploration_contact_rate},
        {"fast_slip_rate", &TrialMetrics::fast_slip_rate},
    }};
    for (const auto& [name, field] : metrics) {
        MetricStats st;
        st.name = name;
        st.n = s.trials.size();
        double sum = 0.0;
        for (const auto& t : s.trials) sum += t.*field;
        st.mean = sum / static_cast<double>(st.n);
        st.variance_defined = st.n > 1;
        if (st.variance_defined) {
            double ss = 0.0;
            for (const auto& t : s.trials) ss += (t.*field - st.mean) * (t.*field - st.mean);
            st.variance = ss / static_cast<double>(st.n - 1);
        }
        s.stats.push_back(st);
    }
    return s;
}

std::string format_trace_header() {
    return "tick,u_c,u_o,voltage,aperture,p,side,x,tactor_current,carrier_f,D,H,status";
}

std::string format_trace_row(const TraceRow& r) {
    const std::string x = r.side == tactile::Side::none ? std::string() : fmt::format("{:.6f}", r.x);
    return fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{:.6f},{:.3f},{:.6f},{:.6f},{}", r.tick, r.u_c, r.u_o,
                       r.voltage, r.aperture, r.p, tactile::to_string(r.side), x, r.tactor_current, r.carrier_f, r.d,
                       r.h, plant::to_string(r.status));
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << format_trace_header() << '\n';
    for (const auto& r : trace) out << format_trace_row(r) << '\n';
}

json event_to_json(const Event& e) {
    json j = {{"tick", e.tick}, {"t", ticks_to_seconds(e.tick)}, {"type", e.type}};
    for (const auto& [k, v] : e.data.items()) j[k] = v;
    return j;
}

Event event_from_json(const json& j) {
    if (!j.is_object() || !j.contains("tick") || !j.contains("type") || !j["tick"].is_number_integer() ||
        !j["type"].is_string()) {
        throw TraceIntegrityError("event record lacks an integer 'tick' and string 'type'");
    }
    Event e;
    e.tick = j["tick"].get<Tick>();
    e.type = j["type"].get<std::string>();
    for (const auto& [k, v] : j.items()) {
        if (k != "tick" && k != "t" && k != "type") e.data[k] = v;
    }
    return e;
}

void write_events_jsonl(const std::filesystem::path& path, std::span<const Event> events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

std::vector<Event> read_events_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TraceIntegrityError(fmt::format("{}: cannot open event log", path.string()));
    std::vector<Event> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(event_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw TraceIntegrityError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    return out;
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TraceIntegrityError(fmt::format("{}: cannot open trace", path.string()));
    std::string line;
    if (!std::getline(in, line) || line != format_trace_header()) {
        throw TraceIntegrityError(fmt::format("{}:1: unexpected trace header", path.string()));
    }
    std::vector<TraceRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto bad = [&](const std::string& what) {
            return TraceIntegrityError(fmt::format("{}:{}: {}", path.string(), line_no, what));
        };
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 13) throw bad(fmt::format("expected 13 columns, found {}", cells.size()));
        auto num = [&](const std::string& s) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                throw bad(fmt::format("'{}' is not a number", s));
            }
            if (used != s.size() || !std::isfinite(v)) throw bad(fmt::format("'{}' is not a finite number", s));
            return v;
        };
        TraceRow r;
        const double tick = num(cells[0]);
        r.tick = static_cast<Tick>(tick);
        if (static_cast<double>(r.tick) != tick) throw bad("tick is not an integer");
        if (!rows.empty() && r.tick != rows.back().tick + 1) throw bad("ticks are not consecutive");
        r.u_c = num(cells[1]);
        r.u_o = num(cells[2]);
        r.voltage = num(cells[3]);
        r.aperture = num(cells[4]);
        r.p = num(cells[5]);
        try {
            r.side = tactile::side_from_string(cells[6]);
        } catch (const std::exception&) {
            throw bad(fmt::format("unknown side '{}'", cells[6]));
        }
        if (r.side == tactile::Side::none) {
            if (!cells[7].empty()) throw bad("x given without contact");
        } else {
            r.x = num(cells[7]);
        }
        r.tactor_current = num(cells[8]);
        r.carrier_f = num(cells[9]);
        r.d = num(cells[10]);
        r.h = num(cells[11]);
        static const std::array<plant::ObjectStatus, 7> statuses{
            plant::ObjectStatus::in_start_bin, plant::ObjectStatus::held,        plant::ObjectStatus::slipping,
            plant::ObjectStatus::free_fall,    plant::ObjectStatus::settled_out, plant::ObjectStatus::in_end_bin,
            plant::ObjectStatus::ejected};
        const auto it = std::find_if(statuses.begin(), statuses.end(),
                                     [&](plant::ObjectStatus s) { return plant::to_string(s) == cells[12]; });
        if (it == statuses.end()) throw bad(fmt::format("unknown status '{}'", cells[12]));
        r.status = *it;
        rows.push_back(r);
    }
    return rows;
}

void write_session_summary(const std::filesystem::path& path, std::span<const TrialRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << "trial_id,condition,seed,success,aborted,score,time_remaining,exploration_contact_rate,fast_slip_rate,"
           "elapsed_s,final_status\n";
    for (const auto& r : records) {
        const auto& m = r.metrics;
        out << fmt::format("{},{},{},{},{},{:.6f},{:.3f},{:.6f},{:.6f},{:.3f},{}\n", r.trial_id, to_string(r.condition),
                           r.seed, m.success ? 1 : 0, r.aborted ? 1 : 0, m.score, m.time_remaining,
                           m.exploration_contact_rate, m.fast_slip_rate, m.elapsed_s, plant::to_string(r.final_status));
    }
}

void write_session_stats(const std::filesystem::path& path, const SessionSummary& summary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << "metric,n,mean,variance,variance_defined\n";
    for (const auto& s : summary.stats) {
        out << fmt::format("{},{},{:.6f},{:.6f},{}\n", s.name, s.n, s.mean, s.variance, s.variance_defined ? 1 : 0);
    }
}

BatchResult run_batch(std::span<const Scenario> scenarios, const SessionConfig& config, std::uint64_t seed,
                      const std::filesystem::path& out_dir, int jobs) {
    std::set<std::string> ids;
    for (const auto& s : scenarios) {
        if (!ids.insert(s.id).second) throw std::invalid_argument(fmt::format("duplicate scenario id '{}'", s.id));
    }
    std::filesystem::create_directories(out_dir);

    BatchResult result;
    result.records.resize(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            try {
                auto rec = run_trial(scenarios[i], config, seed + i);
                write_trace_csv(out_dir / fmt::format("trial_{}.csv", rec.trial_id), rec.trace);
                write_events_jsonl(out_dir / fmt::format("trial_{}.events.jsonl", rec.trial_id), rec.events);
                rec.trace.clear();
                rec.trace.shrink_to_fit();
                result.records[i] = std::move(rec);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n_workers = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, scenarios.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    for (const auto& r : result.records) result.any_aborted = result.any_aborted || r.aborted;
    write_session_summary(out_dir / "session_summary.csv", result.records);
    write_session_stats(out_dir / "session_stats.csv", summarize(result.records));
    return result;
}

}  // namespace prosim::trials
