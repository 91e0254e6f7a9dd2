#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prosim/config.hpp"
#include "prosim/control.hpp"
#include "prosim/emg.hpp"
#include "prosim/feedback.hpp"
#include "prosim/plant.hpp"
#include "prosim/scenario.hpp"
#include "prosim/tactile.hpp"

namespace prosim::trials {

struct Event {
    Tick tick = 0;
    std::string type;
    nlohmann::json data = nlohmann::json::object();
};

namespace event {
inline constexpr const char* kTrialStart = "trial_start";
inline constexpr const char* kTrialEnd = "trial_end";
inline constexpr const char* kContactStart = "contact_start";
inline constexpr const char* kContactEnd = "contact_end";
inline constexpr const char* kGraspDetected = "grasp_detected";
inline constexpr const char* kGraspReleased = "grasp_released";
inline constexpr const char* kFastSlip = "fast_slip";
inline constexpr const char* kSlowSlip = "slow_slip";
inline constexpr const char* kGripFormed = "grip_formed";
inline constexpr const char* kReleased = "released";
inline constexpr const char* kEjected = "ejected";
inline constexpr const char* kLost = "lost";
inline constexpr const char* kLanded = "landed";
inline constexpr const char* kLifted = "lifted";
inline constexpr const char* kNearEndBin = "near_end_bin";
inline constexpr const char* kPlaced = "placed";
inline constexpr const char* kRezero = "rezero";
inline constexpr const char* kRezeroRejected = "rezero_rejected";
inline constexpr const char* kRecalibrated = "recalibrated";
inline constexpr const char* kPerturbation = "perturbation";
inline constexpr const char* kEmgExhausted = "emg_exhausted";
inline constexpr const char* kNumericFault = "numeric_fault";
inline constexpr const char* kAborted = "aborted";
inline constexpr const char* kTimeout = "timeout";
}  // namespace event

struct Milestones {
    std::optional<Tick> lifted;
    std::optional<Tick> near_end_bin;
    std::optional<Tick> placed;
};

/// 0, 1/3, 2/3 or 1. Milestones only count in order.
double score(const Milestones& m);
double score(std::span<const Event> events);

/// Success leaves at least 0.1 s; failure leaves none.
double time_remaining(bool success, double elapsed_s, double time_limit_s);
/// Trial time used to normalize rates: elapsed on success, the full limit otherwise.
double rate_divisor(bool success, double elapsed_s, double time_limit_s);

/// Debounced contact episodes that began before the first grasp, per second.
double exploration_contact_rate(std::span<const Event> events, double trial_time_s);
double fast_slip_rate(std::span<const Event> events, double trial_time_s);

struct TraceRow {
    Tick tick = 0;
    double u_c = 0.0;
    double u_o = 0.0;
    double voltage = 0.0;
    double aperture = 0.0;
    double p = 0.0;
    tactile::Side side = tactile::Side::none;
    double x = 0.0;
    double tactor_current = 0.0;
    double carrier_f = 0.0;
    double d = 0.0;  // horizontal distance to the end bin
    double h = 0.0;  // object base height
    plant::ObjectStatus status = plant::ObjectStatus::in_start_bin;
};

struct TrialMetrics {
    bool success = false;
    double elapsed_s = 0.0;
    double score = 0.0;
    double time_remaining = 0.0;
    double exploration_contact_rate = 0.0;
    double fast_slip_rate = 0.0;
    int pre_grasp_contacts = 0;
    int fast_slips = 0;
};

struct TrialRecord {
    std::string trial_id;
    Condition condition = Condition::tactile;
    std::uint64_t seed = 0;
    double time_limit_s = 60.0;
    TrialMetrics metrics;
    Milestones milestones;
    bool aborted = false;
    std::string abort_reason;
    plant::ObjectStatus final_status = plant::ObjectStatus::in_start_bin;
    std::vector<Event> events;
    std::vector<TraceRow> trace;
};

/// Everything a trial needs besides the per-tick operator inputs.
struct TrialSetup {
    std::string trial_id = "trial";
    std::uint64_t seed = 1;
    double time_limit_s = 60.0;
    Vec3 arm_start{0.0, -0.04, 0.25};
    std::vector<plant::Perturbation> perturbations;
    std::vector<emg::RawEmgSample> emg_trace;  // replay when non-empty
    std::optional<emg::EmgCalibration> calibration;
};

struct TickInputs {
    emg::Intent intent;
    Vec3 arm_vel;
    bool rezero = false;
};

/// Derives independent stream seeds from a trial seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream);

/// The per-tick pipeline: EMG -> tactile -> control -> feedback -> plant,
/// plus milestone, event and trace bookkeeping. Batch trials and the live
/// session both drive this.
class TrialRunner {
public:
    TrialRunner(SessionConfig config, TrialSetup setup);

    /// Advances one tick. Must not be called once finished().
    const TraceRow& step(const TickInputs& in);

    bool finished() const { return finished_; }
    /// Index of the next tick to run.
    Tick now() const { return tick_; }
    double elapsed_s() const { return ticks_to_seconds(tick_); }

    /// Ends the trial early; it counts as unsuccessful.
    void abort(const std::string& reason);
    /// Re-runs the EMG calibration protocol on a fresh synthetic source.
    void recalibrate();

    /// Closes the trial and returns the full record. Call once.
    TrialRecord take_record();

    const SessionConfig& config() const { return config_; }
    const plant::PlantState& plant_state() const { return plant_.state(); }
    const plant::SceneSpec& scene() const { return plant_.scene(); }
    const Milestones& milestones() const { return milestones_; }
    const feedback::TactorDrive& tactor() const { return drive_; }
    const control::TickResult& control() const { return control_; }
    const tactile::TactileFrontEnd::Frame& tactile_frame() const { return frame_; }
    const emg::EmgCalibration& calibration() const { return calibration_; }
    const emg::NormalizedEmgPair& emg() const { return emg_; }
    bool grasped() const { return grasp_.grasped(); }
    const std::vector<Event>& events() const { return record_.events; }

private:
    void log(Tick tick, const char* type, nlohmann::json data = nlohmann::json::object());
    void track_contact(Tick tick, bool touching, tactile::Side side);
    void check_milestones(Tick tick);
    bool check_finite(Tick tick);
    void finalize();

    SessionConfig config_;
    TrialSetup setup_;
    TrialRecord record_;
    emg::EmgSource emg_source_;
    emg::EmgConditioner conditioner_;
    emg::EmgCalibration calibration_;
    std::deque<emg::RawEmgSample> recent_raw_;
    emg::NormalizedEmgPair emg_;
    bool emg_exhausted_ = false;
    tactile::TactileFrontEnd front_end_;
    tactile::TactileFrontEnd::Frame frame_;
    tactile::GraspDetector grasp_;
    control::ReflexState reflex_;
    control::TickResult control_;
    feedback::TactorRenderer renderer_;
    feedback::TactorDrive drive_;
    plant::Plant plant_;
    plant::PerturbationSchedule perturbations_;
    Milestones milestones_;
    Tick tick_ = 0;
    Tick limit_ticks_ = 0;
    bool finished_ = false;
    bool closed_ = false;
    std::optional<Tick> first_grasp_;
    bool prev_fast_ = false;
    bool prev_slow_ = false;
    bool contact_on_ = false;
    Tick contact_run_ = 0;
    int pre_grasp_contacts_ = 0;
    int fast_slips_ = 0;
    int recalibrations_ = 0;
};

/// Builds the trial setup for a scenario: seeds, scene overrides, replay
/// inputs and perturbations.
std::pair<SessionConfig, TrialSetup> prepare_trial(const Scenario& scenario, const SessionConfig& config,
                                                   std::uint64_t seed);

TrialRecord run_trial(const Scenario& scenario, const SessionConfig& config, std::uint64_t seed);

struct MetricStats {
    std::string name;
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // sample variance; 0 when n == 1
    bool variance_defined = false;
};

struct SessionSummary {
    std::vector<TrialMetrics> trials;
    std::vector<std::string> trial_ids;
    std::vector<MetricStats> stats;  // score, time_remaining, exploration_contact_rate, fast_slip_rate
};

/// Throws std::invalid_argument for an empty set.
SessionSummary summarize(std::span<const TrialRecord> records);

std::string format_trace_header();
std::string format_trace_row(const TraceRow& row);
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);
void write_events_jsonl(const std::filesystem::path& path, std::span<const Event> events);
void write_session_summary(const std::filesystem::path& path, std::span<const TrialRecord> records);
void write_session_stats(const std::filesystem::path& path, const SessionSummary& summary);

nlohmann::json event_to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

class TraceIntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a trace CSV written by write_trace_csv. Malformed or truncated rows
/// raise TraceIntegrityError with the offending line.
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);
std::vector<Event> read_events_jsonl(const std::filesystem::path& path);

struct BatchResult {
    std::vector<TrialRecord> records;
    bool any_aborted = false;
};

/// Runs each scenario with seed + i, writing per-trial logs plus the session
/// summary into `out_dir`. Trials run on up to `jobs` worker threads.
BatchResult run_batch(std::span<const Scenario> scenarios, const SessionConfig& config, std::uint64_t seed,
                      const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace prosim::trials
