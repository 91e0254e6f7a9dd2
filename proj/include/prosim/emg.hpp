#pragma once

#include <deque>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosim/units.hpp"

namespace prosim::emg {

struct RawEmgSample {
    double flexor_v = 0.0;
    double extensor_v = 0.0;
    Tick tick = 0;
};

/// Offsets and the two thresholds per channel, all in volts. Thresholds are
/// expressed after offset removal.
struct EmgCalibration {
    double flexor_offset = 0.0;
    double extensor_offset = 0.0;
    double flexor_upper = 1.0;
    double flexor_lower = 0.0;
    double extensor_upper = 1.0;
    double extensor_lower = 0.0;

    bool valid() const;
    friend bool operator==(const EmgCalibration&, const EmgCalibration&) = default;
};

struct NormalizedEmgPair {
    double s_f = 0.0;
    double s_x = 0.0;
};

/// Operator drive levels, each in [0, 1].
struct Intent {
    double flexion = 0.0;
    double extension = 0.0;
};

enum class SourceMode { synthetic, replay, live_session };

struct EmgSourceSpec {
    SourceMode mode = SourceMode::synthetic;
    double drift_rate = 0.0005;  // V/s, linear offset ramp
    double drift_walk = 0.0;     // V/sqrt(s), random-walk intensity
    double noise_low_hz = 20.0;
    double noise_high_hz = 450.0;
    // Fraction of the envelope carried by rectified band-limited noise; 0 gives
    // a noiseless envelope that equals intent * mvc exactly.
    double noise_amplitude = 0.5;
    double flexor_baseline_v = 0.10;
    double extensor_baseline_v = 0.08;
    double flexor_mvc_v = 1.0;  // offset-removed envelope at full intent
    double extensor_mvc_v = 0.8;
    double crosstalk = 0.1;  // share of the antagonist's envelope seen on a channel
    std::uint64_t seed = 1;
};

class CalibrationInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DegenerateCalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Windows must be non-empty and must not overlap in time.
EmgCalibration calibrate(std::span<const RawEmgSample> baseline_window,
                         std::span<const RawEmgSample> flexion_mvc_window,
                         std::span<const RawEmgSample> extension_mvc_window);

NormalizedEmgPair normalize(const RawEmgSample& conditioned, const EmgCalibration& cal);

inline constexpr Tick kMinRezeroTicks = 500;

/// Replaces both offsets with the window means. Returns nullopt (leaving the
/// caller's calibration in force) when the window covers less than 500 ms.
std::optional<EmgCalibration> rezero(const EmgCalibration& cal,
                                     std::span<const RawEmgSample> quiescent_window);

/// Full-wave rectification followed by a 50 ms moving average.
class EmgConditioner {
public:
    static constexpr std::size_t kWindow = 50;

    RawEmgSample process(const RawEmgSample& raw);
    void reset();

private:
    std::deque<RawEmgSample> window_;
    double flexor_sum_ = 0.0;
    double extensor_sum_ = 0.0;
};

/// Surrogate sEMG acquisition. Synthetic and live modes generate a
/// band-limited rectified-noise envelope that tracks operator intent; replay
/// mode streams a recorded trace.
class EmgSource {
public:
    explicit EmgSource(EmgSourceSpec spec);
    EmgSource(EmgSourceSpec spec, std::vector<RawEmgSample> trace);

    /// Next sample, or nullopt once a replay trace is exhausted.
    std::optional<RawEmgSample> next_sample(const std::optional<Intent>& operator_intent = std::nullopt);

    const EmgSourceSpec& spec() const { return spec_; }
    Tick ticks_emitted() const { return tick_; }
    double current_drift() const { return drift_; }

private:
    double band_noise(int channel, double t) const;

    struct Partial {
        double freq_hz;
        double phase;
    };

    EmgSourceSpec spec_;
    std::vector<RawEmgSample> trace_;
    std::size_t trace_pos_ = 0;
    std::mt19937_64 rng_;
    std::normal_distribution<double> walk_dist_{0.0, 1.0};
    std::array<std::vector<Partial>, 2> partials_;
    Tick tick_ = 0;
    double walk_ = 0.0;
    double drift_ = 0.0;
};

/// Standard protocol durations: rest, flexion MVC, extension MVC.
inline constexpr Tick kProtocolWindowTicks = 5000;

/// Drives a synthetic source through rest / flexion MVC / extension MVC
/// windows and calibrates from them.
EmgCalibration run_calibration_protocol(EmgSource& source);

std::vector<RawEmgSample> load_trace_csv(const std::filesystem::path& path);
void save_trace_csv(const std::filesystem::path& path, std::span<const RawEmgSample> samples);

void save_calibration(const std::filesystem::path& path, const EmgCalibration& cal);
EmgCalibration load_calibration(const std::filesystem::path& path);

std::string to_string(SourceMode mode);
SourceMode source_mode_from_string(const std::string& s);

}  // namespace prosim::emg
