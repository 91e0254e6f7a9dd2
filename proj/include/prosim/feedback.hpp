#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "prosim/tactile.hpp"
#include "prosim/units.hpp"

namespace prosim::feedback {

inline constexpr double kPeakCurrent = 0.5;      // A
inline constexpr double kBaseCarrierHz = 250.0;
inline constexpr double kGraspCarrierHz = 150.0;
inline constexpr double kSweepSeconds = 2.0;
inline constexpr double kPalmarEnvelopeHz = 4.75;

struct TactorDrive {
    double current = 0.0;  // A
    double carrier_f = kBaseCarrierHz;
    bool envelope_active = false;
    double amplitude_scale = 0.0;
    tactile::Side side = tactile::Side::none;
};

struct SweepState {
    std::optional<Tick> grasp_onset_tick;
    bool active = false;
};

struct FeedbackState {
    SweepState sweep;
    double carrier_phase = 0.0;  // cycles, wrapped to [0, 1)
    double carrier_f = kBaseCarrierHz;
    std::optional<Tick> last_tick;
};

/// Carrier frequency for a palmar contact given the sweep state.
double sweep_frequency(const SweepState& sweep, Tick now);

/// Renders one tactor sample at session time `t` (seconds, on the 1 kHz
/// grid). The carrier phase is integrated tick to tick so the output stays
/// continuous while the grasp sweep changes frequency.
std::pair<TactorDrive, FeedbackState> render(const tactile::ContactReading& contact, bool grasped,
                                             const FeedbackState& state, double t);

/// Holds the render state for a session; disabled renderers emit silence.
class TactorRenderer {
public:
    explicit TactorRenderer(bool enabled = true) : enabled_(enabled) {}

    TactorDrive step(const tactile::ContactReading& contact, bool grasped, Tick tick);
    const FeedbackState& state() const { return state_; }
    bool enabled() const { return enabled_; }
    void set_enabled(bool enabled) { enabled_ = enabled; }

private:
    bool enabled_;
    FeedbackState state_;
};

class InsufficientDataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SpectralPeaks {
    std::optional<double> carrier_hz;
    std::optional<double> modulation_hz;
};

/// Dominant carrier and amplitude-modulation frequency of a tactor current
/// recording sampled at 1 kHz. Requires at least 2 s of samples.
SpectralPeaks spectral_probe(std::span<const double> current);
SpectralPeaks spectral_probe(std::span<const TactorDrive> drives);

}  // namespace prosim::feedback
