#include "prosim/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

namespace prosim::feedback {

using tactile::Side;

double sweep_frequency(const SweepState& sweep, Tick now) {
    if (!sweep.active || !sweep.grasp_onset_tick) {
        return kBaseCarrierHz;
    }
    const double elapsed = ticks_to_seconds(now - *sweep.grasp_onset_tick);
    const double f = kBaseCarrierHz - (kBaseCarrierHz - kGraspCarrierHz) * elapsed / kSweepSeconds;
    return std::clamp(f, kGraspCarrierHz, kBaseCarrierHz);
}

std::pair<TactorDrive, FeedbackState> render(const tactile::ContactReading& contact, bool grasped,
                                             const FeedbackState& state, double t) {
    const Tick now = seconds_to_ticks(t);
    FeedbackState next = state;

    if (grasped && !next.sweep.active) {
        next.sweep.active = true;
        next.sweep.grasp_onset_tick = now;
    } else if (!grasped && next.sweep.active) {
        next.sweep.active = false;
        next.sweep.grasp_onset_tick.reset();
    }

    const double palmar_f = sweep_frequency(next.sweep, now);
    const double carrier_f = contact.side == Side::dorsal ? kBaseCarrierHz : palmar_f;

    if (!state.last_tick) {
        next.carrier_phase = std::fmod(carrier_f * t, 1.0);
    } else {
        // Advance by the frequency that was in force over the last interval.
        const double dt = ticks_to_seconds(now - *state.last_tick);
        next.carrier_phase = std::fmod(state.carrier_phase + state.carrier_f * dt, 1.0);
    }
    next.last_tick = now;
    next.carrier_f = carrier_f;

    TactorDrive drive;
    drive.side = contact.side;
    drive.carrier_f = carrier_f;
    if (contact.side == Side::none) {
        return {drive, next};
    }

    drive.amplitude_scale = std::sqrt(std::max(0.0, 1.0 - std::clamp(contact.x, 0.0, 1.0)));
    const double carrier = std::sin(2.0 * std::numbers::pi * next.carrier_phase);
    double current = kPeakCurrent * drive.amplitude_scale * carrier;
    if (contact.side == Side::palmar) {
        drive.envelope_active = true;
        current *= std::abs(std::sin(2.0 * std::numbers::pi * kPalmarEnvelopeHz * t));
    }
    drive.current = std::clamp(current, -kPeakCurrent, kPeakCurrent);
    return {drive, next};
}

TactorDrive TactorRenderer::step(const tactile::ContactReading& contact, bool grasped, Tick tick) {
    auto [drive, next] = render(contact, grasped, state_, ticks_to_seconds(tick));
    state_ = next;
    if (!enabled_) {
        drive.current = 0.0;
        drive.amplitude_scale = 0.0;
        drive.envelope_active = false;
    }
    return drive;
}

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// One-sided amplitude spectrum of a Hann-windowed real signal; bin k sits at
// k * fs / n. Bin 0 holds the (windowed) mean.
std::vector<double> amplitude_spectrum(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.size());
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
        in[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] * w;
        wsum += w;
    }
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> amp(out.size());
    amp[0] = std::abs(out[0]) / wsum;
    for (std::size_t k = 1; k < out.size(); ++k) {
        amp[k] = 2.0 * std::abs(out[k]) / wsum;
    }
    return amp;
}

struct Peak {
    double hz;
    double amplitude;
};

Peak find_peak(const std::vector<double>& amp, double bin_hz, double lo_hz, double hi_hz) {
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::ceil(lo_hz / bin_hz)));
    const auto hi = std::min(amp.size() - 1, static_cast<std::size_t>(std::floor(hi_hz / bin_hz)));
    std::size_t best = lo;
    for (std::size_t k = lo; k <= hi; ++k) {
        if (amp[k] > amp[best]) best = k;
    }
    double offset = 0.0;
    if (best > 0 && best + 1 < amp.size()) {
        // Parabolic interpolation across the neighbouring bins.
        const double a = amp[best - 1];
        const double b = amp[best];
        const double c = amp[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    return {(static_cast<double>(best) + offset) * bin_hz, amp[best]};
}

constexpr double kSilenceAmplitude = 1e-6;          // A
constexpr double kModulationRelativeLevel = 0.05;   // of the rectified mean

}  // namespace

SpectralPeaks spectral_probe(std::span<const double> current) {
    if (current.size() < static_cast<std::size_t>(2 * kTickRateHz)) {
        throw InsufficientDataError("spectral probe needs at least 2 s of 1 kHz samples");
    }
    const double bin_hz = static_cast<double>(kTickRateHz) / static_cast<double>(current.size());
    SpectralPeaks out;

    const auto carrier_amp = amplitude_spectrum(current);
    const auto carrier = find_peak(carrier_amp, bin_hz, 20.0, kTickRateHz / 2.0);
    if (carrier.amplitude > kSilenceAmplitude) {
        out.carrier_hz = carrier.hz;
    }

    std::vector<double> rectified(current.size());
    std::transform(current.begin(), current.end(), rectified.begin(), [](double v) { return std::abs(v); });
    const double mean = std::accumulate(rectified.begin(), rectified.end(), 0.0) / static_cast<double>(rectified.size());
    // Without the mean, the window would leak DC into the lowest envelope bins.
    for (double& v : rectified) v -= mean;
    const auto env_amp = amplitude_spectrum(rectified);
    if (mean > kSilenceAmplitude) {
        const auto env = find_peak(env_amp, bin_hz, 0.5, 50.0);
        if (env.amplitude > kModulationRelativeLevel * mean) {
            out.modulation_hz = env.hz;
        }
    }
    return out;
}

SpectralPeaks spectral_probe(std::span<const TactorDrive> drives) {
    std::vector<double> current(drives.size());
    std::transform(drives.begin(), drives.end(), current.begin(), [](const TactorDrive& d) { return d.current; });
    return spectral_probe(current);
}

}  // namespace prosim::feedback
