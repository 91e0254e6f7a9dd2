#include "prosim/emg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

namespace prosim::emg {

namespace {

struct ChannelMeans {
    double flexor = 0.0;
    double extensor = 0.0;
};

ChannelMeans rectified_means(std::span<const RawEmgSample> window) {
    ChannelMeans m;
    for (const auto& s : window) {
        m.flexor += std::abs(s.flexor_v);
        m.extensor += std::abs(s.extensor_v);
    }
    const auto n = static_cast<double>(window.size());
    m.flexor /= n;
    m.extensor /= n;
    return m;
}

bool overlaps(std::span<const RawEmgSample> a, std::span<const RawEmgSample> b) {
    const auto [a_lo, a_hi] = std::minmax_element(a.begin(), a.end(), [](auto& l, auto& r) { return l.tick < r.tick; });
    const auto [b_lo, b_hi] = std::minmax_element(b.begin(), b.end(), [](auto& l, auto& r) { return l.tick < r.tick; });
    return a_lo->tick <= b_hi->tick && b_lo->tick <= a_hi->tick;
}

constexpr int kPartials = 8;

}  // namespace

bool EmgCalibration::valid() const {
    const auto finite = std::isfinite(flexor_offset) && std::isfinite(extensor_offset) && std::isfinite(flexor_upper) &&
                        std::isfinite(flexor_lower) && std::isfinite(extensor_upper) && std::isfinite(extensor_lower);
    return finite && flexor_upper > flexor_lower && extensor_upper > extensor_lower && flexor_lower >= 0.0 &&
           extensor_lower >= 0.0;
}

EmgCalibration calibrate(std::span<const RawEmgSample> baseline_window,
                         std::span<const RawEmgSample> flexion_mvc_window,
                         std::span<const RawEmgSample> extension_mvc_window) {
    if (baseline_window.empty() || flexion_mvc_window.empty() || extension_mvc_window.empty()) {
        throw CalibrationInputError("calibration window is empty");
    }
    if (overlaps(baseline_window, flexion_mvc_window) || overlaps(baseline_window, extension_mvc_window) ||
        overlaps(flexion_mvc_window, extension_mvc_window)) {
        throw CalibrationInputError("calibration windows overlap in time");
    }

    const auto base = rectified_means(baseline_window);
    const auto flex = rectified_means(flexion_mvc_window);
    const auto ext = rectified_means(extension_mvc_window);

    EmgCalibration cal;
    cal.flexor_offset = base.flexor;
    cal.extensor_offset = base.extensor;

    const double flexion_mvc = flex.flexor - cal.flexor_offset;
    const double flexor_crosstalk = ext.flexor - cal.flexor_offset;
    cal.flexor_upper = 0.5 * flexion_mvc;
    cal.flexor_lower = std::max(flexor_crosstalk, 0.05 * flexion_mvc);

    const double extension_mvc = ext.extensor - cal.extensor_offset;
    const double extensor_crosstalk = flex.extensor - cal.extensor_offset;
    cal.extensor_upper = 0.5 * extension_mvc;
    cal.extensor_lower = std::max(extensor_crosstalk, 0.05 * extension_mvc);

    if (!(cal.flexor_upper > cal.flexor_lower)) {
        throw DegenerateCalibrationError(
            fmt::format("flexor upper threshold {:.6g} V does not exceed lower {:.6g} V", cal.flexor_upper, cal.flexor_lower));
    }
    if (!(cal.extensor_upper > cal.extensor_lower)) {
        throw DegenerateCalibrationError(fmt::format("extensor upper threshold {:.6g} V does not exceed lower {:.6g} V",
                                                     cal.extensor_upper, cal.extensor_lower));
    }
    return cal;
}

NormalizedEmgPair normalize(const RawEmgSample& conditioned, const EmgCalibration& cal) {
    auto map = [](double v, double offset, double lower, double upper) {
        const double s = (v - offset - lower) / (upper - lower);
        return std::clamp(s, 0.0, 1.0);
    };
    return {map(conditioned.flexor_v, cal.flexor_offset, cal.flexor_lower, cal.flexor_upper),
            map(conditioned.extensor_v, cal.extensor_offset, cal.extensor_lower, cal.extensor_upper)};
}

std::optional<EmgCalibration> rezero(const EmgCalibration& cal, std::span<const RawEmgSample> quiescent_window) {
    if (static_cast<Tick>(quiescent_window.size()) < kMinRezeroTicks) {
        return std::nullopt;
    }
    const auto means = rectified_means(quiescent_window);
    EmgCalibration out = cal;
    out.flexor_offset = means.flexor;
    out.extensor_offset = means.extensor;
    return out;
}

RawEmgSample EmgConditioner::process(const RawEmgSample& raw) {
    RawEmgSample rect{std::abs(raw.flexor_v), std::abs(raw.extensor_v), raw.tick};
    window_.push_back(rect);
    flexor_sum_ += rect.flexor_v;
    extensor_sum_ += rect.extensor_v;
    if (window_.size() > kWindow) {
        flexor_sum_ -= window_.front().flexor_v;
        extensor_sum_ -= window_.front().extensor_v;
        window_.pop_front();
    }
    const auto n = static_cast<double>(window_.size());
    return {flexor_sum_ / n, extensor_sum_ / n, raw.tick};
}

void EmgConditioner::reset() {
    window_.clear();
    flexor_sum_ = 0.0;
    extensor_sum_ = 0.0;
}

EmgSource::EmgSource(EmgSourceSpec spec) : spec_(spec), rng_(spec.seed) {
    if (spec_.drift_rate < 0.0) {
        throw std::invalid_argument("drift_rate must be non-negative");
    }
    std::uniform_real_distribution<double> freq(spec_.noise_low_hz, spec_.noise_high_hz);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (auto& channel : partials_) {
        channel.reserve(kPartials);
        for (int i = 0; i < kPartials; ++i) {
            const double f = freq(rng_);
            channel.push_back({f, phase(rng_)});
        }
    }
}

EmgSource::EmgSource(EmgSourceSpec spec, std::vector<RawEmgSample> trace) : EmgSource(spec) {
    spec_.mode = SourceMode::replay;
    trace_ = std::move(trace);
}

double EmgSource::band_noise(int channel, double t) const {
    // Unit-RMS sum of sinusoids inside the configured band.
    const double amp = std::sqrt(2.0 / kPartials);
    double h = 0.0;
    for (const auto& p : partials_[static_cast<std::size_t>(channel)]) {
        h += amp * std::sin(2.0 * std::numbers::pi * p.freq_hz * t + p.phase);
    }
    return h;
}

std::optional<RawEmgSample> EmgSource::next_sample(const std::optional<Intent>& operator_intent) {
    if (spec_.mode == SourceMode::replay) {
        if (trace_pos_ >= trace_.size()) {
            return std::nullopt;
        }
        ++tick_;
        return trace_[trace_pos_++];
    }

    const double t = ticks_to_seconds(tick_);
    if (spec_.drift_walk > 0.0 && tick_ > 0) {
        walk_ += spec_.drift_walk * std::sqrt(kDt) * walk_dist_(rng_);
    }
    drift_ = spec_.drift_rate * t + walk_;

    const Intent intent = operator_intent.value_or(Intent{});
    const double flex = std::clamp(intent.flexion, 0.0, 1.0);
    const double ext = std::clamp(intent.extension, 0.0, 1.0);
    const double flexor_env = flex * spec_.flexor_mvc_v + spec_.crosstalk * ext * spec_.extensor_mvc_v;
    const double extensor_env = ext * spec_.extensor_mvc_v + spec_.crosstalk * flex * spec_.flexor_mvc_v;

    // sqrt(pi/2) rescales |h| to unit mean for Gaussian-like h.
    constexpr double kRectGain = 1.2533141373155003;
    const double eta = std::clamp(spec_.noise_amplitude, 0.0, 1.0);
    auto shape = [&](int channel) {
        if (eta == 0.0) {
            return 1.0;
        }
        return (1.0 - eta) + eta * kRectGain * std::abs(band_noise(channel, t));
    };

    RawEmgSample s;
    s.tick = tick_;
    s.flexor_v = spec_.flexor_baseline_v + drift_ + flexor_env * shape(0);
    s.extensor_v = spec_.extensor_baseline_v + drift_ + extensor_env * shape(1);
    ++tick_;
    return s;
}

EmgCalibration run_calibration_protocol(EmgSource& source) {
    auto record = [&source](Intent intent) {
        std::vector<RawEmgSample> window;
        window.reserve(static_cast<std::size_t>(kProtocolWindowTicks));
        for (Tick i = 0; i < kProtocolWindowTicks; ++i) {
            window.push_back(*source.next_sample(intent));
        }
        return window;
    };
    const auto baseline = record({0.0, 0.0});
    const auto flexion = record({1.0, 0.0});
    const auto extension = record({0.0, 1.0});
    return calibrate(baseline, flexion, extension);
}

std::vector<RawEmgSample> load_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open EMG trace '{}'", path.string()));
    }
    std::string line;
    if (!std::getline(in, line) || line != "tick,flexor_v,extensor_v") {
        throw std::runtime_error(fmt::format("{}:1: expected header 'tick,flexor_v,extensor_v'", path.string()));
    }
    std::vector<RawEmgSample> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        RawEmgSample s;
        char c1 = 0;
        char c2 = 0;
        if (!(row >> s.tick >> c1 >> s.flexor_v >> c2 >> s.extensor_v) || c1 != ',' || c2 != ',' ||
            !std::isfinite(s.flexor_v) || !std::isfinite(s.extensor_v)) {
            throw std::runtime_error(fmt::format("{}:{}: malformed trace row", path.string(), line_no));
        }
        if (!out.empty() && s.tick <= out.back().tick) {
            throw std::runtime_error(fmt::format("{}:{}: tick not strictly increasing", path.string(), line_no));
        }
        out.push_back(s);
    }
    return out;
}

void save_trace_csv(const std::filesystem::path& path, std::span<const RawEmgSample> samples) {
    std::ofstream out(path);
    out << "tick,flexor_v,extensor_v\n";
    for (const auto& s : samples) {
        out << fmt::format("{},{:.9g},{:.9g}\n", s.tick, s.flexor_v, s.extensor_v);
    }
}

void save_calibration(const std::filesystem::path& path, const EmgCalibration& cal) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write calibration '{}'", path.string()));
    }
    out << fmt::format("flexor_offset={:.17g}\n", cal.flexor_offset);
    out << fmt::format("extensor_offset={:.17g}\n", cal.extensor_offset);
    out << fmt::format("flexor_upper={:.17g}\n", cal.flexor_upper);
    out << fmt::format("flexor_lower={:.17g}\n", cal.flexor_lower);
    out << fmt::format("extensor_upper={:.17g}\n", cal.extensor_upper);
    out << fmt::format("extensor_lower={:.17g}\n", cal.extensor_lower);
}

EmgCalibration load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open calibration '{}'", path.string()));
    }
    std::map<std::string, double> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(fmt::format("{}:{}: expected key=value", path.string(), line_no));
        }
        try {
            kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
        } catch (const std::exception&) {
            throw std::runtime_error(fmt::format("{}:{}: value is not a number", path.string(), line_no));
        }
    }
    auto get = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw std::runtime_error(fmt::format("{}: missing key '{}'", path.string(), key));
        }
        return it->second;
    };
    EmgCalibration cal;
    cal.flexor_offset = get("flexor_offset");
    cal.extensor_offset = get("extensor_offset");
    cal.flexor_upper = get("flexor_upper");
    cal.flexor_lower = get("flexor_lower");
    cal.extensor_upper = get("extensor_upper");
    cal.extensor_lower = get("extensor_lower");
    if (!cal.valid()) {
        throw DegenerateCalibrationError(fmt::format("{}: calibration thresholds are inconsistent", path.string()));
    }
    return cal;
}

std::string to_string(SourceMode mode) {
    switch (mode) {
        case SourceMode::synthetic: return "synthetic";
        case SourceMode::replay: return "replay";
        case SourceMode::live_session: return "live-session";
    }
    return "synthetic";
}

SourceMode source_mode_from_string(const std::string& s) {
    if (s == "synthetic") return SourceMode::synthetic;
    if (s == "replay") return SourceMode::replay;
    if (s == "live-session" || s == "live_session") return SourceMode::live_session;
    throw std::invalid_argument(fmt::format("unknown EMG source mode '{}'", s));
}

}  // namespace prosim::emg
