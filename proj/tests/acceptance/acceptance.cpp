// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "prosim/config.hpp"
#include "prosim/control.hpp"
#include "prosim/emg.hpp"
#include "prosim/feedback.hpp"
#include "prosim/scenario.hpp"
#include "prosim/tactile.hpp"
#include "prosim/trials.hpp"

using namespace prosim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool dropped(const trials::TrialRecord& r) {
    for (const auto& e : r.events) {
        if (e.type == trials::event::kLost || e.type == trials::event::kEjected) return true;
    }
    return false;
}

// --- 1 -----------------------------------------------------------------------

Outcome reflex_latency() {
    const auto t0 = Clock::now();
    const control::ControlGains g;
    tactile::PressureHistory hist;
    control::ReflexState st;
    const emg::NormalizedEmgPair s{0.3, 0.0};

    // Steady grip, then a pressure collapse of -6/s starting at tick 300.
    std::vector<double> p(600);
    for (int k = 0; k < 600; ++k) p[k] = k < 300 ? 0.25 : 0.25 - 6.0 * (k - 300) * kDt;

    std::optional<Tick> crossing;
    std::optional<Tick> first_max;
    for (Tick k = 0; k < 600; ++k) {
        hist.push(k, p[k]);
        // Independent crossing check: 10 ms two-point difference.
        if (!crossing && k >= tactile::kDerivativeWindowTicks) {
            const double d = (p[k] - p[k - tactile::kDerivativeWindowTicks]) / (tactile::kDerivativeWindowTicks * kDt);
            if (d <= g.q_fs) crossing = k;
        }
        const auto der = tactile::derivative(hist);
        control::TactileFrame frame;
        frame.pressure = {p[k], der.dp_dt, der.ready, k};
        frame.contact = {tactile::Side::palmar, 0.5};
        const auto r = control::tick(s, frame, st, g);
        st = r.state;
        if (!first_max && r.command.voltage == g.v_max) first_max = k;
    }
    Outcome o;
    o.pass = crossing && first_max && *crossing == *first_max && seconds_since(t0) < 1.0;
    o.detail = fmt::format("crossing tick {}, first max-voltage tick {}, {:.3f} s",
                           crossing ? std::to_string(*crossing) : "none",
                           first_max ? std::to_string(*first_max) : "none", seconds_since(t0));
    return o;
}

// --- 2 -----------------------------------------------------------------------

int count_pulse(const std::function<std::pair<bool, bool>(Tick)>& triggers, Tick horizon) {
    const control::ControlGains g;
    control::ReflexState st;
    const control::MotorCommand idle;
    int high = 0;
    for (Tick k = 0; k < horizon; ++k) {
        const auto [fast, slow] = triggers(k);
        const auto a = control::arbitrate(idle, st, fast, slow, g, k);
        st = a.state;
        if (a.command.voltage == g.v_max) ++high;
    }
    return high;
}

Outcome pulse_durations() {
    const auto t0 = Clock::now();
    const int fast = count_pulse([](Tick k) { return std::pair{k == 10, false}; }, 500);
    const int slow = count_pulse([](Tick k) { return std::pair{false, k == 10}; }, 500);
    // Second fast slip 40 ticks into the first pulse restarts the 60-tick count.
    const int retrigger = count_pulse([](Tick k) { return std::pair{k == 10 || k == 50, false}; }, 500);
    // A slow slip during a fast pulse neither extends nor restarts it.
    const int slow_during_fast = count_pulse([](Tick k) { return std::pair{k == 10, k == 40}; }, 500);
    Outcome o;
    o.pass = fast == 60 && slow == 30 && retrigger == 100 && slow_during_fast == 60 && seconds_since(t0) < 1.0;
    o.detail = fmt::format("fast {} ticks, slow {} ticks, retriggered fast {} ticks, slow inside fast {} ticks",
                           fast, slow, retrigger, slow_during_fast);
    return o;
}

// --- 3 -----------------------------------------------------------------------

Outcome mutual_exclusion() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 19);
    const double v_max = 6.0;
    long violations = 0, mismatches = 0, ties = 0;
    for (int i = 0; i < 1'000'000; ++i) {
        double sf = u(rng), sx = u(rng);
        // Exact ties and rail values get their own share of the draw.
        const int kind = pick(rng);
        if (kind == 0) sx = sf;
        if (kind == 1) sf = 0.0;
        if (kind == 2) sx = 1.0;
        if (sf == sx) ++ties;
        const auto c = control::volitional({sf, sx}, v_max);
        if (c.u_c * c.u_o != 0.0) ++violations;
        const double want_c = sf > sx ? sf : 0.0;
        const double want_o = sx > sf ? sx : 0.0;
        if (c.u_c != want_c || c.u_o != want_o) ++mismatches;
    }
    return {violations == 0 && mismatches == 0,
            fmt::format("10^6 pairs ({} ties): {} products non-zero, {} mismatches", ties, violations, mismatches)};
}

// --- 4 -----------------------------------------------------------------------

Outcome overgrasp_oracle() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> kdist(0.0, 10.0);
    control::ControlGains g;
    long above = 0, below = 0, bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 10'000; ++i) {
        g.k_overgrasp = kdist(rng);
        const double uc = u(rng);
        const double p = u(rng);
        control::MotorCommand cmd{uc, 0.0, uc * g.v_max, control::CommandSource::volitional};
        tactile::PressureReading pr{p, 0.0, true, 0};
        const auto out = control::overgrasp_modulate(cmd, pr, {tactile::Side::palmar, 0.3}, g);
        if (p >= g.p_g) {
            ++above;
            const long double expected = static_cast<long double>(uc) * expl(-static_cast<long double>(g.k_overgrasp) *
                                                                              static_cast<long double>(p));
            const double err = std::abs(static_cast<double>(out.u_c - expected));
            worst = std::max(worst, err);
            if (err > 1e-12) ++bad;
        } else {
            ++below;
            if (!(out == cmd)) ++bad;
        }
    }
    return {bad == 0, fmt::format("{} modulated cases (max error {:.2e}), {} identity cases, {} failures", above,
                                  worst, below, bad)};
}

// --- 5 -----------------------------------------------------------------------

std::vector<feedback::TactorDrive> render_for(tactile::ContactReading c, bool grasped, Tick n) {
    feedback::TactorRenderer r(true);
    std::vector<feedback::TactorDrive> out;
    for (Tick k = 0; k < n; ++k) out.push_back(r.step(c, grasped, k));
    return out;
}

Outcome tactor_waveform() {
    const auto dorsal = feedback::spectral_probe(render_for({tactile::Side::dorsal, 0.0}, false, 2000));
    const auto palmar = feedback::spectral_probe(render_for({tactile::Side::palmar, 0.0}, false, 2000));
    const auto sweep = render_for({tactile::Side::palmar, 0.0}, true, 2501);

    // Carrier frequency from the integrated phase, independent of the drive's
    // reported carrier: cycles advanced over one tick.
    auto phase_freq = [](Tick at) {
        feedback::FeedbackState st;
        double prev = 0.0;
        double f = 0.0;
        for (Tick k = 0; k <= at + 1; ++k) {
            auto [d, next] = feedback::render({tactile::Side::palmar, 0.0}, true, st, ticks_to_seconds(k));
            if (k == at + 1) f = std::fmod(next.carrier_phase - prev + 1.0, 1.0) * kTickRateHz;
            prev = next.carrier_phase;
            st = next;
        }
        return f;
    };
    const double f1 = sweep[1000].carrier_f, f2 = sweep[2000].carrier_f;
    const double pf1 = phase_freq(1000), pf2 = phase_freq(2000);

    const bool dorsal_ok = dorsal.carrier_hz && std::abs(*dorsal.carrier_hz - 250.0) <= 1.0 && !dorsal.modulation_hz;
    const bool palmar_ok = palmar.modulation_hz && std::abs(*palmar.modulation_hz - 9.5) <= 0.5;
    const bool sweep_ok = std::abs(f1 - 200.0) <= 1.0 && std::abs(f2 - 150.0) <= 1.0 && std::abs(pf1 - 200.0) <= 1.0 &&
                          std::abs(pf2 - 150.0) <= 1.0;
    auto show = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string("none"); };
    return {dorsal_ok && palmar_ok && sweep_ok,
            fmt::format("dorsal carrier {} Hz envelope {}; palmar envelope {} Hz; sweep {:.2f} Hz at +1 s, {:.2f} Hz "
                        "at +2 s (phase-derived {:.2f}, {:.2f})",
                        show(dorsal.carrier_hz), show(dorsal.modulation_hz), show(palmar.modulation_hz), f1, f2, pf1,
                        pf2)};
}

// --- 6 -----------------------------------------------------------------------

std::vector<emg::RawEmgSample> window(Tick start, double flexor, double extensor) {
    std::vector<emg::RawEmgSample> w;
    for (Tick k = 0; k < 1000; ++k) {
        // Alternating sign; rectification must recover the magnitude.
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        w.push_back({sign * flexor, sign * extensor, start + k});
    }
    return w;
}

Outcome calibration_rule() {
    // Dyadic levels keep every mean and threshold exact in binary.
    // Case A: flexor crosstalk (0.25 V) above 5% of its MVC (0.0625 V).
    // Case B: extensor crosstalk (0.015625 V) below 5% of its MVC.
    const double fo = 0.125, eo = 0.0625;
    const double flex_mean = fo + 1.25, ext_mean = eo + 0.75;
    const double flex_xt = fo + 0.25, ext_xt = eo + 0.015625;
    const auto base = window(0, fo, eo);
    const auto flex = window(2000, flex_mean, ext_xt);
    const auto ext = window(4000, flex_xt, ext_mean);
    const auto cal = emg::calibrate(base, flex, ext);

    const double want_fu = 0.5 * 1.25, want_fl = std::max(0.25, 0.05 * 1.25);
    const double want_eu = 0.5 * 0.75, want_el = std::max(0.015625, 0.05 * 0.75);
    const bool ok = cal.flexor_offset == fo && cal.extensor_offset == eo && cal.flexor_upper == want_fu &&
                    cal.flexor_lower == want_fl && cal.extensor_upper == want_eu && cal.extensor_lower == want_el;
    return {ok, fmt::format("flexor upper {} lower {} (crosstalk rule); extensor upper {} lower {} (5% floor)",
                            cal.flexor_upper, cal.flexor_lower, cal.extensor_upper, cal.extensor_lower)};
}

// --- 7 -----------------------------------------------------------------------

Outcome overgrasp_scenario() {
    const auto t0 = Clock::now();
    const auto sc = trials::make_overgrasp_scenario();
    SessionConfig on = default_config(Condition::tactile);
    SessionConfig off = on;
    off.gains.reflexes_enabled = false;
    const auto with = trials::run_trial(sc, on, 11);
    const auto without = trials::run_trial(sc, off, 11);

    const double p_eject = tactile::pressure_from_force(on.scene.eject_force, on.pressure_sensor);
    double p_max = 0.0;
    for (const auto& r : with.trace) p_max = std::max(p_max, r.p);
    const double elapsed = seconds_since(t0);
    const bool ok = without.final_status == plant::ObjectStatus::ejected &&
                    with.final_status == plant::ObjectStatus::held && p_max < p_eject && elapsed < 5.0;
    return {ok, fmt::format("reflexes off: {}; reflexes on: {} with max p {:.4f} < {:.4f} (eject level); {:.2f} s",
                            plant::to_string(without.final_status), plant::to_string(with.final_status), p_max,
                            p_eject, elapsed)};
}

// --- 8 -----------------------------------------------------------------------

Outcome antislip_battery() {
    const auto t0 = Clock::now();
    SessionConfig on = default_config(Condition::tactile);
    SessionConfig off = on;
    off.gains.reflexes_enabled = false;
    int retained = 0, dropped_off = 0;
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(i);
        const auto sc = trials::make_antislip_scenario(fmt::format("antislip_{:03}", i), seed);
        const auto a = trials::run_trial(sc, on, seed);
        const auto b = trials::run_trial(sc, off, seed);
        if (!dropped(a) && a.metrics.score == 1.0) ++retained;
        if (dropped(b)) ++dropped_off;
    }
    return {retained >= 90 && dropped_off >= 50,
            fmt::format("reflexes on: {}/100 retained with score 1; reflexes off: {}/100 dropped; {:.1f} s", retained,
                        dropped_off, seconds_since(t0))};
}

// --- 9 -----------------------------------------------------------------------

struct Recount {
    double exploration = 0.0;
    double fast_slip = 0.0;
};

// Counts straight from the event log without the library's metric helpers.
Recount recount(const trials::TrialRecord& r) {
    bool success = false;
    Tick placed = 0;
    int contacts = 0, slips = 0;
    bool grasped = false;
    for (const auto& e : r.events) {
        if (e.type == "grasp_detected") grasped = true;
        if (e.type == "contact_start" && !grasped) ++contacts;
        if (e.type == "fast_slip") ++slips;
        if (e.type == "placed") {
            success = true;
            placed = e.tick;
        }
    }
    if (r.aborted) success = false;
    const double divisor = success ? (placed + 1) / 1000.0 : r.time_limit_s;
    return {contacts / divisor, slips / divisor};
}

Outcome scoring_metrics() {
    using trials::Milestones;
    std::vector<std::string> problems;
    const Milestones none{}, l{1}, ln{1, 2}, lnp{1, 2, 3};
    if (trials::score(none) != 0.0 || trials::score(l) != 1.0 / 3.0 || trials::score(ln) != 2.0 / 3.0 ||
        trials::score(lnp) != 1.0) {
        problems.push_back("milestone ladder");
    }
    // Out-of-order milestones do not count.
    const Milestones near_only{std::nullopt, 2, std::nullopt};
    const Milestones placed_skip{1, std::nullopt, 3};
    if (trials::score(near_only) != 0.0 || trials::score(placed_skip) != 1.0 / 3.0) problems.push_back("prefix rule");

    const SessionConfig cfg = default_config(Condition::tactile);

    // Timeout: a pick-and-place that cannot finish in 3 s.
    auto short_sc = trials::make_pick_and_place("short");
    short_sc.time_limit_s = 3.0;
    const auto timeout = trials::run_trial(short_sc, cfg, 3);
    if (timeout.metrics.success || timeout.metrics.time_remaining != 0.0) problems.push_back("timeout");

    // Completion exactly at the limit leaves the 0.1 s floor.
    const auto full = trials::run_trial(trials::make_pick_and_place("full"), cfg, 3);
    auto tight = trials::make_pick_and_place("tight");
    tight.time_limit_s = full.metrics.elapsed_s;
    const auto boundary = trials::run_trial(tight, cfg, 3);
    if (!boundary.metrics.success || boundary.metrics.time_remaining != 0.1) problems.push_back("boundary");

    // Rate recount on a success and on a failure (60 s divisor).
    trials::AntislipParams hard;
    const auto drop_sc = trials::make_antislip_scenario("drop", 5001, hard);
    SessionConfig off = cfg;
    off.gains.reflexes_enabled = false;
    const auto failure = trials::run_trial(drop_sc, off, 5001);
    int checked = 0;
    for (const auto* r : {&full, &failure, &timeout}) {
        const auto rc = recount(*r);
        if (rc.exploration != r->metrics.exploration_contact_rate || rc.fast_slip != r->metrics.fast_slip_rate) {
            problems.push_back(fmt::format("rates of {}", r->trial_id));
        }
        ++checked;
    }
    const bool failure_uses_limit = !failure.metrics.success && failure.time_limit_s == 60.0;
    if (!failure_uses_limit) problems.push_back("failure fixture");

    std::string detail = fmt::format(
        "ladder 0/.333/.667/1; timeout remaining {}; boundary remaining {}; {} rate recounts (failure divisor {} s)",
        timeout.metrics.time_remaining, boundary.metrics.time_remaining, checked, failure.time_limit_s);
    for (const auto& p : problems) detail += "; FAILED " + p;
    return {problems.empty(), detail};
}

// --- 10 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto t0 = Clock::now();
    const auto scenarios = trials::make_standard_batch();
    const SessionConfig cfg = default_config(Condition::tactile);
    const fs::path root = fs::temp_directory_path() / fmt::format("prosim_determinism_{}", ::getpid());
    fs::remove_all(root);
    trials::run_batch(scenarios, cfg, 42, root / "a");
    trials::run_batch(scenarios, cfg, 42, root / "b");
    int identical = 0, differing = 0;
    for (const auto& s : scenarios) {
        const auto name = fmt::format("trial_{}.csv", s.id);
        const auto a = slurp(root / "a" / name), b = slurp(root / "b" / name);
        if (!a.empty() && a == b) {
            ++identical;
        } else {
            ++differing;
        }
    }
    fs::remove_all(root);
    const double elapsed = seconds_since(t0);
    return {scenarios.size() == 20 && differing == 0 && elapsed < 60.0,
            fmt::format("{} of {} trace CSVs byte-identical; {:.1f} s for both runs", identical, scenarios.size(),
                        elapsed)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {"reflex latency", reflex_latency},
        {"pulse durations", pulse_durations},
        {"volitional mutual exclusion", mutual_exclusion},
        {"over-grasp modulation oracle", overgrasp_oracle},
        {"tactor waveform", tactor_waveform},
        {"calibration thresholds", calibration_rule},
        {"over-grasp scenario", overgrasp_scenario},
        {"anti-slip battery", antislip_battery},
        {"scoring and rate metrics", scoring_metrics},
        {"batch determinism", determinism},
    };
    int failed = 0;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        std::printf("%s [%02d] %s: %s\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", index - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
