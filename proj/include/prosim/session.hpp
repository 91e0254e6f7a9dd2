#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "prosim/config.hpp"
#include "prosim/trials.hpp"

namespace prosim::interface {

inline constexpr int kProtocolVersion = 1;

/// Mutex-guarded FIFO with a fixed capacity. A push onto a full queue evicts
/// the oldest element and bumps the drop counter instead of blocking.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("queue capacity must be positive");
    }

    /// Returns true when an element had to be evicted.
    bool push(T value) {
        bool evicted = false;
        {
            std::lock_guard lock(mutex_);
            if (items_.size() == capacity_) {
                items_.pop_front();
                ++dropped_;
                evicted = true;
            }
            items_.push_back(std::move(value));
        }
        ready_.notify_one();
        return evicted;
    }

    std::optional<T> try_pop() {
        std::lock_guard lock(mutex_);
        if (items_.empty()) return std::nullopt;
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    template <typename Rep, typename Period>
    std::optional<T> pop_for(std::chrono::duration<Rep, Period> timeout) {
        std::unique_lock lock(mutex_);
        if (!ready_.wait_for(lock, timeout, [&] { return !items_.empty(); })) return std::nullopt;
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<T> items_;
    std::uint64_t dropped_ = 0;
};

// Inbound messages, already validated and clamped.
struct IntentMessage {
    double flexion = 0.0;
    double extension = 0.0;
    Vec3 arm_vel;
    bool rezero = false;
    std::optional<double> client_ts;
};

struct StartTrialMessage {
    std::optional<std::string> trial_id;
    std::optional<std::uint64_t> seed;
    double time_limit_s = 60.0;
    nlohmann::json scene = nlohmann::json::object();
};

struct AbortMessage {
    std::string reason = "operator abort";
};

struct SetConditionMessage {
    Condition condition = Condition::tactile;
};

struct RecalibrateMessage {};

/// Raised by the transport when the operator goes away.
struct DisconnectNotice {};

using Command = std::variant<IntentMessage, StartTrialMessage, AbortMessage, SetConditionMessage, RecalibrateMessage,
                             DisconnectNotice>;

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

/// Parses one wire message. Flexion and extension are clamped to [0, 1] and
/// arm velocity to `max_arm_speed`.
Command parse_message(std::string_view text, double max_arm_speed);

nlohmann::json error_message(const std::string& code, const std::string& message);

/// Time source for the real-time loop; tests substitute a manual clock.
class Clock {
public:
    using time_point = std::chrono::steady_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_until(time_point t) = 0;
};

class SteadyClock final : public Clock {
public:
    time_point now() override;
    void sleep_until(time_point t) override;
};

/// Advances only when slept on.
class ManualClock final : public Clock {
public:
    time_point now() override { return now_; }
    void sleep_until(time_point t) override {
        if (t > now_) now_ = t;
    }
    void advance(std::chrono::nanoseconds d) { now_ += d; }

private:
    time_point now_{};
};

struct SessionOptions {
    SessionConfig config = default_config();
    std::optional<std::filesystem::path> log_dir;  // per-trial logs when set
    std::uint64_t base_seed = 1;
    std::size_t inbound_capacity = 256;
    std::size_t outbound_capacity = 256;
    double max_arm_speed = 0.25;  // m/s
};

/// Transport-independent live session. The network side calls receive() and
/// drains outbound messages; the control side calls tick() once per
/// millisecond. The two sides share only the two bounded queues.
class Session {
public:
    explicit Session(SessionOptions options);

    // Network context.
    void receive(std::string_view text);
    void disconnect();
    std::optional<std::string> next_outbound();
    std::optional<std::string> wait_outbound(std::chrono::milliseconds timeout);

    // Control context.
    void tick();

    bool trial_active() const { return trial_active_.load(); }
    Condition condition() const;
    std::uint64_t telemetry_dropped() const { return outbound_.dropped(); }
    std::uint64_t inbound_dropped() const { return inbound_.dropped(); }
    /// Completed trial records, oldest first.
    const std::vector<trials::TrialRecord>& history() const { return history_; }

private:
    void apply(const Command& cmd);
    void start_trial(const StartTrialMessage& msg);
    void end_trial();
    void emit(nlohmann::json msg);
    nlohmann::json telemetry(const trials::TraceRow& row) const;

    SessionOptions options_;
    BoundedQueue<Command> inbound_;
    BoundedQueue<std::string> outbound_;
    std::atomic<bool> trial_active_{false};

    // Control-context state below.
    SessionConfig config_;
    std::unique_ptr<trials::TrialRunner> runner_;
    std::string trial_id_;
    IntentMessage intent_;
    std::optional<double> applied_ts_;
    Tick applied_tick_ = -1;
    std::uint64_t trials_started_ = 0;
    std::vector<trials::TrialRecord> history_;
};

/// Runs `session.tick()` every millisecond of `clock` time until `stop` is
/// set. A loop that falls more than 100 ms behind resynchronizes instead of
/// bursting.
void run_control_loop(Session& session, Clock& clock, const std::atomic<bool>& stop);

}  // namespace prosim::interface
