#include <gtest/gtest.h>

#include <filesystem>
#include <vector>

#include "prosim/session.hpp"

using namespace prosim;
using namespace prosim::interface;
using nlohmann::json;

namespace {

std::vector<json> drain(Session& s) {
    std::vector<json> out;
    while (auto m = s.next_outbound()) out.push_back(json::parse(*m));
    return out;
}

std::vector<json> of_type(const std::vector<json>& msgs, const std::string& type) {
    std::vector<json> out;
    for (const auto& m : msgs) {
        if (m["type"] == type) out.push_back(m);
    }
    return out;
}

SessionOptions options(int decimation = 20) {
    SessionOptions o;
    o.config.stream_decimation = decimation;
    o.outbound_capacity = 4096;
    return o;
}

const char* kStart = R"({"v":1,"type":"start_trial","trial_id":"t1","seed":5})";

// Manual time that raises `stop` after a fixed number of sleeps.
class CountingClock final : public Clock {
public:
    CountingClock(std::atomic<bool>& stop, int sleeps) : stop_(stop), limit_(sleeps) {}
    time_point now() override { return now_; }
    void sleep_until(time_point t) override {
        if (t > now_) now_ = t;
        if (++sleeps_ == jump_at_) now_ += jump_;
        if (sleeps_ >= limit_) stop_ = true;
    }
    void jump_after(int sleeps, std::chrono::milliseconds d) {
        jump_at_ = sleeps;
        jump_ = d;
    }
    std::chrono::nanoseconds elapsed() const { return now_.time_since_epoch(); }

private:
    std::atomic<bool>& stop_;
    int limit_;
    int sleeps_ = 0;
    int jump_at_ = -1;
    std::chrono::milliseconds jump_{0};
    time_point now_{};
};

}  // namespace

TEST(Queue, DropsOldestWhenFull) {
    BoundedQueue<int> q(3);
    for (int i = 0; i < 5; ++i) q.push(i);
    EXPECT_EQ(q.dropped(), 2u);
    EXPECT_EQ(q.size(), 3u);
    EXPECT_EQ(*q.try_pop(), 2);
    EXPECT_EQ(*q.try_pop(), 3);
    EXPECT_EQ(*q.try_pop(), 4);
    EXPECT_FALSE(q.try_pop());
    EXPECT_FALSE(q.pop_for(std::chrono::milliseconds(1)));
    EXPECT_THROW(BoundedQueue<int>(0), std::invalid_argument);
}

TEST(Parse, IntentClampsValues) {
    const auto cmd = parse_message(R"({"v":1,"type":"intent","flexion":1.7,"extension":-0.2,"arm_vel":[3,0,4],"ts":12.5})",
                                   0.25);
    const auto& m = std::get<IntentMessage>(cmd);
    EXPECT_EQ(m.flexion, 1.0);
    EXPECT_EQ(m.extension, 0.0);
    EXPECT_DOUBLE_EQ(m.arm_vel.x, 0.15);
    EXPECT_DOUBLE_EQ(m.arm_vel.z, 0.2);
    EXPECT_EQ(*m.client_ts, 12.5);
}

TEST(Parse, ErrorCodes) {
    auto code = [](const char* text) {
        try {
            parse_message(text, 0.25);
        } catch (const ProtocolError& e) {
            return e.code();
        }
        return std::string("none");
    };
    EXPECT_EQ(code("{nope"), "bad_json");
    EXPECT_EQ(code(R"({"type":"intent"})"), "bad_version");
    EXPECT_EQ(code(R"({"v":2,"type":"intent"})"), "bad_version");
    EXPECT_EQ(code(R"({"v":1,"type":"intent","flexion":"x"})"), "bad_field");
    EXPECT_EQ(code(R"({"v":1,"type":"intent","grip":1})"), "unknown_field");
    EXPECT_EQ(code(R"({"v":1,"type":"dance"})"), "unknown_type");
    EXPECT_EQ(code(R"({"v":1,"type":"set_condition","condition":"blind"})"), "bad_field");
    EXPECT_EQ(code(R"({"v":1,"type":"start_trial","time_limit_s":0})"), "bad_field");
    EXPECT_EQ(code(R"({"v":1,"type":"recalibrate"})"), "none");
}

TEST(Session, MalformedMessageGetsErrorFrame) {
    Session s(options());
    s.receive("[1,2]");
    const auto msgs = drain(s);
    ASSERT_EQ(msgs.size(), 1u);
    EXPECT_EQ(msgs[0]["type"], "error");
    EXPECT_EQ(msgs[0]["code"], "bad_message");
    EXPECT_FALSE(s.trial_active());
}

TEST(Session, StartAckThenTelemetryFromTickZero) {
    Session s(options());
    s.receive(kStart);
    for (int i = 0; i < 1000; ++i) s.tick();
    const auto msgs = drain(s);
    ASSERT_FALSE(msgs.empty());
    EXPECT_EQ(msgs[0]["type"], "ack");
    EXPECT_EQ(msgs[0]["trial_id"], "t1");
    EXPECT_EQ(msgs[0]["seed"], 5);
    const auto frames = of_type(msgs, "telemetry");
    ASSERT_EQ(frames.size(), 50u);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        EXPECT_EQ(frames[i]["tick"], static_cast<int>(20 * i));
        EXPECT_EQ(frames[i]["v"], 1);
    }
    EXPECT_EQ(frames[0]["t"], 0.0);
    EXPECT_TRUE(frames[0]["contact"]["x"].is_null());
    EXPECT_TRUE(frames[0]["milestones"]["placed"].is_null());
    EXPECT_TRUE(frames[0].contains("tactor"));
}

TEST(Session, IntentAppliesOnNextTick) {
    Session s(options(1));
    s.receive(kStart);
    for (int i = 0; i < 7; ++i) s.tick();
    drain(s);
    s.receive(R"({"v":1,"type":"intent","flexion":0.5,"ts":99.0})");
    s.tick();
    const auto frames = of_type(drain(s), "telemetry");
    ASSERT_EQ(frames.size(), 1u);
    EXPECT_EQ(frames[0]["tick"], 7);
    EXPECT_EQ(frames[0]["intent"]["applied_tick"], 7);
    EXPECT_EQ(frames[0]["intent"]["ts"], 99.0);
}

TEST(Session, StateRulesProduceErrors) {
    Session s(options());
    s.receive(R"({"v":1,"type":"abort"})");
    s.receive(R"({"v":1,"type":"recalibrate"})");
    s.tick();
    auto errs = of_type(drain(s), "error");
    ASSERT_EQ(errs.size(), 2u);
    EXPECT_EQ(errs[0]["code"], "no_trial");
    EXPECT_EQ(errs[1]["code"], "no_trial");

    s.receive(kStart);
    s.tick();
    s.receive(kStart);
    s.receive(R"({"v":1,"type":"set_condition","condition":"standard"})");
    s.tick();
    errs = of_type(drain(s), "error");
    ASSERT_EQ(errs.size(), 2u);
    EXPECT_EQ(errs[0]["code"], "trial_active");
    EXPECT_EQ(errs[1]["code"], "trial_active");
}

TEST(Session, SetConditionBetweenTrials) {
    Session s(options());
    s.receive(R"({"v":1,"type":"set_condition","condition":"standard"})");
    s.tick();
    EXPECT_EQ(s.condition(), Condition::standard);
    EXPECT_EQ(drain(s).at(0)["command"], "set_condition");
}

TEST(Session, AbortEndsTrialWithRecord) {
    Session s(options());
    s.receive(kStart);
    for (int i = 0; i < 10; ++i) s.tick();
    s.receive(R"({"v":1,"type":"abort","reason":"bored"})");
    s.tick();
    const auto ends = of_type(drain(s), "trial_end");
    ASSERT_EQ(ends.size(), 1u);
    EXPECT_EQ(ends[0]["aborted"], true);
    EXPECT_EQ(ends[0]["reason"], "bored");
    EXPECT_EQ(ends[0]["score"], 0.0);
    ASSERT_EQ(s.history().size(), 1u);
    EXPECT_FALSE(s.trial_active());
}

TEST(Session, DisconnectAbortsTrial) {
    Session s(options());
    s.receive(kStart);
    s.tick();
    s.disconnect();
    s.tick();
    EXPECT_FALSE(s.trial_active());
    const auto ends = of_type(drain(s), "trial_end");
    ASSERT_EQ(ends.size(), 1u);
    EXPECT_EQ(ends[0]["reason"], "operator disconnected");
}

TEST(Session, TimeoutEndsTrialAndWritesLogs) {
    const auto dir = std::filesystem::temp_directory_path() / "prosim_session_logs";
    std::filesystem::remove_all(dir);
    auto o = options();
    o.log_dir = dir;
    Session s(o);
    s.receive(R"({"v":1,"type":"start_trial","time_limit_s":0.5})");
    for (int i = 0; i < 600; ++i) s.tick();
    const auto ends = of_type(drain(s), "trial_end");
    ASSERT_EQ(ends.size(), 1u);
    EXPECT_EQ(ends[0]["trial_id"], "live_001");
    EXPECT_EQ(ends[0]["success"], false);
    EXPECT_TRUE(std::filesystem::exists(dir / "trial_live_001.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "trial_live_001.events.jsonl"));
    std::filesystem::remove_all(dir);
}

TEST(Session, SlowConsumerCountsDrops) {
    auto o = options(1);
    o.outbound_capacity = 8;
    Session s(o);
    s.receive(kStart);
    for (int i = 0; i < 100; ++i) s.tick();
    EXPECT_GT(s.telemetry_dropped(), 0u);
    const auto msgs = drain(s);
    ASSERT_EQ(msgs.size(), 8u);
    // The count is stamped before the frame's own push evicts the oldest.
    EXPECT_EQ(msgs.back()["dropped"].get<std::uint64_t>() + 1, s.telemetry_dropped());
}

TEST(ControlLoop, FiftyFramesPerSimulatedSecond) {
    Session s(options(20));
    s.receive(kStart);
    std::atomic<bool> stop{false};
    CountingClock clock(stop, 2000);
    run_control_loop(s, clock, stop);
    const auto frames = of_type(drain(s), "telemetry");
    ASSERT_EQ(frames.size(), 100u);
    for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(frames[i]["tick"], static_cast<int>(20 * i));
    EXPECT_EQ(clock.elapsed(), std::chrono::milliseconds(2000));
}

TEST(ControlLoop, ResyncsInsteadOfBursting) {
    Session s(options());
    std::atomic<bool> stop{false};
    CountingClock clock(stop, 300);
    clock.jump_after(100, std::chrono::milliseconds(500));
    run_control_loop(s, clock, stop);
    // A burst would leave the clock near 600 ms; resync keeps real time moving.
    EXPECT_GE(clock.elapsed(), std::chrono::milliseconds(795));
    EXPECT_LE(clock.elapsed(), std::chrono::milliseconds(800));
}
