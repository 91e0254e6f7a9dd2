#include <gtest/gtest.h>

#include "prosim/tactile.hpp"

using namespace prosim;
using namespace prosim::tactile;

TEST(Pressure, MonotoneInForceAndBounded) {
    PressureSensorModel m;
    double prev = -1.0;
    for (double f = 0.0; f <= 60.0; f += 0.5) {
        const double p = pressure_from_force(f, m);
        EXPECT_GT(p, prev);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        prev = p;
    }
    EXPECT_THROW(pressure_from_force(-1.0, m), std::domain_error);
}

TEST(Pressure, EjectForceLevel) {
    EXPECT_NEAR(pressure_from_force(25.0, {}), 0.329, 0.002);
}

TEST(History, NewestOldestAndWrap) {
    PressureHistory h(4);
    for (Tick k = 0; k < 6; ++k) h.push(k, 0.1 * k);
    EXPECT_EQ(h.size(), 4u);
    EXPECT_EQ(h.newest().tick, 5);
    EXPECT_EQ(h.oldest().tick, 2);
    EXPECT_THROW(h.from_newest(4), std::out_of_range);
    EXPECT_EQ(h.nearest(3)->tick, 3);
}

TEST(Derivative, TenMillisecondDifference) {
    PressureHistory h;
    for (Tick k = 0; k < 10; ++k) h.push(k, 0.5);
    EXPECT_FALSE(derivative(h).ready);
    h.push(10, 0.48);
    const auto d = derivative(h);
    ASSERT_TRUE(d.ready);
    EXPECT_NEAR(d.dp_dt, -2.0, 1e-9);
}

TEST(SlowSlip, HalfSecondLag) {
    PressureHistory h;
    for (Tick k = 0; k < 500; ++k) h.push(k, 0.3);
    EXPECT_FALSE(slow_slip_delta(h).ready);
    h.push(500, 0.2);
    const auto s = slow_slip_delta(h);
    ASSERT_TRUE(s.ready);
    EXPECT_NEAR(s.delta, -0.1, 1e-12);
}

TEST(Contact, RoundTripThroughVoltage) {
    for (double x : {0.0, 0.1, 0.37, 0.8, 0.95}) {
        for (Side side : {Side::palmar, Side::dorsal}) {
            const auto r = contact_from_geometry({x, side}, true);
            EXPECT_EQ(r.side, side);
            EXPECT_NEAR(r.x, x, 2e-3);
        }
    }
    EXPECT_FALSE(contact_from_geometry({0.5, Side::palmar}, false).touching());
}

TEST(Contact, TipKeepsGeometricSide) {
    EXPECT_EQ(contact_from_geometry({1.0, Side::dorsal}, true).side, Side::dorsal);
    EXPECT_EQ(contact_from_geometry({1.0, Side::palmar}, true).side, Side::palmar);
    EXPECT_EQ(contact_from_geometry({1.0, Side::palmar}, true).x, 1.0);
}

TEST(Grasp, DebouncedBothWays) {
    GraspDetector g(0.15, 20);
    PressureReading hi{0.2, 0, true, 0}, lo{0.1, 0, true, 0};
    for (int i = 0; i < 19; ++i) EXPECT_FALSE(g.update(hi));
    EXPECT_TRUE(g.update(hi));
    for (int i = 0; i < 19; ++i) EXPECT_TRUE(g.update(lo));
    EXPECT_FALSE(g.update(lo));
}

TEST(Grasp, GlitchResetsRun) {
    GraspDetector g(0.15, 5);
    PressureReading hi{0.2, 0, true, 0}, lo{0.1, 0, true, 0};
    for (int i = 0; i < 4; ++i) g.update(hi);
    g.update(lo);
    for (int i = 0; i < 4; ++i) EXPECT_FALSE(g.update(hi));
    EXPECT_TRUE(g.update(hi));
}

TEST(FrontEnd, NoiselessReadingAndDeterministicNoise) {
    PressureSensorModel quiet;
    quiet.noise_sigma = 0.0;
    TactileFrontEnd fe(quiet, {}, 1);
    const auto f = fe.sample(0, 10.0, FingerSurfacePoint{0.25, Side::palmar});
    EXPECT_DOUBLE_EQ(f.pressure.p, pressure_from_force(10.0, quiet));
    EXPECT_EQ(f.contact.side, Side::palmar);

    TactileFrontEnd a({}, {}, 5), b({}, {}, 5);
    for (Tick k = 0; k < 50; ++k) ASSERT_EQ(a.sample(k, 5.0, std::nullopt).pressure.p, b.sample(k, 5.0, std::nullopt).pressure.p);
}

TEST(Side, StringRoundTrip) {
    for (Side s : {Side::none, Side::palmar, Side::dorsal}) EXPECT_EQ(side_from_string(to_string(s)), s);
    EXPECT_THROW(side_from_string("left"), std::exception);
}
