#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "prosim/plant.hpp"

using namespace prosim;
using namespace prosim::plant;

namespace {

// Wrist centered on the standing object, mid-finger.
Plant make_plant(const SceneSpec& scene = {}, const HandSpec& hand = {}) {
    return Plant(scene, hand, {0.0, -0.04, 0.06});
}

int close_until_grip(Plant& p, double volts = 6.0) {
    for (int k = 0; k < 10000; ++k) {
        if (p.step(volts, {}).events.grip_formed) return k;
    }
    return -1;
}

}  // namespace

TEST(Scene, DefaultMassIsAluminiumCylinder) {
    SceneSpec s;
    EXPECT_NEAR(s.mass(), kAluminiumDensity * std::numbers::pi * 0.01 * 0.01 * 0.12, 1e-12);
    s.object_mass = 0.2;
    EXPECT_EQ(s.mass(), 0.2);
}

TEST(Scene, RequiredForceSharesWeightOverTwoContacts) {
    SceneSpec scene;
    PlantState s = initial_state(scene, {}, {});
    EXPECT_DOUBLE_EQ(required_grip_force(s, scene), s.object.mass * kGravity / (2.0 * 0.4));
    s.friction_scale = 0.5;
    s.mass_scale = 2.0;
    EXPECT_DOUBLE_EQ(required_grip_force(s, scene), 4.0 * s.object.mass * kGravity / 0.8);
}

TEST(Hand, ClosesFullRangeInOneSecond) {
    PlantState s = initial_state({}, {}, {0.3, 0.0, 0.25});  // far from the object
    for (int k = 0; k < 500; ++k) s = step(s, 6.0, {}, {}, {}).state;
    EXPECT_NEAR(s.hand.aperture, 0.05, 1e-9);
    EXPECT_NEAR(s.hand.aperture_rate, -0.1, 1e-9);
    for (int k = 0; k < 100; ++k) s = step(s, 0.0, {}, {}, {}).state;
    EXPECT_NEAR(s.hand.aperture, 0.05, 1e-9);
}

TEST(Hand, GripForceIsCurrentLimited) {
    Plant p = make_plant();
    ASSERT_GE(close_until_grip(p, 3.0), 0);
    for (int k = 0; k < 500; ++k) p.step(3.0, {});
    EXPECT_DOUBLE_EQ(p.state().hand.grip_force, 0.5 * HandSpec{}.stall_force);
    // Non-backdrivable: zero voltage keeps the squeeze.
    for (int k = 0; k < 100; ++k) p.step(0.0, {});
    EXPECT_DOUBLE_EQ(p.state().hand.grip_force, 17.5);
}

TEST(Hand, OpeningReleases) {
    Plant p = make_plant();
    ASSERT_GE(close_until_grip(p, 2.0), 0);
    for (int k = 0; k < 200; ++k) p.step(2.0, {});
    bool released = false;
    for (int k = 0; k < 500 && !released; ++k) released = p.step(-6.0, {}).events.released;
    EXPECT_TRUE(released);
    EXPECT_FALSE(p.state().grip.engaged);
    EXPECT_EQ(p.state().hand.grip_force, 0.0);
}

TEST(Grip, FormsMidFingerWithPalmarContact) {
    Plant p = make_plant();
    ASSERT_GE(close_until_grip(p), 0);
    EXPECT_NEAR(p.state().grip.arc_fraction, 0.5, 1e-9);
    EXPECT_TRUE(p.contact().touching);
    EXPECT_EQ(p.contact().point.side, tactile::Side::palmar);
}

TEST(Grip, LiftCarriesObject) {
    Plant p = make_plant();
    ASSERT_GE(close_until_grip(p, 2.0), 0);
    for (int k = 0; k < 300; ++k) p.step(2.0, {});
    for (int k = 0; k < 400; ++k) p.step(0.0, {0.0, 0.0, 0.25});
    EXPECT_EQ(p.state().object.status, ObjectStatus::held);
    EXPECT_NEAR(p.state().object.pos.z, 0.16, 1e-9);
}

TEST(Grip, OffCenterOvergraspEjects) {
    Plant p(SceneSpec{}, HandSpec{}, {0.0, -0.075, 0.06});  // contact near the tip
    ASSERT_GE(close_until_grip(p), 0);
    bool ejected = false;
    for (int k = 0; k < 200 && !ejected; ++k) ejected = p.step(6.0, {}).events.ejected;
    EXPECT_TRUE(ejected);
    EXPECT_EQ(p.state().object.status, ObjectStatus::ejected);
}

TEST(Grip, FrictionDropSlidesObjectOut) {
    Plant p = make_plant();
    ASSERT_GE(close_until_grip(p, 1.0), 0);
    for (int k = 0; k < 300; ++k) p.step(1.0, {});
    for (int k = 0; k < 400; ++k) p.step(0.0, {0.0, 0.0, 0.25});
    ASSERT_EQ(p.state().object.status, ObjectStatus::held);
    p.mutable_state().friction_scale = 0.05;
    bool lost = false;
    for (int k = 0; k < 5000 && !lost; ++k) lost = p.step(0.0, {}).events.lost;
    EXPECT_TRUE(lost);
    bool landed = false;
    for (int k = 0; k < 2000 && !landed; ++k) landed = p.step(0.0, {}).events.landed;
    EXPECT_TRUE(landed);
}

TEST(Region, Classification) {
    SceneSpec scene;
    ObjectState o;
    o.status = ObjectStatus::held;
    o.pos = {0.16, 0.0, 0.2};
    EXPECT_EQ(classify_region(o, scene), Region::near_end_bin);
    o.pos = {0.08, 0.0, 0.2};
    EXPECT_EQ(classify_region(o, scene), Region::elsewhere);
    o.status = ObjectStatus::in_end_bin;
    EXPECT_EQ(classify_region(o, scene), Region::in_end_bin);
    ObjectState beside;
    beside.pos = {0.175, 0.03, 0.06};
    EXPECT_NEAR(displacement_from_end_bin(beside, scene), 0.03, 1e-12);
}

TEST(Perturbation, StepRampAndExpiry) {
    PerturbationSchedule sched({{100, PerturbationType::mass_scale, 2.0, 50, 0},
                                {200, PerturbationType::friction_scale, 0.25, 0, 100}});
    PlantState s;
    for (Tick k = 0; k <= 120; ++k) {
        sched.apply(k, s);
        if (k == 100) {
            EXPECT_EQ(s.mass_scale, 2.0);
        }
    }
    EXPECT_EQ(s.mass_scale, 2.0);
    for (Tick k = 121; k <= 250; ++k) sched.apply(k, s);
    EXPECT_EQ(s.mass_scale, 1.0);
    EXPECT_DOUBLE_EQ(s.friction_scale, 0.5);
    for (Tick k = 251; k <= 400; ++k) sched.apply(k, s);
    EXPECT_DOUBLE_EQ(s.friction_scale, 0.25);
}

TEST(Perturbation, TypeStrings) {
    for (auto t : {PerturbationType::mass_scale, PerturbationType::friction_scale}) {
        EXPECT_EQ(perturbation_type_from_string(to_string(t)), t);
    }
}

TEST(Specs, ValidateRejectsNonsense) {
    SceneSpec s;
    s.friction = -1.0;
    EXPECT_ANY_THROW(s.validate());
    HandSpec h;
    h.a_max = 0.0;
    EXPECT_ANY_THROW(h.validate());
}
