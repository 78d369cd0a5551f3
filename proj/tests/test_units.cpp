#include <gtest/gtest.h>

#include "pfdlab/units.hpp"

using namespace pfdlab;

TEST(Units, ParseTimeSuffixes) {
    EXPECT_EQ(parse_time("40ps"), 40'000);
    EXPECT_EQ(parse_time("1.5ns"), 1'500'000);
    EXPECT_EQ(parse_time("1200fs"), 1'200);
    EXPECT_EQ(parse_time("1200"), 1'200);
    EXPECT_EQ(parse_time("0"), 0);
    EXPECT_EQ(parse_time("-2ps"), -2'000);
}

TEST(Units, ParseTimeRejectsJunk) {
    EXPECT_THROW(parse_time("abc"), std::invalid_argument);
    EXPECT_THROW(parse_time("10 ps"), std::invalid_argument);
    EXPECT_THROW(parse_time("ps"), std::invalid_argument);
    EXPECT_THROW(parse_time(""), std::invalid_argument);
}

TEST(Units, ParsePhase) {
    EXPECT_DOUBLE_EQ(parse_phase("0.2pi"), 0.2 * kPi);
    EXPECT_DOUBLE_EQ(parse_phase("pi"), kPi);
    EXPECT_DOUBLE_EQ(parse_phase("-pi"), -kPi);
    EXPECT_DOUBLE_EQ(parse_phase("-0.5pi"), -0.5 * kPi);
    EXPECT_DOUBLE_EQ(parse_phase("1.25"), 1.25);
    EXPECT_THROW(parse_phase("xpi"), std::invalid_argument);
}

TEST(Units, Conversions) {
    EXPECT_EQ(period_of(1e9), 1'000'000);
    EXPECT_EQ(period_of(3e9), 333'333);
    EXPECT_EQ(ps(40), 40'000);
    EXPECT_EQ(ns(1.5), 1'500'000);
    EXPECT_EQ(format_ps(40'000), "40.0 ps");
    EXPECT_EQ(format_ps(97'700, 2), "97.70 ps");
}
