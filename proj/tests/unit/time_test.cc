#include "pilot/time.h"

#include <gtest/gtest.h>

#include <random>
#include <stdexcept>

namespace pilot {
namespace {

TEST(TimeTest, FromSecondsRoundsToMicroseconds) {
  EXPECT_EQ(from_seconds(0.1).count(), 100000);
  EXPECT_EQ(from_seconds(900).count(), 900000000);
  EXPECT_EQ(from_seconds(0.0000004).count(), 0);
  EXPECT_EQ(from_seconds(0.0000006).count(), 1);
}

TEST(TimeTest, FormatIsFixedPoint) {
  EXPECT_EQ(format_seconds(Duration{0}), "0.000000");
  EXPECT_EQ(format_seconds(Duration{1}), "0.000001");
  EXPECT_EQ(format_seconds(from_seconds(900.3)), "900.300000");
  EXPECT_EQ(format_seconds(Duration{-1500000}), "-1.500000");
}

TEST(TimeTest, ParseAcceptsShortForms) {
  EXPECT_EQ(parse_seconds("900").count(), 900000000);
  EXPECT_EQ(parse_seconds("0.1").count(), 100000);
  EXPECT_EQ(parse_seconds("-2.5").count(), -2500000);
  EXPECT_EQ(parse_seconds("12.000001").count(), 12000001);
}

TEST(TimeTest, ParseRejectsGarbage) {
  EXPECT_THROW(parse_seconds(""), std::invalid_argument);
  EXPECT_THROW(parse_seconds("abc"), std::invalid_argument);
  EXPECT_THROW(parse_seconds("1.0000001"), std::invalid_argument);
  EXPECT_THROW(parse_seconds("1.2.3"), std::invalid_argument);
  EXPECT_THROW(parse_seconds("1e3"), std::invalid_argument);
}

TEST(TimeTest, FormatParseRoundTripProperty) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> us(-(1LL << 45), 1LL << 45);
  for (int i = 0; i < 5000; ++i) {
    const Duration d{us(rng)};
    ASSERT_EQ(parse_seconds(format_seconds(d)), d) << format_seconds(d);
  }
}

}  // namespace
}  // namespace pilot
