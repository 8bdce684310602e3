#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "selboot/normal.hpp"

using namespace selboot::normal;

TEST(Normal, UpperTailKnownValues) {
  EXPECT_NEAR(upper_tail(0.0), 0.5, 1e-16);
  EXPECT_NEAR(upper_tail(1.6448536269514722), 0.05, 1e-15);
  EXPECT_NEAR(upper_tail(2.0), 0.022750131948179195, 1e-16);
  EXPECT_EQ(upper_tail(std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_EQ(upper_tail(-std::numeric_limits<double>::infinity()), 1.0);
}

TEST(Normal, InverseRoundTrip) {
  for (double p : {1e-300, 1e-12, 1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1 - 1e-10}) {
    const double z = upper_tail_inv(p);
    EXPECT_NEAR(upper_tail(z) / p, 1.0, 1e-12) << p;
  }
  EXPECT_EQ(upper_tail_inv(0.0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(upper_tail_inv(1.0), -std::numeric_limits<double>::infinity());
}

TEST(Normal, LogUpperTailMatchesDirectAndStaysFinite) {
  for (double z = -8.0; z < 37.0; z += 0.25)
    EXPECT_NEAR(log_upper_tail(z), std::log(upper_tail(z)), 1e-12 * std::max(1.0, std::abs(std::log(upper_tail(z)))))
        << z;
  // Q(z) ~ phi(z)/z for large z.
  for (double z : {50.0, 100.0, 1000.0}) {
    const double mills = -0.5 * z * z - 0.5 * std::log(2.0 * M_PI) - std::log(z);
    EXPECT_NEAR(log_upper_tail(z), mills, 1.1 / (z * z));
  }
}

TEST(Normal, StudentTail) {
  EXPECT_NEAR(student_upper_tail(0.0, 5.0), 0.5, 1e-15);
  EXPECT_NEAR(student_upper_tail(2.0150483733330233, 5.0), 0.05, 1e-12);
  EXPECT_NEAR(student_upper_tail_inv(0.025, 89.0), 1.9869786995062815, 1e-10);
  EXPECT_NEAR(student_upper_tail(1.0, 1e7), upper_tail(1.0), 1e-7);
}
