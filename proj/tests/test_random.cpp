#include <cmath>

#include <gtest/gtest.h>

#include "sphlang/random.hpp"

using namespace sphlang;

TEST(Philox, KnownAnswerZeroKey) {
  // Random123 known-answer vector for philox4x32_10, counter = key = 0.
  const Philox4x32 gen(0);
  const auto out = gen(0, 0);
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  const Philox4x32 gen(~0ULL);
  const auto out = gen(~0ULL, ~0ULL);
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, NormalIsOrderIndependentAndStandard) {
  const Philox4x32 gen(42);
  EXPECT_EQ(gen.normal(12345), gen.normal(12345));
  constexpr int kDraws = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = kDraws; i-- > 0;) {
    const double z = gen.normal(static_cast<std::uint64_t>(i));
    sum += z;
    sum_sq += z * z;
  }
  EXPECT_NEAR(sum / kDraws, 0.0, 4.0 / std::sqrt(kDraws));
  EXPECT_NEAR(sum_sq / kDraws, 1.0, 4.0 * std::sqrt(2.0 / kDraws));
}

TEST(RandomStream, SeededStreamsReproduce) {
  RandomStream a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}
