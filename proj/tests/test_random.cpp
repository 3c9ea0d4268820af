#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

#include "mpopi/random.hpp"

namespace {

using mpopi::Philox4x32;

// Known-answer vectors from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  constexpr auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  static_assert(out[0] == 0x6627e8d5u);
  EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(UnitInterval, OpenAtBothEnds) {
  EXPECT_GT(mpopi::NormalStream::to_unit(0, 0), 0.0);
  EXPECT_LT(mpopi::NormalStream::to_unit(0xffffffffu, 0xffffffffu), 1.0);
}

TEST(NormalStream, IdenticalIdsGiveIdenticalStreams) {
  const mpopi::StreamId id{123456789012345ull, 7, 2, 11};
  mpopi::NormalStream a(id), b(id);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(NormalStream, EveryCoordinateChangesTheStream) {
  const mpopi::StreamId base{5, 1, 1, 1};
  const double first = mpopi::NormalStream(base).next();
  for (const mpopi::StreamId other : {mpopi::StreamId{6, 1, 1, 1}, mpopi::StreamId{5ull | (1ull << 40), 1, 1, 1},
                                      mpopi::StreamId{5, 2, 1, 1}, mpopi::StreamId{5, 1, 2, 1},
                                      mpopi::StreamId{5, 1, 1, 2}}) {
    EXPECT_NE(mpopi::NormalStream(other).next(), first);
  }
}

TEST(NormalStream, StandardNormalMoments) {
  mpopi::NormalStream s({1, 0, 0, 0});
  const int n = 10000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double v = s.next();
    ASSERT_TRUE(std::isfinite(v));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
  EXPECT_LT(std::abs(sq / n - mean * mean - 1.0), 0.06);
}

TEST(SeedSpec, StreamCarriesAllCoordinates) {
  const mpopi::SeedSpec seeds{99, 4};
  const auto id = seeds.stream(3, 17);
  EXPECT_EQ(id.master_seed, 99u);
  EXPECT_EQ(id.step, 4u);
  EXPECT_EQ(id.cycle, 3u);
  EXPECT_EQ(id.sample, 17u);
}

}  // namespace
