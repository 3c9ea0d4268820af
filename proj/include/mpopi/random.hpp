#pragma once

#include <array>
#include <cstdint>

namespace mpopi {

// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11). Output is a
// pure function of (counter, key), which is what makes rollout sampling
// independent of evaluation order and worker count.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// Identifies one sample's random stream: (master seed, controller step, update
// cycle, sample index).
struct StreamId {
  std::uint64_t master_seed = 0;
  std::uint32_t step = 0;
  std::uint32_t cycle = 0;
  std::uint32_t sample = 0;
};

// Seed tuple handed to a controller step; the rollout engine adds the sample
// index.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint32_t step = 0;

  StreamId stream(std::uint32_t cycle, std::uint32_t sample) const {
    return StreamId{master_seed, step, cycle, sample};
  }
};

/// Standard-normal variates from one Philox stream via Box-Muller. Counter
/// layout: word 0 = block index, 1 = sample, 2 = cycle, 3 = step.
class NormalStream {
 public:
  explicit NormalStream(const StreamId& id)
      : key_{static_cast<std::uint32_t>(id.master_seed), static_cast<std::uint32_t>(id.master_seed >> 32)},
        sample_(id.sample),
        cycle_(id.cycle),
        step_(id.step) {}

  double next();

  // Uniform on the open interval (0, 1) with 53 random bits.
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
  }

 private:
  void refill();

  Philox4x32::Key key_;
  std::uint32_t sample_;
  std::uint32_t cycle_;
  std::uint32_t step_;
  std::uint32_t block_ = 0;
  std::array<double, 2> cache_{};
  int cached_ = 0;
};

}  // namespace mpopi
