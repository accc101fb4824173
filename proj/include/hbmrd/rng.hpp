#pragma once

#include <cstdint>

// Counter-based RNG: every random quantity in the simulator is a pure
// function of (seed, stream, coordinates). No generator state is ever
// stored, which keeps cell parameters referentially transparent and
// campaigns order-independent under --jobs N.

namespace hbmrd::rng {

// Named sub-streams. All randomness flows from one global seed through
// these stream ids; adding a stream never perturbs the others.
enum Stream : uint64_t {
  kRowFactor = 1,
  kRowDesignation = 2,
  kRowBeta = 3,
  kRowJitterScale = 4,
  kRowBulkScale = 5,
  kLadderPosition = 6,
  kForcedPosition = 7,
  kCellThreshold = 8,
  kCellOrientation = 9,
  kCellRetention = 10,
  kWordFactor = 11,
  kTrialJitter = 12,
  kFloorOffset = 13,
  kForcedLevel = 14,
  kCampaignCell = 15,
  kTraceGen = 16,
  kHiddenTrr = 17,
};

constexpr uint64_t splitmix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t combine(uint64_t h, uint64_t v) {
  return splitmix(h ^ (v * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL));
}

template <class... Ts>
constexpr uint64_t hash(uint64_t seed, Ts... vs) {
  uint64_t h = splitmix(seed ^ 0x243f6a8885a308d3ULL);
  ((h = combine(h, static_cast<uint64_t>(vs))), ...);
  return h;
}

// Uniform in (0, 1]: never returns 0 so log(u) is always finite.
inline double u01(uint64_t h) {
  return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

// Uniform in [-1, 1].
inline double upm1(uint64_t h) {
  return u01(h) * 2.0 - 1.0;
}

// Inverse normal CDF (Acklam's rational approximation, |rel err| < 1.2e-9).
double normal_quantile(double p);

inline double normal(uint64_t h) { return normal_quantile(u01(h)); }

}  // namespace hbmrd::rng
