#pragma once

#include <cstdint>
#include <random>

namespace rwce {

// All randomness in the toolkit flows through named streams derived from the
// three run seeds. A stream is identified by (seed, tag, indices...) and is
// independent of call history, so workers and resumed runs draw identical
// values without shared state.

enum class Stream : std::uint64_t {
  kModelInit = 0x01,
  kBatchShuffle = 0x02,
  kTieBreakTrain = 0x03,
  kCalibrationU = 0x04,
  kPredictionU = 0x05,
  kResplit = 0x06,
  kSyntheticData = 0x07,
  kCsvSplit = 0x08,
  kCoverageTrial = 0x09,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a) { return splitmix64(a); }

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix_seed(splitmix64(a) ^ splitmix64(b ^ 0x6a09e667f3bcc909ULL), rest...);
}

template <typename... Ids>
std::mt19937_64 make_engine(std::uint64_t seed, Stream stream, Ids... ids) {
  return std::mt19937_64(mix_seed(seed, static_cast<std::uint64_t>(stream),
                                  static_cast<std::uint64_t>(ids)...));
}

// One U(0,1) draw addressed by stream coordinates.
template <typename... Ids>
double uniform_unit(std::uint64_t seed, Stream stream, Ids... ids) {
  auto eng = make_engine(seed, stream, ids...);
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

}  // namespace rwce
