#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rwce/common.hpp"

namespace rwce {

enum class Split { kTrain, kVal, kCal, kTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct Partition {
  Matrix x;                       // one row per example
  IntVector y;                    // 0-based labels
  std::vector<std::int64_t> ids;  // stable example ids, disjoint across partitions

  Eigen::Index size() const { return x.rows(); }
};

struct SplitDataset {
  Partition train, val, cal, test;
  int feature_dim = 0;
  int num_classes = 0;
  std::string provenance;

  const Partition& part(Split s) const;
  Partition& part(Split s);
  Eigen::Index total_size() const;
};

// Gaussian-mixture benchmark: per-class cluster means drawn once from the
// seed, then one exchangeable i.i.d. stream split in order into the four
// partitions. Classes with several clusters give overlapping, multimodal
// regions a small network cannot fully separate, which is where training
// losses start to differ in prediction-set efficiency.
struct SyntheticSpec {
  int num_classes = 10;
  int feature_dim = 32;
  int clusters_per_class = 3;
  double separation = 3.4;  // mean separation relative to noise_scale
  double noise_scale = 1.0;
  long n_train = 8000;
  long n_val = 1000;
  long n_cal = 1000;
  long n_test = 2000;
  std::uint64_t seed = 0;
};

void validate_synthetic_spec(const SyntheticSpec& spec);
SplitDataset generate_synthetic(const SyntheticSpec& spec);

// CSV schema: header f0..f{d-1},label[,split]; labels are 1-based on disk.
struct CsvSchema {
  int num_classes = 0;        // 0 = infer from the file
  bool standardize = false;   // z-score all partitions with train-split stats
  // Used only when the file has no split column:
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double cal_fraction = 0.1;  // test gets the remainder
  std::uint64_t split_seed = 0;
};

SplitDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
void save_csv(const SplitDataset& data, const std::filesystem::path& path);

// Pools cal+test and redraws the two partitions (train/val untouched).
// Fractions are taken of the pool; together they may use all of it.
SplitDataset resplit(const SplitDataset& data, double cal_fraction, double test_fraction,
                     std::uint64_t seed);

// Per-dimension z-score using train-split statistics, applied everywhere.
void standardize_features(SplitDataset& data);

}  // namespace rwce
