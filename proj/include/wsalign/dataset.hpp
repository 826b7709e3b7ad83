#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsalign/tensor.hpp"

namespace wsalign {

struct Dataset {
  Tensor features;          // [N x d]
  std::vector<int> labels;  // values in [0, num_classes)
  int num_classes = 0;
  enum class Split { train, test } split = Split::train;

  int64_t size() const { return features.rows(); }
  int64_t dim() const { return features.cols(); }
  void validate() const;
};

// Synthetic Gaussian blob classification data. Class means are drawn on the
// unit sphere from a stream keyed on the seed; train and test come from
// disjoint streams of the same clouds. test_per_class < 0 means per_class/4
// (at least 1).
std::pair<Dataset, Dataset> make_blobs(int num_classes, int dim, int per_class,
                                       double spread, uint64_t seed,
                                       int test_per_class = -1);

struct PerturbSpec {
  enum class Kind { label_noise, feature_noise, subsample, imbalance } kind;
  double p = 0.0;    // label_noise: flip probability
  double eps = 0.0;  // feature_noise: std of the multiplicative N(1, eps^2)
  double q = 1.0;    // subsample: kept fraction
  std::vector<int> favored_classes;  // imbalance: classes kept at keep_high
  double keep_high = 0.9;
  double keep_low = 0.1;
};

// Applies one data-quality transformation; deterministic given seed. Identity
// parameters (p=0, eps=0, q=1) return the input bitwise unchanged.
Dataset perturb(const Dataset& ds, const PerturbSpec& spec, uint64_t seed);

// CSV with header label,f0,f1,... and floats at exact-round-trip precision.
void save_dataset_csv(const Dataset& ds, const std::string& path);
Dataset load_dataset_csv(const std::string& path, int num_classes = -1);

}  // namespace wsalign
