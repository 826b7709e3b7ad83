#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "wsalign/dataset.hpp"

using namespace wsalign;

namespace {

std::vector<int64_t> class_counts(const Dataset& ds) {
  std::vector<int64_t> counts(size_t(ds.num_classes), 0);
  for (int y : ds.labels) counts[size_t(y)]++;
  return counts;
}

}  // namespace

TEST_CASE("make_blobs shapes and determinism") {
  auto [train, test] = make_blobs(4, 8, 25, 0.3, 42);
  CHECK(train.size() == 100);
  CHECK(train.dim() == 8);
  CHECK(train.num_classes == 4);
  CHECK(test.size() == 4 * 6);  // default test_per_class = per_class / 4
  CHECK(test.split == Dataset::Split::test);
  train.validate();
  test.validate();
  for (int64_t c : class_counts(train)) CHECK(c == 25);

  auto [train2, test2] = make_blobs(4, 8, 25, 0.3, 42);
  CHECK(train.features.data == train2.features.data);
  CHECK(train.labels == train2.labels);
  CHECK(test.features.data == test2.features.data);

  auto [train3, t3] = make_blobs(4, 8, 25, 0.3, 43);
  CHECK(train.features.data != train3.features.data);

  // Train and test come from disjoint draws of the same clouds.
  CHECK(train.features.data != std::vector<double>(test.features.data));
}

TEST_CASE("make_blobs explicit test size and validation") {
  auto [train, test] = make_blobs(3, 5, 10, 0.2, 1, 7);
  CHECK(test.size() == 21);
  CHECK_THROWS_AS(make_blobs(1, 5, 10, 0.2, 1), InputError);
  CHECK_THROWS_AS(make_blobs(3, 0, 10, 0.2, 1), InputError);
  CHECK_THROWS_AS(make_blobs(3, 5, 0, 0.2, 1), InputError);
  CHECK_THROWS_AS(make_blobs(3, 5, 10, -0.1, 1), InputError);
}

TEST_CASE("larger spread increases within-class variance") {
  auto [tight, t1] = make_blobs(2, 4, 200, 0.05, 9);
  auto [wide, t2] = make_blobs(2, 4, 200, 0.8, 9);
  auto within_var = [](const Dataset& ds) {
    double acc = 0.0;
    for (int c = 0; c < ds.num_classes; ++c) {
      std::vector<double> mean(size_t(ds.dim()), 0.0);
      int64_t n = 0;
      for (int64_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[size_t(i)] != c) continue;
        ++n;
        for (int64_t d = 0; d < ds.dim(); ++d) mean[size_t(d)] += ds.features.at2(i, d);
      }
      for (double& m : mean) m /= double(n);
      for (int64_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[size_t(i)] != c) continue;
        for (int64_t d = 0; d < ds.dim(); ++d) {
          double diff = ds.features.at2(i, d) - mean[size_t(d)];
          acc += diff * diff;
        }
      }
    }
    return acc;
  };
  CHECK(within_var(wide) > 10.0 * within_var(tight));
}

TEST_CASE("perturb identity parameters return the input unchanged") {
  auto [train, test] = make_blobs(4, 6, 20, 0.3, 5);
  PerturbSpec s;
  s.kind = PerturbSpec::Kind::label_noise;
  s.p = 0.0;
  Dataset out = perturb(train, s, 99);
  CHECK(out.features.data == train.features.data);
  CHECK(out.labels == train.labels);

  s.kind = PerturbSpec::Kind::feature_noise;
  s.eps = 0.0;
  out = perturb(train, s, 99);
  CHECK(out.features.data == train.features.data);

  s.kind = PerturbSpec::Kind::subsample;
  s.q = 1.0;
  out = perturb(train, s, 99);
  CHECK(out.features.data == train.features.data);
  CHECK(out.labels == train.labels);
}

TEST_CASE("label noise flips to a uniform class") {
  auto [train, test] = make_blobs(5, 4, 400, 0.3, 17);
  PerturbSpec s;
  s.kind = PerturbSpec::Kind::label_noise;
  s.p = 1.0;
  Dataset out = perturb(train, s, 3);
  CHECK(out.features.data == train.features.data);
  int64_t changed = 0;
  for (size_t i = 0; i < out.labels.size(); ++i) {
    CHECK(out.labels[i] >= 0);
    CHECK(out.labels[i] < 5);
    if (out.labels[i] != train.labels[i]) ++changed;
  }
  // Uniform over all classes keeps the original with probability 1/5.
  double frac = double(changed) / double(out.labels.size());
  CHECK(frac == doctest::Approx(0.8).epsilon(0.08));

  Dataset again = perturb(train, s, 3);
  CHECK(again.labels == out.labels);
}

TEST_CASE("feature noise is multiplicative and leaves labels alone") {
  auto [train, test] = make_blobs(3, 4, 100, 0.3, 17);
  PerturbSpec s;
  s.kind = PerturbSpec::Kind::feature_noise;
  s.eps = 0.1;
  Dataset out = perturb(train, s, 3);
  CHECK(out.labels == train.labels);
  CHECK(out.features.data != train.features.data);
  double max_rel = 0.0;
  for (size_t i = 0; i < out.features.data.size(); ++i) {
    double base = train.features.data[i];
    if (std::abs(base) < 1e-9) continue;
    max_rel = std::max(max_rel, std::abs(out.features.data[i] / base - 1.0));
  }
  CHECK(max_rel > 1e-4);   // noise actually applied
  CHECK(max_rel < 1.0);    // multiplicative N(1, 0.1^2) stays near 1
}

TEST_CASE("subsample keeps the requested fraction") {
  auto [train, test] = make_blobs(4, 4, 50, 0.3, 23);
  PerturbSpec s;
  s.kind = PerturbSpec::Kind::subsample;
  s.q = 0.1;
  Dataset out = perturb(train, s, 8);
  CHECK(out.size() == 20);  // floor(0.1 * 200)
  out.validate();

  s.q = 0.0001;
  Dataset tiny = perturb(train, s, 8);
  CHECK(tiny.size() == 1);  // never empty
}

TEST_CASE("imbalance keeps favored classes at the high fraction") {
  auto [train, test] = make_blobs(4, 4, 100, 0.3, 31);
  PerturbSpec s;
  s.kind = PerturbSpec::Kind::imbalance;
  s.favored_classes = {0, 1};
  s.keep_high = 0.9;
  s.keep_low = 0.1;
  Dataset out = perturb(train, s, 4);
  auto counts = class_counts(out);
  CHECK(counts[0] == 90);
  CHECK(counts[1] == 90);
  CHECK(counts[2] == 10);
  CHECK(counts[3] == 10);
}

TEST_CASE("dataset csv round trip") {
  auto [train, test] = make_blobs(3, 5, 8, 0.3, 77);
  std::string path = (std::filesystem::temp_directory_path() /
                      "wsalign_test_roundtrip.csv").string();
  save_dataset_csv(train, path);
  Dataset back = load_dataset_csv(path, 3);
  CHECK(back.features.data == train.features.data);
  CHECK(back.labels == train.labels);
  CHECK(back.num_classes == 3);

  // Inferred class count = max label + 1.
  Dataset inferred = load_dataset_csv(path, -1);
  CHECK(inferred.num_classes == 3);
  std::remove(path.c_str());
}

TEST_CASE("dataset csv rejects malformed input") {
  auto tmp = std::filesystem::temp_directory_path();
  auto write = [](const std::string& p, const std::string& body) {
    FILE* f = std::fopen(p.c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs(body.c_str(), f);
    std::fclose(f);
  };
  std::string bad_header = (tmp / "wsalign_bad_header.csv").string();
  write(bad_header, "label,x0,x1\n0,1.0,2.0\n");
  CHECK_THROWS_AS(load_dataset_csv(bad_header, 2), ParseError);

  std::string bad_value = (tmp / "wsalign_bad_value.csv").string();
  write(bad_value, "label,f0,f1\n0,1.0,zebra\n");
  CHECK_THROWS_AS(load_dataset_csv(bad_value, 2), ParseError);

  std::string bad_label = (tmp / "wsalign_bad_label.csv").string();
  write(bad_label, "label,f0,f1\n7,1.0,2.0\n");
  CHECK_THROWS_AS(load_dataset_csv(bad_label, 2), InputError);

  std::remove(bad_header.c_str());
  std::remove(bad_value.c_str());
  std::remove(bad_label.c_str());
}
