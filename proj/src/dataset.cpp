#include "wsalign/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wsalign/common.hpp"

namespace wsalign {

void Dataset::validate() const {
  if (features.shape.size() != 2) {
    throw ShapeError("dataset features must be 2-D, got " +
                     shape_str(features.shape));
  }
  if (int64_t(labels.size()) != features.rows()) {
    throw ShapeError("dataset has " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(features.rows()) +
                     " rows");
  }
  if (num_classes <= 0) throw InputError("dataset num_classes must be positive");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw InputError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
  if (!features.all_finite()) throw NumericError("dataset features contain non-finite values");
}

namespace {

// Unit-norm direction for one class mean.
std::vector<double> class_mean(int dim, uint64_t seed, int cls) {
  Rng rng = Rng::keyed(seed, {0xB10B5u, uint64_t(cls)});
  std::vector<double> v(static_cast<size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.next_gaussian();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-12);
  for (double& x : v) x /= norm;
  return v;
}

Dataset sample_blobs(int num_classes, int dim, int per_class, double spread,
                     uint64_t seed, uint64_t stream, Dataset::Split split) {
  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.features = Tensor::zeros({int64_t(num_classes) * per_class, dim});
  ds.labels.resize(size_t(num_classes) * size_t(per_class));
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> mean = class_mean(dim, seed, c);
    Rng rng = Rng::keyed(seed, {stream, uint64_t(c)});
    for (int i = 0; i < per_class; ++i) {
      int64_t row = int64_t(c) * per_class + i;
      ds.labels[size_t(row)] = c;
      for (int d = 0; d < dim; ++d) {
        ds.features.at2(row, d) = mean[size_t(d)] + spread * rng.next_gaussian();
      }
    }
  }
  return ds;
}

}  // namespace

std::pair<Dataset, Dataset> make_blobs(int num_classes, int dim, int per_class,
                                       double spread, uint64_t seed,
                                       int test_per_class) {
  if (num_classes < 2) throw InputError("make_blobs needs >= 2 classes");
  if (dim < 1) throw InputError("make_blobs needs dim >= 1");
  if (per_class < 1) throw InputError("make_blobs needs per_class >= 1");
  if (!(spread > 0.0)) throw InputError("make_blobs needs spread > 0");
  if (test_per_class < 0) test_per_class = std::max(1, per_class / 4);
  if (test_per_class < 1) throw InputError("make_blobs needs test_per_class >= 1");
  Dataset train = sample_blobs(num_classes, dim, per_class, spread, seed,
                               0x7141u, Dataset::Split::train);
  Dataset test = sample_blobs(num_classes, dim, test_per_class, spread, seed,
                              0x7E57u, Dataset::Split::test);
  return {std::move(train), std::move(test)};
}

namespace {

Dataset keep_rows(const Dataset& ds, std::vector<int64_t> rows) {
  std::sort(rows.begin(), rows.end());
  Dataset out;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  out.features = Tensor::zeros({int64_t(rows.size()), ds.dim()});
  out.labels.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.labels[i] = ds.labels[size_t(rows[i])];
    for (int64_t d = 0; d < ds.dim(); ++d) {
      out.features.at2(int64_t(i), d) = ds.features.at2(rows[i], d);
    }
  }
  return out;
}

}  // namespace

Dataset perturb(const Dataset& ds, const PerturbSpec& spec, uint64_t seed) {
  ds.validate();
  switch (spec.kind) {
    case PerturbSpec::Kind::label_noise: {
      if (spec.p < 0.0 || spec.p > 1.0) {
        throw InputError("label noise probability must lie in [0, 1]");
      }
      if (spec.p == 0.0) return ds;
      Dataset out = ds;
      Rng rng = Rng::keyed(seed, {0x1AB31u});
      for (int& y : out.labels) {
        if (rng.next_double() < spec.p) {
          y = int(rng.next_index(out.num_classes));
        }
      }
      return out;
    }
    case PerturbSpec::Kind::feature_noise: {
      if (spec.eps < 0.0) throw InputError("feature noise eps must be >= 0");
      if (spec.eps == 0.0) return ds;
      Dataset out = ds;
      Rng rng = Rng::keyed(seed, {0xF3A7u});
      for (double& x : out.features.data) {
        x *= 1.0 + spec.eps * rng.next_gaussian();
      }
      return out;
    }
    case PerturbSpec::Kind::subsample: {
      if (!(spec.q > 0.0) || spec.q > 1.0) {
        throw InputError("subsample fraction must lie in (0, 1]");
      }
      if (spec.q == 1.0) return ds;
      int64_t keep = std::max<int64_t>(1, int64_t(spec.q * double(ds.size())));
      std::vector<int64_t> rows(size_t(ds.size()));
      std::iota(rows.begin(), rows.end(), 0);
      Rng rng = Rng::keyed(seed, {0x5AB5u});
      rng.shuffle(rows);
      rows.resize(size_t(keep));
      return keep_rows(ds, std::move(rows));
    }
    case PerturbSpec::Kind::imbalance: {
      for (double k : {spec.keep_high, spec.keep_low}) {
        if (!(k > 0.0) || k > 1.0) {
          throw InputError("imbalance keep fractions must lie in (0, 1]");
        }
      }
      for (int c : spec.favored_classes) {
        if (c < 0 || c >= ds.num_classes) {
          throw InputError("favored class " + std::to_string(c) +
                           " outside [0, " + std::to_string(ds.num_classes) +
                           ")");
        }
      }
      if (spec.keep_high == 1.0 && spec.keep_low == 1.0) return ds;
      std::vector<bool> favored(size_t(ds.num_classes), false);
      for (int c : spec.favored_classes) favored[size_t(c)] = true;
      std::vector<int64_t> kept;
      for (int c = 0; c < ds.num_classes; ++c) {
        std::vector<int64_t> rows;
        for (int64_t i = 0; i < ds.size(); ++i) {
          if (ds.labels[size_t(i)] == c) rows.push_back(i);
        }
        if (rows.empty()) continue;
        double frac = favored[size_t(c)] ? spec.keep_high : spec.keep_low;
        int64_t keep = std::max<int64_t>(
            1, int64_t(std::llround(frac * double(rows.size()))));
        keep = std::min<int64_t>(keep, int64_t(rows.size()));
        Rng rng = Rng::keyed(seed, {0x1BA1u, uint64_t(c)});
        rng.shuffle(rows);
        kept.insert(kept.end(), rows.begin(), rows.begin() + keep);
      }
      return keep_rows(ds, std::move(kept));
    }
  }
  throw InputError("unknown perturbation kind");
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream f(path);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  f << "label";
  for (int64_t d = 0; d < ds.dim(); ++d) f << ",f" << d;
  f << "\n";
  for (int64_t i = 0; i < ds.size(); ++i) {
    f << ds.labels[size_t(i)];
    for (int64_t d = 0; d < ds.dim(); ++d) {
      f << "," << fmt17(ds.features.at2(i, d));
    }
    f << "\n";
  }
  if (!f.good()) throw InputError("short write to '" + path + "'");
}

namespace {

double parse_double_strict(const std::string& tok, const std::string& where) {
  if (tok.empty()) throw ParseError(where + ": empty numeric field");
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + tok.size()) {
    throw ParseError(where + ": '" + tok + "' is not a number");
  }
  return v;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path, int num_classes) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw ParseError(path + ":1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
  }
  if (cols.empty() || cols[0] != "label") {
    throw ParseError(path + ":1: header must start with 'label'");
  }
  int dim = int(cols.size()) - 1;
  if (dim < 1) throw ParseError(path + ":1: no feature columns");
  for (int d = 0; d < dim; ++d) {
    if (cols[size_t(d) + 1] != "f" + std::to_string(d)) {
      throw ParseError(path + ":1: expected column f" + std::to_string(d) +
                       ", got '" + cols[size_t(d) + 1] + "'");
    }
  }
  std::vector<int> labels;
  std::vector<double> values;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    std::stringstream ss(line);
    std::string tok;
    int field = 0;
    while (std::getline(ss, tok, ',')) {
      if (field == 0) {
        double y = parse_double_strict(tok, where);
        if (y < 0 || y != std::floor(y)) {
          throw ParseError(where + ": label '" + tok +
                           "' is not a non-negative integer");
        }
        labels.push_back(int(y));
      } else {
        values.push_back(parse_double_strict(tok, where));
      }
      ++field;
    }
    if (field != dim + 1) {
      throw ParseError(where + ": expected " + std::to_string(dim + 1) +
                       " fields, got " + std::to_string(field));
    }
  }
  if (labels.empty()) throw ParseError(path + ": no data rows");
  Dataset ds;
  ds.features = Tensor({int64_t(labels.size()), dim}, std::move(values));
  ds.labels = std::move(labels);
  if (num_classes < 0) {
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    num_classes = max_label + 1;
  }
  ds.num_classes = num_classes;
  ds.validate();
  return ds;
}

}  // namespace wsalign
