#include "wsalign/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "wsalign/common.hpp"
#include "wsalign/regularizer.hpp"

namespace wsalign {

std::pair<Dataset, Dataset> StudySetup::make_data() const {
  return make_blobs(classes, dim, per_class, spread, data_seed,
                    test_per_class);
}

std::vector<int64_t> StudySetup::dims() const {
  std::vector<int64_t> d;
  d.push_back(dim);
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(classes);
  return d;
}

std::string factor_name(Factor f) {
  switch (f) {
    case Factor::optimizer: return "optimizer";
    case Factor::learning_rate: return "learning_rate";
    case Factor::weight_decay: return "weight_decay";
    case Factor::batch_size: return "batch_size";
    case Factor::feature_noise: return "feature_noise";
    case Factor::label_noise: return "label_noise";
    case Factor::data_size: return "data_size";
    case Factor::label_imbalance: return "label_imbalance";
  }
  return "unknown";
}

std::vector<ConditionSpec> default_condition_specs() {
  return {
      {Factor::optimizer, "sgd:0.03", "adam:0.0003"},
      {Factor::learning_rate, "0.03", "0.001"},
      {Factor::weight_decay, "1e-05", "0.001"},
      {Factor::batch_size, "32", "1024"},
      {Factor::feature_noise, "0", "0.1"},
      {Factor::label_noise, "0", "0.1"},
      {Factor::data_size, "1", "0.1"},
      {Factor::label_imbalance, "none", "first_half"},
  };
}

namespace {

double parse_num(const std::string& s, const std::string& what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw InputError(what + " setting '" + s + "' is not a number");
  }
  return v;
}

// A resolved condition setting: training hyperparameters plus an optional
// train-split perturbation.
struct Setting {
  TrainConfig train;
  std::optional<PerturbSpec> perturb;
};

Setting resolve_setting(Factor factor, const std::string& value,
                        const StudySetup& base) {
  Setting s;
  s.train = base.train;
  switch (factor) {
    case Factor::optimizer: {
      size_t colon = value.find(':');
      std::string name = value.substr(0, colon);
      if (colon == std::string::npos || name.empty()) {
        throw InputError("optimizer setting must look like 'sgd:0.03'");
      }
      if (name == "sgd") {
        s.train.optimizer = OptKind::sgd;
      } else if (name == "adam") {
        s.train.optimizer = OptKind::adam;
      } else {
        throw InputError("unknown optimizer '" + name + "'");
      }
      s.train.learning_rate = parse_num(value.substr(colon + 1), "optimizer lr");
      return s;
    }
    case Factor::learning_rate:
      s.train.learning_rate = parse_num(value, "learning_rate");
      return s;
    case Factor::weight_decay:
      s.train.weight_decay = parse_num(value, "weight_decay");
      return s;
    case Factor::batch_size:
      s.train.batch_size = int(parse_num(value, "batch_size"));
      return s;
    case Factor::feature_noise: {
      double eps = parse_num(value, "feature_noise");
      if (eps != 0.0) {
        PerturbSpec p;
        p.kind = PerturbSpec::Kind::feature_noise;
        p.eps = eps;
        s.perturb = p;
      }
      return s;
    }
    case Factor::label_noise: {
      double prob = parse_num(value, "label_noise");
      if (prob != 0.0) {
        PerturbSpec p;
        p.kind = PerturbSpec::Kind::label_noise;
        p.p = prob;
        s.perturb = p;
      }
      return s;
    }
    case Factor::data_size: {
      double q = parse_num(value, "data_size");
      if (q != 1.0) {
        PerturbSpec p;
        p.kind = PerturbSpec::Kind::subsample;
        p.q = q;
        s.perturb = p;
      }
      return s;
    }
    case Factor::label_imbalance: {
      if (value == "none") return s;
      if (value != "first_half") {
        throw InputError("label_imbalance setting must be 'none' or 'first_half'");
      }
      PerturbSpec p;
      p.kind = PerturbSpec::Kind::imbalance;
      for (int c = 0; c < (base.classes + 1) / 2; ++c) {
        p.favored_classes.push_back(c);
      }
      p.keep_high = 0.9;
      p.keep_low = 0.1;
      s.perturb = p;
      return s;
    }
  }
  throw InputError("unknown factor");
}

// Distinct deterministic sub-seeds per (replicate, slot).
uint64_t sub_seed(uint64_t seed, int slot) {
  return Rng::keyed(seed, {0x5EEDu, uint64_t(slot)}).next_u64();
}

Model train_under(const Setting& setting, const StudySetup& base,
                  const Dataset& train_data, uint64_t seed) {
  Dataset data = train_data;
  if (setting.perturb) {
    data = perturb(train_data, *setting.perturb, seed);
  }
  // Batch sizes beyond the dataset degenerate to full-batch steps.
  TrainConfig cfg = setting.train;
  cfg.batch_size = int(std::min<int64_t>(cfg.batch_size, data.size()));
  Model init = make_mlp(base.dims(), base.init, seed);
  return train(init, data, cfg, no_regularizer(), seed).model;
}

}  // namespace

ConditionMatrixResult run_condition_matrix(
    const std::vector<ConditionSpec>& specs, const StudySetup& base,
    const std::vector<uint64_t>& seeds) {
  if (specs.empty()) throw InputError("condition matrix needs at least one spec");
  if (seeds.empty()) throw InputError("condition matrix needs at least one seed");
  for (const ConditionSpec& spec : specs) {
    if (spec.setting_same == spec.setting_diff) {
      throw InputError("factor " + factor_name(spec.factor) +
                       " has identical settings");
    }
  }
  auto [train_data, test_data] = base.make_data();

  ConditionMatrixResult result;
  for (const ConditionSpec& spec : specs) {
    Setting same = resolve_setting(spec.factor, spec.setting_same, base);
    Setting diff = resolve_setting(spec.factor, spec.setting_diff, base);
    ConditionReport row;
    row.factor = spec.factor;
    row.setting_same = spec.setting_same;
    row.setting_diff = spec.setting_diff;
    int ok = 0;
    for (uint64_t seed : seeds) {
      try {
        Model m0 = train_under(same, base, train_data, sub_seed(seed, 0));
        Model m1 = train_under(same, base, train_data, sub_seed(seed, 1));
        Model m2 = train_under(diff, base, train_data, sub_seed(seed, 2));
        row.mean_scope_kl +=
            mean_scope_kl(scope_estimate(m0), scope_estimate(m2));
        row.barrier_same +=
            barrier(m0, m1, test_data).first.barrier_loss;
        row.barrier_diff +=
            barrier(m0, m2, test_data).first.barrier_loss;
        ++ok;
      } catch (const NumericError&) {
        row.failed = true;
      }
    }
    if (ok > 0) {
      row.mean_scope_kl /= double(ok);
      row.barrier_same /= double(ok);
      row.barrier_diff /= double(ok);
      row.diff = row.barrier_diff - row.barrier_same;
    } else {
      row.failed = true;
    }
    result.rows.push_back(std::move(row));
  }

  std::vector<double> kl, ba_diff, diff;
  for (const ConditionReport& row : result.rows) {
    if (row.failed) continue;
    kl.push_back(row.mean_scope_kl);
    ba_diff.push_back(row.barrier_diff);
    diff.push_back(row.diff);
    if (row.barrier_same <= row.barrier_diff) ++result.factors_same_le_diff;
  }
  if (kl.size() >= 2) {
    result.spearman_kl_vs_barrier = spearman(kl, ba_diff);
    result.spearman_kl_vs_diff = spearman(kl, diff);
  }
  return result;
}

WsaBarrierStudyResult run_wsa_barrier_study(const StudySetup& base,
                                            const std::vector<uint64_t>& seeds,
                                            bool with_matching,
                                            double lambda) {
  if (seeds.size() < 2) throw InputError("barrier study needs >= 2 seeds");
  if (!(lambda > 0.0)) throw InputError("barrier study lambda must be positive");
  auto [train_data, test_data] = base.make_data();

  WsaBarrierStudyResult result;
  for (size_t i = 0; i + 1 < seeds.size(); i += 2) {
    uint64_t sa = seeds[i], sb = seeds[i + 1];
    Model init_a = make_mlp(base.dims(), base.init, sa);
    Model init_b = make_mlp(base.dims(), base.init, sb);
    // Both arms share the target so their scopes are pulled together.
    ScopeTarget target = target_from_scope(scope_estimate(init_a),
                                           ScopeTarget::Origin::init_scope);

    Model base_a = train(init_a, train_data, base.train, no_regularizer(), sa).model;
    Model base_b = train(init_b, train_data, base.train, no_regularizer(), sb).model;
    Model wsa_a = train(init_a, train_data, base.train,
                        wsa_reg(lambda, target), sa).model;
    Model wsa_b = train(init_b, train_data, base.train,
                        wsa_reg(lambda, target), sb).model;

    WsaBarrierStudyResult::PairRow row;
    row.seed_a = sa;
    row.seed_b = sb;
    BarrierReport bn = barrier(base_a, base_b, test_data).first;
    row.baseline_naive = bn.barrier_loss;
    row.baseline_naive_err = bn.barrier_err;
    BarrierReport wn = barrier(wsa_a, wsa_b, test_data).first;
    row.wsa_naive = wn.barrier_loss;
    row.wsa_naive_err = wn.barrier_err;
    if (with_matching) {
      Permutation pb = match_weights(base_a, base_b);
      BarrierReport bm = barrier(base_a, base_b, test_data, &pb).first;
      row.baseline_matched = bm.barrier_loss;
      row.baseline_matched_err = bm.barrier_err;
      Permutation pw = match_weights(wsa_a, wsa_b);
      BarrierReport wm = barrier(wsa_a, wsa_b, test_data, &pw).first;
      row.wsa_matched = wm.barrier_loss;
      row.wsa_matched_err = wm.barrier_err;
    }
    result.pairs.push_back(row);
  }
  double n = double(result.pairs.size());
  for (const auto& row : result.pairs) {
    result.mean_baseline_naive += row.baseline_naive / n;
    result.mean_baseline_matched += row.baseline_matched / n;
    result.mean_wsa_naive += row.wsa_naive / n;
    result.mean_wsa_matched += row.wsa_matched / n;
    result.mean_baseline_naive_err += row.baseline_naive_err / n;
    result.mean_baseline_matched_err += row.baseline_matched_err / n;
    result.mean_wsa_naive_err += row.wsa_naive_err / n;
    result.mean_wsa_matched_err += row.wsa_matched_err / n;
  }
  return result;
}

ScalingStudyResult run_scaling_study(const StudySetup& base,
                                     const std::vector<uint64_t>& seeds,
                                     int layer_index,
                                     const std::vector<double>& alphas) {
  if (seeds.size() < 2) throw InputError("scaling study needs >= 2 seeds");
  if (alphas.empty()) throw InputError("scaling study needs at least one alpha");
  for (double a : alphas) {
    if (!(a > 0.0)) throw InputError("scaling alphas must be positive");
  }
  auto [train_data, test_data] = base.make_data();

  ScalingStudyResult result;
  result.alphas = alphas;
  result.layer_index = layer_index;
  for (size_t i = 0; i + 1 < seeds.size(); i += 2) {
    uint64_t sa = seeds[i], sb = seeds[i + 1];
    Model w1 = train(make_mlp(base.dims(), base.init, sa), train_data,
                     base.train, no_regularizer(), sa).model;
    Model w2 = train(make_mlp(base.dims(), base.init, sb), train_data,
                     base.train, no_regularizer(), sb).model;
    ScalingStudyResult::Row row;
    row.seed_a = sa;
    row.seed_b = sb;
    for (double alpha : alphas) {
      Model w2s = alpha == 1.0 ? w2 : scale_layer(w2, layer_index, alpha);
      row.barriers.push_back(
          barrier(w1, w2s, test_data).first.barrier_loss);
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

double window_mean_accuracy(const std::vector<RoundRecord>& rounds, int center,
                            int window) {
  int last = std::min<int>(center, int(rounds.size()) - 1);
  int first = std::max(0, last - window + 1);
  double total = 0.0;
  for (int r = first; r <= last; ++r) {
    total += rounds[size_t(r)].test_accuracy;
  }
  return total / double(last - first + 1);
}

}  // namespace

LambdaSweepResult run_lambda_sweep(const std::vector<double>& lambdas,
                                   const FLConfig& base, const Dataset& train,
                                   const Dataset& test, const Model& init,
                                   const std::vector<uint64_t>& seeds,
                                   int early_round, int window) {
  if (lambdas.empty()) throw InputError("lambda sweep needs values");
  if (std::find(lambdas.begin(), lambdas.end(), 0.0) == lambdas.end()) {
    throw InputError("lambda sweep must include 0");
  }
  for (double l : lambdas) {
    if (l < 0.0) throw InputError("lambda values must be >= 0");
  }
  if (seeds.empty()) throw InputError("lambda sweep needs seeds");
  if (base.rounds < 1) throw InputError("lambda sweep needs rounds >= 1");
  if (window < 1) throw InputError("lambda sweep window must be >= 1");
  if (early_round < 0) early_round = base.rounds / 3;
  if (early_round >= base.rounds) {
    throw InputError("early_round must lie in [0, rounds)");
  }

  LambdaSweepResult result;
  result.early_round = early_round;
  result.window = window;
  for (double lambda : lambdas) {
    LambdaSweepRow row;
    row.lambda = lambda;
    for (uint64_t seed : seeds) {
      FLConfig cfg = base;
      cfg.algorithm = FlAlgorithm::fedavg_wsa;
      cfg.lambda = lambda;
      cfg.seed = seed;
      FederationResult run = run_federation(cfg, train, test, init);
      row.acc_early += window_mean_accuracy(run.rounds, early_round, window);
      row.acc_final +=
          window_mean_accuracy(run.rounds, base.rounds - 1, window);
    }
    row.acc_early /= double(seeds.size());
    row.acc_final /= double(seeds.size());
    result.rows.push_back(row);
  }
  return result;
}

PredefinedAblationResult run_predefined_ablation(
    const std::vector<GaussianParams>& targets, const FLConfig& base,
    const Dataset& train, const Dataset& test, const Model& init,
    const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw InputError("ablation needs seeds");
  if (base.rounds < 1) throw InputError("ablation needs rounds >= 1");
  for (const GaussianParams& t : targets) {
    if (!(t.sigma > 0.0)) throw InputError("predefined sigma must be positive");
  }
  const int window = 5;

  PredefinedAblationResult result;
  auto run_arm = [&](const std::string& name, FlAlgorithm algo,
                     const std::optional<GaussianParams>& predef) {
    PredefinedAblationResult::Arm arm;
    arm.name = name;
    for (uint64_t seed : seeds) {
      FLConfig cfg = base;
      cfg.algorithm = algo;
      cfg.predefined_target = predef;
      cfg.seed = seed;
      FederationResult run = run_federation(cfg, train, test, init);
      double acc = window_mean_accuracy(run.rounds, base.rounds - 1, window);
      arm.final_acc_by_seed.push_back(acc);
      arm.mean_final_acc += acc / double(seeds.size());
    }
    result.arms.push_back(std::move(arm));
  };

  run_arm("fedavg", FlAlgorithm::fedavg, std::nullopt);
  run_arm("fused", FlAlgorithm::fedavg_wsa, std::nullopt);
  for (const GaussianParams& t : targets) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "N(%g,%g)", t.mu, t.sigma);
    run_arm(buf, FlAlgorithm::fedavg_wsa, t);
  }
  return result;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InputError("spearman needs equal-length lists");
  size_t n = xs.size();
  if (n < 2) throw InputError("spearman needs >= 2 points");
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t(0));
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      double avg = 0.5 * double(i + j) + 1.0;  // average rank, 1-based
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> rx = ranks(xs), ry = ranks(ys);
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i] / double(n);
    my += ry[i] / double(n);
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace wsalign
