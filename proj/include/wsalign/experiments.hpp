#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wsalign/dataset.hpp"
#include "wsalign/engine.hpp"
#include "wsalign/federated.hpp"
#include "wsalign/merge.hpp"
#include "wsalign/model.hpp"

namespace wsalign {

// Shared desk-scale study setup: data generation, architecture, and the base
// training recipe each study perturbs.
struct StudySetup {
  int classes = 10;
  int dim = 20;
  int per_class = 200;
  int test_per_class = 50;
  double spread = 0.30;
  uint64_t data_seed = 7;
  std::vector<int64_t> hidden = {32, 32};
  InitKind init = InitKind::kaiming_normal;
  TrainConfig train;  // per-study functions override pieces of this

  std::pair<Dataset, Dataset> make_data() const;
  std::vector<int64_t> dims() const;
};

enum class Factor {
  optimizer,
  learning_rate,
  weight_decay,
  batch_size,
  feature_noise,
  label_noise,
  data_size,
  label_imbalance,
};

std::string factor_name(Factor f);

// One row of the condition matrix: train M0, M1 under setting_same and M2
// under setting_diff, then compare scopes and barriers.
struct ConditionSpec {
  Factor factor;
  std::string setting_same;
  std::string setting_diff;
};

// The eight factors with their reference settings (optimizer sgd/adam,
// lr 0.03/0.001, decay 1e-5/1e-3, batch 32/1024, feature noise 0/0.1,
// label noise 0/0.1, data fraction 1.0/0.1, imbalance first/second half).
std::vector<ConditionSpec> default_condition_specs();

struct ConditionReport {
  Factor factor;
  std::string setting_same;
  std::string setting_diff;
  double mean_scope_kl = 0.0;  // scope divergence between M0 and M2
  double barrier_same = 0.0;   // Ba(=): barrier(M0, M1)
  double barrier_diff = 0.0;   // Ba(!=): barrier(M0, M2)
  double diff = 0.0;           // barrier_diff - barrier_same
  bool failed = false;
};

struct ConditionMatrixResult {
  std::vector<ConditionReport> rows;       // seed-averaged, one per factor
  double spearman_kl_vs_diff = 0.0;        // rank corr of KL and Diff column
  double spearman_kl_vs_barrier = 0.0;     // rank corr of KL and Ba(!=)
  int factors_same_le_diff = 0;            // count of Ba(=) <= Ba(!=)
};

ConditionMatrixResult run_condition_matrix(
    const std::vector<ConditionSpec>& specs, const StudySetup& base,
    const std::vector<uint64_t>& seeds);

// Barrier comparison of independently trained pairs, with/without a fixed
// init-scope WSA penalty and with/without permutation matching.
struct WsaBarrierStudyResult {
  // Unsuffixed fields are loss barriers; *_err are the error-rate barriers
  // taken from the same interpolation curves.
  struct PairRow {
    uint64_t seed_a = 0, seed_b = 0;
    double baseline_naive = 0.0, baseline_matched = 0.0;
    double wsa_naive = 0.0, wsa_matched = 0.0;
    double baseline_naive_err = 0.0, baseline_matched_err = 0.0;
    double wsa_naive_err = 0.0, wsa_matched_err = 0.0;
  };
  std::vector<PairRow> pairs;
  double mean_baseline_naive = 0.0, mean_baseline_matched = 0.0;
  double mean_wsa_naive = 0.0, mean_wsa_matched = 0.0;
  double mean_baseline_naive_err = 0.0, mean_baseline_matched_err = 0.0;
  double mean_wsa_naive_err = 0.0, mean_wsa_matched_err = 0.0;
};

WsaBarrierStudyResult run_wsa_barrier_study(const StudySetup& base,
                                            const std::vector<uint64_t>& seeds,
                                            bool with_matching, double lambda);

// Manual-scaling study: barrier(w1, w2) against barrier(w1, scaled w2).
struct ScalingStudyResult {
  struct Row {
    uint64_t seed_a = 0, seed_b = 0;
    std::vector<double> barriers;  // one per alpha, same order as alphas
  };
  std::vector<double> alphas;  // includes 1.0 (the unscaled reference)
  int layer_index = 0;
  std::vector<Row> rows;
};

ScalingStudyResult run_scaling_study(const StudySetup& base,
                                     const std::vector<uint64_t>& seeds,
                                     int layer_index,
                                     const std::vector<double>& alphas);

struct LambdaSweepRow {
  double lambda = 0.0;
  double acc_early = 0.0;  // mean accuracy over the early-round window
  double acc_final = 0.0;  // mean accuracy over the final-round window
};

struct LambdaSweepResult {
  int early_round = 0;
  int window = 0;
  std::vector<LambdaSweepRow> rows;
};

// One fedavg_wsa federation per lambda (lambda 0 reduces to fedavg) per seed;
// accuracies are window means around the early checkpoint and the end.
LambdaSweepResult run_lambda_sweep(const std::vector<double>& lambdas,
                                   const FLConfig& base, const Dataset& train,
                                   const Dataset& test, const Model& init,
                                   const std::vector<uint64_t>& seeds,
                                   int early_round = -1, int window = 5);

struct PredefinedAblationResult {
  struct Arm {
    std::string name;                     // "fedavg", "fused", "N(mu,sigma)"
    std::vector<double> final_acc_by_seed;
    double mean_final_acc = 0.0;
  };
  std::vector<Arm> arms;
};

// Fixed predefined Gaussian targets versus the fused-scope arm and the plain
// fedavg baseline, identical seeds across arms.
PredefinedAblationResult run_predefined_ablation(
    const std::vector<GaussianParams>& targets, const FLConfig& base,
    const Dataset& train, const Dataset& test, const Model& init,
    const std::vector<uint64_t>& seeds);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace wsalign
