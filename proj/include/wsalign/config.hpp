#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsalign/engine.hpp"
#include "wsalign/federated.hpp"
#include "wsalign/model.hpp"
#include "wsalign/regularizer.hpp"

namespace wsalign {

enum class Command {
  train,
  scope,
  fuse_scope,
  interpolate,
  match,
  scale,
  landscape,
  fl,
  study,
};

std::string command_name(Command c);   // hyphenated: "fuse-scope"
Command parse_command(const std::string& name);

struct DataConfig {
  int classes = 10;
  int dim = 20;
  int per_class = 200;
  int test_per_class = 50;
  double spread = 0.30;
  uint64_t seed = 7;
  std::string train_csv;  // when set, loaded instead of generated
  std::string test_csv;
  double label_noise = 0.0;    // flip probability, applied to train split
  double feature_noise = 0.0;  // multiplicative noise epsilon
  double subsample = 1.0;      // kept fraction of the train split
  std::vector<int> imbalance_favored;  // empty means no imbalance
  double imbalance_keep_high = 0.9;
  double imbalance_keep_low = 0.1;
};

struct ModelConfig {
  std::vector<int64_t> hidden = {32, 32};
  InitKind init = InitKind::kaiming_normal;
};

// Regularizer section as written in a config file; resolved against
// checkpoints/targets at dispatch time.
struct RegConfig {
  RegKind kind = RegKind::none;
  double lambda = 5.0;
  bool scope_biases = true;
  std::string target;  // "init_scope" or a path to a scope/target JSON
  double target_mu = 0.0;
  double target_sigma = 0.1;
  std::string anchor;  // checkpoint path, proximal only
};

struct InterpolateConfig {
  std::string a;
  std::string b;
  int grid = 21;
  bool matched = false;
  std::string split = "train";  // barrier dataset; "test" follows the
                                // error-rate convention of the study tables
};

struct MatchConfig {
  std::string a;
  std::string b;
  int max_sweeps = 50;
};

struct ScaleConfig {
  std::string checkpoint;
  int layer = 0;
  double alpha = 1.0;
};

struct LandscapeConfig {
  std::string origin;
  std::string a;
  std::string b;
  int resolution = 25;
  std::string split = "train";
};

struct ScopeCmdConfig {
  std::string checkpoint;
};

struct FuseScopeConfig {
  std::vector<std::string> checkpoints;
  std::vector<double> weights;  // empty means unweighted mean
};

struct StudyConfig {
  std::string name = "condition_matrix";
  std::vector<uint64_t> seeds = {1, 2, 3};
  int epochs = -1;  // <0 keeps the train-section value
  double lambda = 5.0;
  std::vector<double> lambdas = {0, 1, 5, 10, 50};
  std::vector<double> alphas = {1.0, 2.0, 5.0};
  int layer = 0;
  bool with_matching = false;
  int early_round = -1;
  int window = 5;
};

struct ExperimentConfig {
  Command command = Command::train;
  std::string out = "out";
  uint64_t seed = 1;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  RegConfig reg;
  FLConfig fl;
  InterpolateConfig interpolate;
  MatchConfig match;
  ScaleConfig scale;
  LandscapeConfig landscape;
  ScopeCmdConfig scope;
  FuseScopeConfig fuse;
  StudyConfig study;
};

// Strict INI: unknown sections or keys fail with the offending line number,
// as do out-of-range values. parse(render(c)) == render(c) for any valid c.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin);
ExperimentConfig load_config(const std::string& path);
std::string render_config(const ExperimentConfig& cfg);

// Runs cfg.command and writes its artifacts (plus resolved.ini) under
// cfg.out. Throws the config/input/numeric errors from common.hpp.
void dispatch(const ExperimentConfig& cfg);

}  // namespace wsalign
