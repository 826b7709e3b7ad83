#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsalign/dataset.hpp"
#include "wsalign/engine.hpp"
#include "wsalign/model.hpp"
#include "wsalign/scope.hpp"

namespace wsalign {

enum class FlAlgorithm { fedavg, fedprox, fedavg_wsa, fedprox_wsa };

struct FLConfig {
  int num_clients = 10;
  double participation_fraction = 1.0;
  int rounds = 150;               // T; 0 runs no rounds (init passes through)
  int local_steps = 20;           // tau
  double learning_rate = 0.05;    // eta, plain local SGD
  double lambda = 5.0;            // scope-KL strength (wsa variants)
  double prox_mu = 0.1;           // proximal strength (fedprox variants)
  double weight_decay = 0.0;
  int batch_size = 32;
  FlAlgorithm algorithm = FlAlgorithm::fedavg;
  std::optional<std::pair<int, int>> wsa_window;  // [start, end) rounds
  double dirichlet_alpha = 0.5;
  bool scope_biases = true;
  // Replaces the fused target with a fixed N(mu, sigma^2) on all layers.
  std::optional<GaussianParams> predefined_target;
  bool weighted_aggregation = false;  // weight clients by shard size
  int threads = 1;                    // concurrent client updates per round
  uint64_t seed = 0;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  std::vector<int> participants;
  double test_accuracy = 0.0;
  double train_loss = 0.0;
  ScopeTarget target_used;       // target broadcast this round
  double mean_scope_kl = 0.0;    // mean over participants of scope-vs-target KL
  std::vector<double> client_kls;  // aligned with participants
  std::vector<std::pair<int, WeightScope>> client_scopes;
};

struct FederationResult {
  Model model;
  std::vector<RoundRecord> rounds;
};

// Per class, client proportions drawn from Dirichlet(alpha, ..., alpha);
// shards partition the dataset. Draw is retried (bounded) until no shard is
// empty; exhaustion raises InputError suggesting a larger alpha.
std::vector<Dataset> dirichlet_partition(const Dataset& data, int num_clients,
                                         double alpha, uint64_t seed);

// tau local mini-batch SGD steps from the global model on one shard, with the
// algorithm's penalties (lambda_eff = 0 outside the wsa window). Returns the
// updated model and its scope. Batches are drawn from a stream keyed on
// (seed, round, client).
std::pair<Model, WeightScope> local_update(const Model& global,
                                           const Dataset& shard,
                                           const ScopeTarget& target,
                                           const FLConfig& config, int round,
                                           int client_id, double lambda_eff);

// Uniform elementwise average. Summation runs in a canonical per-element
// order, so the result is exactly invariant to the list order.
Model aggregate(const std::vector<Model>& models);
// Convex combination with the given non-negative weights (normalized
// internally), same order-invariance guarantee.
Model aggregate(const std::vector<Model>& models,
                const std::vector<double>& weights);

// Algorithm: T rounds of sample -> broadcast (w, target) -> local updates ->
// aggregate -> fuse participant scopes into the next target. The round-0
// target is the initial global model's own scope. Deterministic given
// (config, seed).
FederationResult run_federation(const FLConfig& config, const Dataset& train,
                                const Dataset& test, const Model& init);

}  // namespace wsalign
