#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wsalign/dataset.hpp"
#include "wsalign/model.hpp"
#include "wsalign/regularizer_fwd.hpp"
#include "wsalign/scope.hpp"

namespace wsalign {

enum class LossKind { cross_entropy, mse };
enum class OptKind { sgd, adam };

// Pure forward pass; returns logits [batch x classes]. A zero-row batch
// yields a zero-row output.
Tensor forward(const Model& m, const Tensor& inputs);

// Mean data loss and analytic gradients for every parameter tensor.
// Cross-entropy takes class indices; mse takes a dense target tensor of the
// output shape. Gradients come back in model parameter order.
double loss_and_grad_ce(const Model& m, const Tensor& inputs,
                        const std::vector<int>& labels, ParamTensors& grads);
double loss_and_grad_mse(const Model& m, const Tensor& inputs,
                         const Tensor& targets, ParamTensors& grads);
// Dispatcher over LossKind; mse targets are the one-hot encoding of labels.
double loss_and_grad(const Model& m, const Tensor& inputs,
                     const std::vector<int>& labels, LossKind loss,
                     ParamTensors& grads);

// Loss/accuracy evaluation without gradients.
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const Model& m, const Dataset& ds,
                    LossKind loss = LossKind::cross_entropy);

struct OptimizerState {
  OptKind kind = OptKind::sgd;
  double learning_rate = 0.01;
  double momentum = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int64_t step = 0;
  ParamTensors m;  // momentum / first moment
  ParamTensors v;  // second moment (adam)
};

OptimizerState make_optimizer(OptKind kind, const Model& model, double lr,
                              double momentum = 0.0, double weight_decay = 0.0);

// One deterministic update. Weight decay adds decay*w to each gradient entry
// before the SGD/Adam recurrence. Throws NumericError naming the offending
// tensor on non-finite gradients.
void optimizer_step(OptimizerState& state, Model& model,
                    const ParamTensors& grads);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  OptKind optimizer = OptKind::sgd;
  double learning_rate = 0.03;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  LossKind loss = LossKind::cross_entropy;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, after the epoch's updates
  double loss = 0.0;
  double accuracy = 0.0;
  WeightScope scope;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> log;
};

// Mini-batch training with an optional composable penalty. Batch order is
// shuffled by a stream keyed on (seed, epoch); identical (config, seed) gives
// a bit-identical final model and log. Aborts with NumericError (naming epoch
// and step) if the loss exceeds 1e6 or turns non-finite.
TrainResult train(const Model& init, const Dataset& data,
                  const TrainConfig& config, const RegularizerSpec& reg,
                  uint64_t seed);
TrainResult train(const Model& init, const Dataset& data,
                  const TrainConfig& config,
                  const std::vector<RegularizerSpec>& regs, uint64_t seed);

}  // namespace wsalign
