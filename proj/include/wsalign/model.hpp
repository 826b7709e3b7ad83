#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wsalign/tensor.hpp"

namespace wsalign {

enum class Activation { relu, identity };

// One dense layer: weight is [out x in], bias is [out]. Parameter tensors are
// addressed as "<name>.weight" and "<name>.bias".
struct DenseLayer {
  std::string name;
  Tensor weight;
  Tensor bias;
  Activation act = Activation::relu;
};

struct Model {
  std::string arch_id;
  uint64_t seed = 0;
  std::vector<DenseLayer> layers;

  int num_layers() const { return int(layers.size()); }
  int64_t input_dim() const { return layers.front().weight.cols(); }
  int64_t output_dim() const { return layers.back().weight.rows(); }

  std::vector<std::pair<std::string, const Tensor*>> named_params() const;
  std::vector<std::pair<std::string, Tensor*>> named_params();

  // Checks the structural invariants: consecutive layers dimension-compatible,
  // last activation identity, parameter names unique. Throws ShapeError /
  // InputError on violation.
  void validate() const;
};

enum class InitKind { kaiming_normal, kaiming_uniform };

struct ArchSpec {
  std::vector<int64_t> dims;       // input, hidden..., output
  std::vector<Activation> acts;    // one per layer (dims.size() - 1)
};

// arch_id grammar: "mlp:<in>-<d1><a1>-...-<dL><aL>" where each non-input
// dimension carries its activation letter, 'r' (relu) or 'i' (identity),
// e.g. "mlp:20-32r-32r-10i".
std::string make_arch_id(const ArchSpec& spec);
ArchSpec parse_arch_id(const std::string& arch_id);

// Builds an MLP with relu hidden layers and identity output. Layers are named
// fc1..fcL. Weights and biases are drawn per layer from a stream keyed on
// (seed, layer); biases are uniform in +-1/sqrt(fan_in) so every tensor has a
// nonzero scope.
Model make_mlp(const std::vector<int64_t>& dims, InitKind init, uint64_t seed);

// Flat per-parameter tensors in model order: [w1, b1, w2, b2, ...].
using ParamTensors = std::vector<Tensor>;

ParamTensors zeros_like_params(const Model& m);
// a += s * b, elementwise over all tensors.
void add_scaled(ParamTensors& a, const ParamTensors& b, double s);
bool params_match(const Model& m, const ParamTensors& p);

bool models_same_arch(const Model& a, const Model& b);

}  // namespace wsalign
