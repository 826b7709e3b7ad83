#include "wsalign/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsalign/common.hpp"
#include "wsalign/regularizer.hpp"

namespace wsalign {

namespace {

// z = x W^T + b for one layer; x is [N x in], W is [out x in].
void affine(const Tensor& x, const DenseLayer& l, Tensor& z) {
  int64_t n = x.rows(), in = x.cols(), out = l.weight.rows();
  for (int64_t r = 0; r < n; ++r) {
    const double* xr = &x.data[size_t(r * in)];
    double* zr = &z.data[size_t(r * out)];
    for (int64_t o = 0; o < out; ++o) {
      const double* wr = &l.weight.data[size_t(o * in)];
      double acc = l.bias.data[size_t(o)];
      for (int64_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      zr[o] = acc;
    }
  }
}

void check_inputs(const Model& m, const Tensor& inputs) {
  if (inputs.shape.size() != 2) {
    throw ShapeError("inputs must be 2-D, got " + shape_str(inputs.shape));
  }
  if (inputs.cols() != m.input_dim()) {
    throw ShapeError("inputs have " + std::to_string(inputs.cols()) +
                     " features, model expects " +
                     std::to_string(m.input_dim()));
  }
}

// Activations per layer (post-nonlinearity), plus the input at index 0.
std::vector<Tensor> forward_cached(const Model& m, const Tensor& inputs) {
  std::vector<Tensor> acts;
  acts.reserve(m.layers.size() + 1);
  acts.push_back(inputs);
  for (const DenseLayer& l : m.layers) {
    Tensor z = Tensor::zeros({inputs.rows(), l.weight.rows()});
    affine(acts.back(), l, z);
    if (l.act == Activation::relu) {
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

// Backprop from dL/d(logits) through the cached activations into grads.
void backward(const Model& m, const std::vector<Tensor>& acts, Tensor dz,
              ParamTensors& grads) {
  for (int l = m.num_layers() - 1; l >= 0; --l) {
    const DenseLayer& layer = m.layers[size_t(l)];
    const Tensor& a_in = acts[size_t(l)];
    int64_t n = dz.rows(), out = dz.cols(), in = a_in.cols();
    Tensor& gw = grads[size_t(2 * l)];
    Tensor& gb = grads[size_t(2 * l) + 1];
    for (int64_t r = 0; r < n; ++r) {
      const double* dzr = &dz.data[size_t(r * out)];
      const double* ar = &a_in.data[size_t(r * in)];
      for (int64_t o = 0; o < out; ++o) {
        double d = dzr[o];
        if (d == 0.0) continue;
        gb.data[size_t(o)] += d;
        double* gwr = &gw.data[size_t(o * in)];
        for (int64_t i = 0; i < in; ++i) gwr[i] += d * ar[i];
      }
    }
    if (l == 0) break;
    Tensor dx = Tensor::zeros({n, in});
    for (int64_t r = 0; r < n; ++r) {
      const double* dzr = &dz.data[size_t(r * out)];
      double* dxr = &dx.data[size_t(r * in)];
      for (int64_t o = 0; o < out; ++o) {
        double d = dzr[o];
        if (d == 0.0) continue;
        const double* wr = &layer.weight.data[size_t(o * in)];
        for (int64_t i = 0; i < in; ++i) dxr[i] += d * wr[i];
      }
    }
    // relu mask of the producing layer; acts[l] is its output.
    if (m.layers[size_t(l) - 1].act == Activation::relu) {
      for (size_t k = 0; k < dx.data.size(); ++k) {
        if (acts[size_t(l)].data[k] <= 0.0) dx.data[k] = 0.0;
      }
    }
    dz = std::move(dx);
  }
}

// Mean cross-entropy of logits against labels; writes dL/d(logits) into dz.
double softmax_ce(const Tensor& logits, const std::vector<int>& labels,
                  Tensor* dz) {
  int64_t n = logits.rows(), k = logits.cols();
  double total = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    const double* row = &logits.data[size_t(r * k)];
    double mx = row[0];
    for (int64_t c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int64_t c = 0; c < k; ++c) sum += std::exp(row[c] - mx);
    double lse = mx + std::log(sum);
    total += lse - row[labels[size_t(r)]];
    if (dz) {
      double* dzr = &dz->data[size_t(r * k)];
      for (int64_t c = 0; c < k; ++c) {
        double p = std::exp(row[c] - lse);
        dzr[c] = (p - (c == labels[size_t(r)] ? 1.0 : 0.0)) / double(n);
      }
    }
  }
  return total / double(n);
}

void check_labels(const Tensor& logits, const std::vector<int>& labels) {
  if (int64_t(labels.size()) != logits.rows()) {
    throw ShapeError("batch has " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(logits.rows()) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= logits.cols()) {
      throw InputError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(logits.cols()) + ")");
    }
  }
}

}  // namespace

Tensor forward(const Model& m, const Tensor& inputs) {
  check_inputs(m, inputs);
  std::vector<Tensor> acts = forward_cached(m, inputs);
  return std::move(acts.back());
}

double loss_and_grad_ce(const Model& m, const Tensor& inputs,
                        const std::vector<int>& labels, ParamTensors& grads) {
  check_inputs(m, inputs);
  if (inputs.rows() == 0) throw InputError("cannot take gradients on an empty batch");
  if (!params_match(m, grads)) grads = zeros_like_params(m);
  std::vector<Tensor> acts = forward_cached(m, inputs);
  const Tensor& logits = acts.back();
  check_labels(logits, labels);
  Tensor dz = Tensor::zeros(logits.shape);
  double loss = softmax_ce(logits, labels, &dz);
  backward(m, acts, std::move(dz), grads);
  return loss;
}

double loss_and_grad_mse(const Model& m, const Tensor& inputs,
                         const Tensor& targets, ParamTensors& grads) {
  check_inputs(m, inputs);
  if (inputs.rows() == 0) throw InputError("cannot take gradients on an empty batch");
  if (!params_match(m, grads)) grads = zeros_like_params(m);
  std::vector<Tensor> acts = forward_cached(m, inputs);
  const Tensor& out = acts.back();
  if (!out.same_shape(targets)) {
    throw ShapeError("mse targets " + shape_str(targets.shape) +
                     " do not match outputs " + shape_str(out.shape));
  }
  int64_t n = out.rows();
  Tensor dz = Tensor::zeros(out.shape);
  double loss = 0.0;
  for (size_t i = 0; i < out.data.size(); ++i) {
    double d = out.data[i] - targets.data[i];
    loss += d * d;
    dz.data[i] = 2.0 * d / double(n);
  }
  loss /= double(n);
  backward(m, acts, std::move(dz), grads);
  return loss;
}

namespace {

Tensor one_hot(const std::vector<int>& labels, int64_t classes) {
  Tensor t = Tensor::zeros({int64_t(labels.size()), classes});
  for (size_t i = 0; i < labels.size(); ++i) {
    t.at2(int64_t(i), labels[i]) = 1.0;
  }
  return t;
}

}  // namespace

double loss_and_grad(const Model& m, const Tensor& inputs,
                     const std::vector<int>& labels, LossKind loss,
                     ParamTensors& grads) {
  if (loss == LossKind::cross_entropy) {
    return loss_and_grad_ce(m, inputs, labels, grads);
  }
  return loss_and_grad_mse(m, inputs, one_hot(labels, m.output_dim()), grads);
}

EvalResult evaluate(const Model& m, const Dataset& ds, LossKind loss) {
  check_inputs(m, ds.features);
  if (ds.size() == 0) throw InputError("cannot evaluate on an empty dataset");
  Tensor logits = forward(m, ds.features);
  check_labels(logits, ds.labels);
  EvalResult res;
  if (loss == LossKind::cross_entropy) {
    res.loss = softmax_ce(logits, ds.labels, nullptr);
  } else {
    Tensor t = one_hot(ds.labels, m.output_dim());
    double total = 0.0;
    for (size_t i = 0; i < logits.data.size(); ++i) {
      double d = logits.data[i] - t.data[i];
      total += d * d;
    }
    res.loss = total / double(logits.rows());
  }
  int64_t correct = 0;
  int64_t k = logits.cols();
  for (int64_t r = 0; r < logits.rows(); ++r) {
    const double* row = &logits.data[size_t(r * k)];
    int64_t best = 0;
    for (int64_t c = 1; c < k; ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (best == ds.labels[size_t(r)]) ++correct;
  }
  res.accuracy = double(correct) / double(logits.rows());
  return res;
}

OptimizerState make_optimizer(OptKind kind, const Model& model, double lr,
                              double momentum, double weight_decay) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  OptimizerState s;
  s.kind = kind;
  s.learning_rate = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.m = zeros_like_params(model);
  if (kind == OptKind::adam) s.v = zeros_like_params(model);
  return s;
}

void optimizer_step(OptimizerState& state, Model& model,
                    const ParamTensors& grads) {
  if (!params_match(model, grads)) {
    throw ShapeError("gradient list does not match the model's parameters");
  }
  auto params = model.named_params();
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient for " + params[i].first);
    }
  }
  state.step += 1;
  for (size_t i = 0; i < grads.size(); ++i) {
    Tensor& w = *params[i].second;
    Tensor& mom = state.m[i];
    for (size_t k = 0; k < w.data.size(); ++k) {
      double g = grads[i].data[k];
      if (state.weight_decay != 0.0) g += state.weight_decay * w.data[k];
      if (state.kind == OptKind::sgd) {
        if (state.momentum != 0.0) {
          mom.data[k] = state.momentum * mom.data[k] + g;
          g = mom.data[k];
        }
        w.data[k] -= state.learning_rate * g;
      } else {
        double m1 = state.adam_beta1 * mom.data[k] + (1.0 - state.adam_beta1) * g;
        double v2 = state.adam_beta2 * state.v[i].data[k] +
                    (1.0 - state.adam_beta2) * g * g;
        mom.data[k] = m1;
        state.v[i].data[k] = v2;
        double mhat = m1 / (1.0 - std::pow(state.adam_beta1, double(state.step)));
        double vhat = v2 / (1.0 - std::pow(state.adam_beta2, double(state.step)));
        w.data[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.adam_eps);
      }
    }
  }
}

TrainResult train(const Model& init, const Dataset& data,
                  const TrainConfig& config, const RegularizerSpec& reg,
                  uint64_t seed) {
  return train(init, data, config, std::vector<RegularizerSpec>{reg}, seed);
}

TrainResult train(const Model& init, const Dataset& data,
                  const TrainConfig& config,
                  const std::vector<RegularizerSpec>& regs, uint64_t seed) {
  init.validate();
  data.validate();
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (int64_t(data.num_classes) != init.output_dim()) {
    throw ShapeError("model emits " + std::to_string(init.output_dim()) +
                     " logits for " + std::to_string(data.num_classes) +
                     " classes");
  }
  TrainResult result;
  result.model = init;
  OptimizerState opt =
      make_optimizer(config.optimizer, init, config.learning_rate,
                     config.optimizer == OptKind::sgd ? config.momentum : 0.0,
                     config.weight_decay);
  opt.adam_beta1 = config.adam_beta1;
  opt.adam_beta2 = config.adam_beta2;
  opt.adam_eps = config.adam_eps;

  int64_t n = data.size();
  std::vector<int64_t> order(static_cast<size_t>(n));
  ParamTensors grads = zeros_like_params(init);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::keyed(seed, {0x0E0Cu, uint64_t(epoch)});
    shuffle_rng.shuffle(order);
    for (int64_t start = 0; start < n; start += config.batch_size) {
      int64_t stop = std::min<int64_t>(n, start + config.batch_size);
      int64_t bs = stop - start;
      Tensor xb = Tensor::zeros({bs, data.dim()});
      std::vector<int> yb(static_cast<size_t>(bs));
      for (int64_t r = 0; r < bs; ++r) {
        int64_t src = order[size_t(start + r)];
        yb[size_t(r)] = data.labels[size_t(src)];
        for (int64_t d = 0; d < data.dim(); ++d) {
          xb.at2(r, d) = data.features.at2(src, d);
        }
      }
      for (Tensor& g : grads) {
        std::fill(g.data.begin(), g.data.end(), 0.0);
      }
      double loss = loss_and_grad(result.model, xb, yb, config.loss, grads);
      for (const RegularizerSpec& reg : regs) {
        loss += penalty_and_grad(reg, result.model, grads);
      }
      if (!std::isfinite(loss) || loss > 1e6) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + ", step " +
                           std::to_string(opt.step + 1) + " (batch loss " +
                           fmt17(loss) + ")");
      }
      optimizer_step(opt, result.model, grads);
    }
    EvalResult eval = evaluate(result.model, data, config.loss);
    double objective = eval.loss;
    for (const RegularizerSpec& reg : regs) {
      objective += penalty_only(reg, result.model);
    }
    if (!std::isfinite(objective) || objective > 1e6) {
      throw NumericError("training diverged at epoch " +
                         std::to_string(epoch) + " (epoch loss " +
                         fmt17(objective) + ")");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = objective;
    rec.accuracy = eval.accuracy;
    rec.scope = scope_estimate(result.model);
    result.log.push_back(std::move(rec));
  }
  return result;
}

}  // namespace wsalign
