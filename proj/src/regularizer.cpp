#include "wsalign/regularizer.hpp"

#include <cmath>

#include "wsalign/common.hpp"

namespace wsalign {

RegularizerSpec no_regularizer() { return RegularizerSpec{}; }

RegularizerSpec weight_decay_reg(double lambda) {
  if (lambda < 0.0) throw ConfigError("weight decay lambda must be >= 0");
  RegularizerSpec spec;
  spec.kind = RegKind::weight_decay;
  spec.lambda = lambda;
  return spec;
}

RegularizerSpec proximal_reg(double lambda, const Model& anchor) {
  if (lambda < 0.0) throw ConfigError("proximal lambda must be >= 0");
  RegularizerSpec spec;
  spec.kind = RegKind::proximal;
  spec.lambda = lambda;
  spec.anchor = std::make_shared<Model>(anchor);
  return spec;
}

RegularizerSpec wsa_reg(double lambda, ScopeTarget target, bool scope_biases) {
  if (lambda < 0.0) throw ConfigError("scope penalty lambda must be >= 0");
  RegularizerSpec spec;
  spec.kind = RegKind::wsa;
  spec.lambda = lambda;
  spec.target = std::move(target);
  spec.scope_biases = scope_biases;
  return spec;
}

RegularizerSpec predefined_gaussian_reg(double lambda, const Model& model,
                                        double mu, double sigma,
                                        bool scope_biases) {
  if (lambda < 0.0) throw ConfigError("scope penalty lambda must be >= 0");
  RegularizerSpec spec;
  spec.kind = RegKind::predefined_gaussian;
  spec.lambda = lambda;
  spec.target = predefined_target(
      scope_estimate(model, scope_biases).names(), mu, sigma);
  spec.scope_biases = scope_biases;
  return spec;
}

namespace {

bool is_bias(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
}

// grads may be null (penalty value only). Gradients are accumulated.
double apply_penalty(const RegularizerSpec& spec, const Model& m,
                     ParamTensors* grads) {
  if (!spec.active()) return 0.0;
  if (grads && !params_match(m, *grads)) {
    throw ShapeError("gradient list does not match the model's parameters");
  }
  auto params = m.named_params();
  double penalty = 0.0;
  switch (spec.kind) {
    case RegKind::weight_decay: {
      for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& w = *params[i].second;
        for (size_t k = 0; k < w.data.size(); ++k) {
          penalty += w.data[k] * w.data[k];
          if (grads) (*grads)[i].data[k] += spec.lambda * w.data[k];
        }
      }
      penalty *= 0.5 * spec.lambda;
      return penalty;
    }
    case RegKind::proximal: {
      if (!spec.anchor) throw InputError("proximal regularizer has no anchor model");
      if (!models_same_arch(m, *spec.anchor)) {
        throw ShapeError("proximal anchor does not match the model architecture");
      }
      auto anchor = spec.anchor->named_params();
      for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& w = *params[i].second;
        const Tensor& a = *anchor[i].second;
        for (size_t k = 0; k < w.data.size(); ++k) {
          double d = w.data[k] - a.data[k];
          penalty += d * d;
          if (grads) (*grads)[i].data[k] += spec.lambda * d;
        }
      }
      penalty *= 0.5 * spec.lambda;
      return penalty;
    }
    case RegKind::wsa:
    case RegKind::predefined_gaussian: {
      if (!spec.target) throw InputError("scope regularizer has no target");
      for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params[i].first;
        const Tensor& w = *params[i].second;
        if (!spec.scope_biases && is_bias(name)) continue;
        if (w.numel() < 2) continue;  // unscoped, matching scope_estimate
        const GaussianParams* t = spec.target->find(name);
        if (!t) {
          throw InputError("scope target has no entry for " + name);
        }
        penalty += spec.lambda * scope_kl(scope_of_tensor(w), *t);
        if (grads) {
          Tensor g = scope_kl_grad(w, *t);
          for (size_t k = 0; k < g.data.size(); ++k) {
            (*grads)[i].data[k] += spec.lambda * g.data[k];
          }
        }
      }
      return penalty;
    }
    case RegKind::none:
      return 0.0;
  }
  return 0.0;
}

}  // namespace

double penalty_and_grad(const RegularizerSpec& spec, const Model& m,
                        ParamTensors& grads) {
  return apply_penalty(spec, m, &grads);
}

double penalty_only(const RegularizerSpec& spec, const Model& m) {
  return apply_penalty(spec, m, nullptr);
}

IdentityCheck check_decay_identity(const Tensor& w, double lambda) {
  IdentityCheck c;
  double sq = 0.0;
  for (double v : w.data) sq += v * v;
  c.lhs = 0.5 * lambda * sq;
  LayerScope s = scope_of_tensor(w);
  double n = double(w.numel());
  c.rhs = 0.5 * lambda * n * (s.sigma * s.sigma + s.mu * s.mu);
  c.abs_diff = std::fabs(c.lhs - c.rhs);
  return c;
}

IdentityCheck check_proximal_identity(const Tensor& w, const Tensor& w_tilde) {
  if (!w.same_shape(w_tilde)) {
    throw ShapeError("proximal identity needs same-shape tensors");
  }
  IdentityCheck c;
  double sq = 0.0, dot = 0.0;
  for (size_t i = 0; i < w.data.size(); ++i) {
    double d = w.data[i] - w_tilde.data[i];
    sq += d * d;
    dot += w.data[i] * w_tilde.data[i];
  }
  c.lhs = sq;
  LayerScope a = scope_of_tensor(w);
  LayerScope b = scope_of_tensor(w_tilde);
  double n = double(w.numel());
  c.rhs = n * a.sigma * a.sigma + n * a.mu * a.mu + n * b.sigma * b.sigma +
          n * b.mu * b.mu - 2.0 * dot;
  c.abs_diff = std::fabs(c.lhs - c.rhs);
  return c;
}

}  // namespace wsalign
