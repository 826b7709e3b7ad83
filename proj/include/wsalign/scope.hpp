#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsalign/model.hpp"

namespace wsalign {

// Standard deviations below this are clamped before entering KL or its
// gradient, so degenerate (constant) tensors stay finite.
inline constexpr double kSigmaFloor = 1e-8;

// Gaussian summary of one parameter tensor: mean, population standard
// deviation (divisor n), element count.
struct LayerScope {
  double mu = 0.0;
  double sigma = 0.0;
  int64_t count = 0;
};

// Per-tensor scopes for a whole model, in model parameter order.
struct WeightScope {
  std::vector<std::pair<std::string, LayerScope>> entries;
  std::vector<std::string> skipped;  // tensors below the minimum size

  const LayerScope* find(const std::string& name) const;
  std::vector<std::string> names() const;
};

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;
};

// Target distribution per tensor, used by the KL penalty.
struct ScopeTarget {
  enum class Origin { fixed_hyperparameter, fused, init_scope };
  std::vector<std::pair<std::string, GaussianParams>> entries;
  Origin origin = Origin::fixed_hyperparameter;

  const GaussianParams* find(const std::string& name) const;
  std::vector<std::string> names() const;
};

// Maximum-likelihood Gaussian fit of every parameter tensor with >= 2
// elements; smaller tensors are listed in `skipped`, not an error. When
// include_biases is false only *.weight tensors are scoped.
WeightScope scope_estimate(const Model& m, bool include_biases = true);
LayerScope scope_of_tensor(const Tensor& t);

// KL(N(mu, sigma^2) || N(mu_t, sigma_t^2)) with both deviations floored at
// kSigmaFloor. Non-negative; zero iff the floored parameters coincide.
double scope_kl(const LayerScope& p, const GaussianParams& target);
double scope_kl(double mu, double sigma, double mu_t, double sigma_t);

// d/dw_i of scope_kl(scope_of_tensor(w), target), treating the target as a
// constant. The sigma-dependent term is zeroed when sigma < kSigmaFloor
// (matching the gradient of the floored KL).
Tensor scope_kl_grad(const Tensor& t, const GaussianParams& target);

// Mean-of-means and root-mean-of-variances across models. `weights` (if
// given) must be non-negative, one per scope, and is normalized internally;
// the default is uniform. All scopes must cover the same tensor names.
ScopeTarget scope_fuse(const std::vector<WeightScope>& scopes,
                       const std::vector<double>* weights = nullptr);

// Target with the given scope's (mu, sigma) per tensor.
ScopeTarget target_from_scope(const WeightScope& s,
                              ScopeTarget::Origin origin);
// Fixed N(mu, sigma^2) applied to every named tensor.
ScopeTarget predefined_target(const std::vector<std::string>& names, double mu,
                              double sigma);

// Mean over shared tensors of KL(a_i || b_i); used for scope-divergence
// reporting between two models.
double mean_scope_kl(const WeightScope& a, const WeightScope& b);
double mean_scope_kl(const WeightScope& a, const ScopeTarget& b);

}  // namespace wsalign
