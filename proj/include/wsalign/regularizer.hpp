#pragma once

#include <memory>
#include <optional>
#include <string>

#include "wsalign/model.hpp"
#include "wsalign/scope.hpp"

namespace wsalign {

enum class RegKind { none, weight_decay, proximal, wsa, predefined_gaussian };

// A composable training penalty. wsa/predefined_gaussian need a target
// covering every scoped tensor; proximal needs a shape-matching anchor.
struct RegularizerSpec {
  RegKind kind = RegKind::none;
  double lambda = 0.0;
  std::optional<ScopeTarget> target;
  std::shared_ptr<const Model> anchor;
  bool scope_biases = true;  // false: KL over *.weight tensors only

  bool active() const { return kind != RegKind::none && lambda != 0.0; }
};

RegularizerSpec no_regularizer();
RegularizerSpec weight_decay_reg(double lambda);
RegularizerSpec proximal_reg(double lambda, const Model& anchor);
RegularizerSpec wsa_reg(double lambda, ScopeTarget target,
                        bool scope_biases = true);
RegularizerSpec predefined_gaussian_reg(double lambda, const Model& model,
                                        double mu, double sigma,
                                        bool scope_biases = true);

// Penalty value and its exact gradient per parameter tensor:
//   weight_decay:        lambda/2 * sum ||w||^2          grad lambda*w
//   proximal:            lambda/2 * ||w - anchor||^2     grad lambda*(w - anchor)
//   wsa / predefined:    lambda * sum_l KL(scope(w_l) || target_l)
// Inactive specs (kind none or lambda == 0) return 0 with untouched grads so
// zero-coefficient runs stay bit-identical to unregularized ones.
double penalty_and_grad(const RegularizerSpec& spec, const Model& m,
                        ParamTensors& grads);
double penalty_only(const RegularizerSpec& spec, const Model& m);

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
};

// lambda/2*||w||^2 versus lambda*n/2*(sigma^2 + mu^2).
IdentityCheck check_decay_identity(const Tensor& w, double lambda);
// ||w - w~||^2 versus n*sigma^2 + n*mu^2 + n*sigma~^2 + n*mu~^2 - 2*<w, w~>.
IdentityCheck check_proximal_identity(const Tensor& w, const Tensor& w_tilde);

}  // namespace wsalign
