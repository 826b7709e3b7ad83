#include "wsalign/scope.hpp"

#include <algorithm>
#include <cmath>

#include "wsalign/common.hpp"

namespace wsalign {

const LayerScope* WeightScope::find(const std::string& name) const {
  for (const auto& [n, s] : entries) {
    if (n == name) return &s;
  }
  return nullptr;
}

std::vector<std::string> WeightScope::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& [n, s] : entries) out.push_back(n);
  return out;
}

const GaussianParams* ScopeTarget::find(const std::string& name) const {
  for (const auto& [n, g] : entries) {
    if (n == name) return &g;
  }
  return nullptr;
}

std::vector<std::string> ScopeTarget::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& [n, g] : entries) out.push_back(n);
  return out;
}

LayerScope scope_of_tensor(const Tensor& t) {
  if (t.numel() < 1) throw InputError("cannot scope an empty tensor");
  LayerScope s;
  s.count = t.numel();
  double sum = 0.0;
  for (double v : t.data) sum += v;
  s.mu = sum / double(s.count);
  double sq = 0.0;
  for (double v : t.data) {
    double d = v - s.mu;
    sq += d * d;
  }
  s.sigma = std::sqrt(sq / double(s.count));
  return s;
}

WeightScope scope_estimate(const Model& m, bool include_biases) {
  WeightScope scope;
  for (const auto& [name, tensor] : m.named_params()) {
    if (!include_biases && name.size() >= 5 &&
        name.compare(name.size() - 5, 5, ".bias") == 0) {
      continue;
    }
    if (tensor->numel() < 2) {
      scope.skipped.push_back(name);
      continue;
    }
    scope.entries.emplace_back(name, scope_of_tensor(*tensor));
  }
  return scope;
}

double scope_kl(double mu, double sigma, double mu_t, double sigma_t) {
  double s = std::max(sigma, kSigmaFloor);
  double st = std::max(sigma_t, kSigmaFloor);
  double dm = mu - mu_t;
  return std::log(st / s) + (s * s + dm * dm) / (2.0 * st * st) - 0.5;
}

double scope_kl(const LayerScope& p, const GaussianParams& target) {
  return scope_kl(p.mu, p.sigma, target.mu, target.sigma);
}

Tensor scope_kl_grad(const Tensor& t, const GaussianParams& target) {
  int64_t n = t.numel();
  if (n < 2) throw InputError("scope gradient needs a tensor with >= 2 elements");
  LayerScope s = scope_of_tensor(t);
  double st = std::max(target.sigma, kSigmaFloor);
  double mu_term = (s.mu - target.mu) / (double(n) * st * st);
  Tensor g = Tensor::zeros(t.shape);
  if (s.sigma >= kSigmaFloor) {
    // dKL/dsigma * dsigma/dw_i, with dsigma/dw_i = (w_i - mu) / (n * sigma).
    double dkl_dsigma = s.sigma / (st * st) - 1.0 / s.sigma;
    double coef = dkl_dsigma / (double(n) * s.sigma);
    for (size_t i = 0; i < t.data.size(); ++i) {
      g.data[i] = mu_term + coef * (t.data[i] - s.mu);
    }
  } else {
    // Below the floor the KL sees the clamped sigma, a local constant.
    for (size_t i = 0; i < t.data.size(); ++i) g.data[i] = mu_term;
  }
  return g;
}

ScopeTarget scope_fuse(const std::vector<WeightScope>& scopes,
                       const std::vector<double>* weights) {
  if (scopes.empty()) throw InputError("scope_fuse needs at least one scope");
  const std::vector<std::string> names = scopes[0].names();
  for (size_t k = 1; k < scopes.size(); ++k) {
    if (scopes[k].names() != names) {
      std::string missing, extra;
      for (const std::string& n : names) {
        if (!scopes[k].find(n)) missing += (missing.empty() ? "" : ", ") + n;
      }
      for (const std::string& n : scopes[k].names()) {
        bool known = std::find(names.begin(), names.end(), n) != names.end();
        if (!known) extra += (extra.empty() ? "" : ", ") + n;
      }
      throw InputError("scope " + std::to_string(k) +
                       " does not cover the same tensors: missing {" + missing +
                       "}, extra {" + extra + "}");
    }
  }
  std::vector<double> a(scopes.size(), 1.0 / double(scopes.size()));
  if (weights) {
    if (weights->size() != scopes.size()) {
      throw InputError("scope_fuse got " + std::to_string(weights->size()) +
                       " weights for " + std::to_string(scopes.size()) +
                       " scopes");
    }
    double total = 0.0;
    for (double w : *weights) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw InputError("scope_fuse weights must be finite and >= 0");
      }
      total += w;
    }
    if (total <= 0.0) throw InputError("scope_fuse weights sum to zero");
    for (size_t k = 0; k < a.size(); ++k) a[k] = (*weights)[k] / total;
  }
  ScopeTarget target;
  target.origin = ScopeTarget::Origin::fused;
  for (size_t i = 0; i < names.size(); ++i) {
    double mu = 0.0, var = 0.0;
    for (size_t k = 0; k < scopes.size(); ++k) {
      const LayerScope& s = scopes[k].entries[i].second;
      mu += a[k] * s.mu;
      var += a[k] * s.sigma * s.sigma;
    }
    target.entries.emplace_back(names[i], GaussianParams{mu, std::sqrt(var)});
  }
  return target;
}

ScopeTarget target_from_scope(const WeightScope& s,
                              ScopeTarget::Origin origin) {
  ScopeTarget target;
  target.origin = origin;
  for (const auto& [name, scope] : s.entries) {
    target.entries.emplace_back(name, GaussianParams{scope.mu, scope.sigma});
  }
  return target;
}

ScopeTarget predefined_target(const std::vector<std::string>& names, double mu,
                              double sigma) {
  if (!(sigma > 0.0)) throw InputError("predefined target sigma must be positive");
  if (names.empty()) throw InputError("predefined target needs tensor names");
  ScopeTarget target;
  target.origin = ScopeTarget::Origin::fixed_hyperparameter;
  for (const std::string& n : names) {
    target.entries.emplace_back(n, GaussianParams{mu, sigma});
  }
  return target;
}

double mean_scope_kl(const WeightScope& a, const WeightScope& b) {
  double total = 0.0;
  int64_t n = 0;
  for (const auto& [name, s] : a.entries) {
    const LayerScope* t = b.find(name);
    if (!t) continue;
    total += scope_kl(s, GaussianParams{t->mu, t->sigma});
    ++n;
  }
  if (n == 0) throw InputError("scopes share no tensor names");
  return total / double(n);
}

double mean_scope_kl(const WeightScope& a, const ScopeTarget& b) {
  double total = 0.0;
  int64_t n = 0;
  for (const auto& [name, s] : a.entries) {
    const GaussianParams* t = b.find(name);
    if (!t) continue;
    total += scope_kl(s, *t);
    ++n;
  }
  if (n == 0) throw InputError("scope shares no tensor names with the target");
  return total / double(n);
}

}  // namespace wsalign
