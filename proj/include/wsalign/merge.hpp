#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wsalign/dataset.hpp"
#include "wsalign/engine.hpp"
#include "wsalign/model.hpp"

namespace wsalign {

struct InterpolationCurve {
  std::vector<double> alphas;      // sorted, includes 0 and 1
  std::vector<double> losses;
  std::vector<double> accuracies;
  double endpoint_loss_w1 = 0.0;
  double endpoint_loss_w2 = 0.0;
};

struct BarrierReport {
  double barrier_loss = 0.0;  // max over grid of L(path) - chord(L)
  double barrier_err = 0.0;   // same with error rate (1 - accuracy)
  double argmax_alpha = 0.0;  // alpha attaining barrier_loss
};

// Per-hidden-layer unit bijections; perms[l][i] is the source unit of new
// unit i in hidden layer l.
struct Permutation {
  std::vector<std::vector<int>> perms;
};

// Elementwise convex combination (1-alpha)*w1 + alpha*w2. Models must share
// arch_id and shapes; alpha must lie in [0, 1].
Model lerp(const Model& w1, const Model& w2, double alpha);

// Loss barrier along the interpolation path on a uniform alpha grid of
// grid_size >= 3 points including both endpoints. When perm is given, w2 is
// permuted first. Negative maxima are reported raw, not clamped.
std::pair<BarrierReport, InterpolationCurve> barrier(
    const Model& w1, const Model& w2, const Dataset& data,
    const Permutation* perm = nullptr, int grid_size = 21,
    LossKind loss = LossKind::cross_entropy);

Permutation identity_permutation(const Model& m);
Permutation invert_permutation(const Permutation& p);
bool is_identity(const Permutation& p);

// Reorders hidden units: rows of W_l and entries of b_l by perms[l], columns
// of W_{l+1} by the same bijection. The network function is unchanged.
Model apply_permutation(const Model& m, const Permutation& p);

// Weight matching: per hidden layer, an exact linear assignment maximizing
// row/column correlation with w1, inside a coordinate descent over layers.
// Stops when a sweep changes nothing (at most max_sweeps). The matching
// objective is non-decreasing across sweeps.
Permutation match_weights(const Model& w1, const Model& w2,
                          int max_sweeps = 50);
// Current value of the matching objective for a candidate permutation.
double matching_objective(const Model& w1, const Model& w2,
                          const Permutation& p);

// Function-preserving rescaling of a relu layer: W_l *= alpha, b_l *= alpha,
// W_{l+1} /= alpha. Requires alpha > 0 and a successor layer.
Model scale_layer(const Model& m, int layer_index, double alpha);

struct LandscapeGrid {
  int resolution = 0;
  std::vector<double> us;      // grid coordinates along origin->axis1
  std::vector<double> vs;      // grid coordinates along origin->axis2
  std::vector<double> losses;  // row-major [u_index * resolution + v_index]
};

// Loss over the affine plane w(u,v) = origin + u*(axis1-origin) +
// v*(axis2-origin), u,v on a uniform [0,1] grid. Anchors land exactly on
// grid corners.
LandscapeGrid landscape_grid(const Model& origin, const Model& axis1,
                             const Model& axis2, const Dataset& data,
                             int resolution,
                             LossKind loss = LossKind::cross_entropy);

}  // namespace wsalign
