#include "wsalign/merge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsalign/assignment.hpp"
#include "wsalign/common.hpp"

namespace wsalign {

Model lerp(const Model& w1, const Model& w2, double alpha) {
  if (!models_same_arch(w1, w2)) {
    throw ShapeError("cannot interpolate models with different architectures");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InputError("interpolation alpha must lie in [0, 1], got " +
                     fmt17(alpha));
  }
  Model out = w1;
  auto p1 = w1.named_params();
  auto p2 = w2.named_params();
  auto po = out.named_params();
  for (size_t i = 0; i < po.size(); ++i) {
    const Tensor& a = *p1[i].second;
    const Tensor& b = *p2[i].second;
    Tensor& o = *po[i].second;
    for (size_t k = 0; k < o.data.size(); ++k) {
      o.data[k] = (1.0 - alpha) * a.data[k] + alpha * b.data[k];
    }
  }
  return out;
}

std::pair<BarrierReport, InterpolationCurve> barrier(const Model& w1,
                                                     const Model& w2,
                                                     const Dataset& data,
                                                     const Permutation* perm,
                                                     int grid_size,
                                                     LossKind loss) {
  if (grid_size < 3) throw InputError("barrier grid needs >= 3 points");
  Model w2p = perm ? apply_permutation(w2, *perm) : w2;
  InterpolationCurve curve;
  curve.alphas.reserve(size_t(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    double alpha = double(i) / double(grid_size - 1);
    Model m = lerp(w1, w2p, alpha);
    EvalResult e = evaluate(m, data, loss);
    curve.alphas.push_back(alpha);
    curve.losses.push_back(e.loss);
    curve.accuracies.push_back(e.accuracy);
  }
  curve.endpoint_loss_w1 = curve.losses.front();
  curve.endpoint_loss_w2 = curve.losses.back();

  // Excess over the chord, maximized across interior grid points only: the
  // endpoints are identically zero, and a convex dip should report as a
  // negative barrier rather than be clamped.
  BarrierReport report;
  bool first = true;
  double err0 = 1.0 - curve.accuracies.front();
  double err1 = 1.0 - curve.accuracies.back();
  for (int i = 1; i + 1 < grid_size; ++i) {
    double alpha = curve.alphas[size_t(i)];
    double chord = (1.0 - alpha) * curve.endpoint_loss_w1 +
                   alpha * curve.endpoint_loss_w2;
    double excess = curve.losses[size_t(i)] - chord;
    double err_chord = (1.0 - alpha) * err0 + alpha * err1;
    double err_excess = (1.0 - curve.accuracies[size_t(i)]) - err_chord;
    if (first || excess > report.barrier_loss) {
      report.barrier_loss = excess;
      report.argmax_alpha = alpha;
    }
    if (first || err_excess > report.barrier_err) {
      report.barrier_err = err_excess;
    }
    first = false;
  }
  return {report, curve};
}

Permutation identity_permutation(const Model& m) {
  Permutation p;
  for (int l = 0; l + 1 < m.num_layers(); ++l) {
    std::vector<int> ids(size_t(m.layers[size_t(l)].weight.rows()));
    std::iota(ids.begin(), ids.end(), 0);
    p.perms.push_back(std::move(ids));
  }
  return p;
}

namespace {

void check_permutation(const Model& m, const Permutation& p) {
  if (int(p.perms.size()) != std::max(0, m.num_layers() - 1)) {
    throw ShapeError("permutation covers " + std::to_string(p.perms.size()) +
                     " hidden layers, model has " +
                     std::to_string(m.num_layers() - 1));
  }
  for (size_t l = 0; l < p.perms.size(); ++l) {
    int64_t n = m.layers[l].weight.rows();
    if (int64_t(p.perms[l].size()) != n) {
      throw ShapeError("permutation for hidden layer " + std::to_string(l) +
                       " has " + std::to_string(p.perms[l].size()) +
                       " entries, layer has " + std::to_string(n) + " units");
    }
    std::vector<char> seen(size_t(n), 0);
    for (int v : p.perms[l]) {
      if (v < 0 || int64_t(v) >= n || seen[size_t(v)]) {
        throw InputError("permutation for hidden layer " + std::to_string(l) +
                         " is not a bijection");
      }
      seen[size_t(v)] = 1;
    }
  }
}

}  // namespace

Permutation invert_permutation(const Permutation& p) {
  Permutation inv;
  inv.perms.resize(p.perms.size());
  for (size_t l = 0; l < p.perms.size(); ++l) {
    inv.perms[l].assign(p.perms[l].size(), 0);
    for (size_t i = 0; i < p.perms[l].size(); ++i) {
      inv.perms[l][size_t(p.perms[l][i])] = int(i);
    }
  }
  return inv;
}

bool is_identity(const Permutation& p) {
  for (const std::vector<int>& perm : p.perms) {
    for (size_t i = 0; i < perm.size(); ++i) {
      if (perm[i] != int(i)) return false;
    }
  }
  return true;
}

Model apply_permutation(const Model& m, const Permutation& p) {
  check_permutation(m, p);
  // Work on the evolving copy: layer l may already carry the column
  // reordering from p.perms[l-1] when its rows are permuted here.
  Model out = m;
  for (size_t l = 0; l < p.perms.size(); ++l) {
    const std::vector<int>& perm = p.perms[l];
    DenseLayer& layer = out.layers[l];
    Tensor w = layer.weight;
    Tensor b = layer.bias;
    int64_t in = w.cols();
    for (size_t i = 0; i < perm.size(); ++i) {
      int64_t from = perm[i];
      for (int64_t c = 0; c < in; ++c) {
        layer.weight.at2(int64_t(i), c) = w.at2(from, c);
      }
      layer.bias.data[i] = b.data[size_t(from)];
    }
    // Columns of the consumer layer follow the same unit reordering.
    Tensor next = out.layers[l + 1].weight;
    int64_t rows = next.rows();
    for (size_t i = 0; i < perm.size(); ++i) {
      int64_t from = perm[i];
      for (int64_t r = 0; r < rows; ++r) {
        out.layers[l + 1].weight.at2(r, int64_t(i)) = next.at2(r, from);
      }
    }
  }
  return out;
}

double matching_objective(const Model& w1, const Model& w2,
                          const Permutation& p) {
  if (!models_same_arch(w1, w2)) {
    throw ShapeError("matching needs models with the same architecture");
  }
  Model pb = apply_permutation(w2, p);
  auto pa = w1.named_params();
  auto pp = pb.named_params();
  double total = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) {
    const Tensor& a = *pa[i].second;
    const Tensor& b = *pp[i].second;
    for (size_t k = 0; k < a.data.size(); ++k) total += a.data[k] * b.data[k];
  }
  return total;
}

namespace {

// One coordinate-descent pass to a fixed point, visiting layers forward
// (backward when flipped). At a fixed point no single-layer re-assignment
// improves the objective, so the visiting order only steers which fixed
// point the descent lands in.
Permutation descend_matching(const Model& w1, const Model& w2, int max_sweeps,
                             bool backward_first) {
  int hidden = w1.num_layers() - 1;
  Permutation p = identity_permutation(w1);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    bool backward = backward_first == (sweep % 2 == 0);
    for (int step = 0; step < hidden; ++step) {
      int l = backward ? hidden - 1 - step : step;
      const Tensor& aw = w1.layers[size_t(l)].weight;
      const Tensor& bw = w2.layers[size_t(l)].weight;
      const Tensor& ab = w1.layers[size_t(l)].bias;
      const Tensor& bb = w2.layers[size_t(l)].bias;
      const Tensor& an = w1.layers[size_t(l) + 1].weight;
      const Tensor& bn = w2.layers[size_t(l) + 1].weight;
      int64_t n = aw.rows();
      int64_t in = aw.cols();
      int64_t out = an.rows();
      const std::vector<int>* prev = l > 0 ? &p.perms[size_t(l) - 1] : nullptr;
      const std::vector<int>* next =
          l + 1 < hidden ? &p.perms[size_t(l) + 1] : nullptr;
      // score[i*n + j]: benefit of mapping new unit i to source unit j, with
      // the neighboring layers held at their current permutations.
      std::vector<double> score(size_t(n) * size_t(n), 0.0);
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < n; ++j) {
          double s = ab.data[size_t(i)] * bb.data[size_t(j)];
          for (int64_t c = 0; c < in; ++c) {
            int64_t bc = prev ? int64_t((*prev)[size_t(c)]) : c;
            s += aw.at2(i, c) * bw.at2(j, bc);
          }
          for (int64_t r = 0; r < out; ++r) {
            int64_t br = next ? int64_t((*next)[size_t(r)]) : r;
            s += an.at2(r, i) * bn.at2(br, j);
          }
          score[size_t(i) * size_t(n) + size_t(j)] = s;
        }
      }
      std::vector<int> assignment = linear_assignment_max(score, int(n));
      if (assignment != p.perms[size_t(l)]) {
        p.perms[size_t(l)] = std::move(assignment);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return p;
}

}  // namespace

Permutation match_weights(const Model& w1, const Model& w2, int max_sweeps) {
  if (!models_same_arch(w1, w2)) {
    throw ShapeError("matching needs models with the same architecture");
  }
  if (max_sweeps < 1) throw InputError("match_weights needs max_sweeps >= 1");
  if (w1.num_layers() == 1) return identity_permutation(w1);

  // The descent can stall in a schedule-dependent fixed point on narrow
  // layers, so run both schedules and keep the better objective; the
  // forward-first result wins ties, keeping the identity for w2 == w1.
  Permutation fwd = descend_matching(w1, w2, max_sweeps, false);
  Permutation bwd = descend_matching(w1, w2, max_sweeps, true);
  if (matching_objective(w1, w2, bwd) > matching_objective(w1, w2, fwd)) {
    return bwd;
  }
  return fwd;
}

Model scale_layer(const Model& m, int layer_index, double alpha) {
  if (layer_index < 0 || layer_index + 1 >= m.num_layers()) {
    throw InputError("scale_layer needs a layer with a successor, got index " +
                     std::to_string(layer_index) + " of " +
                     std::to_string(m.num_layers()));
  }
  if (m.layers[size_t(layer_index)].act != Activation::relu) {
    throw InputError("scale_layer requires a relu layer; '" +
                     m.layers[size_t(layer_index)].name +
                     "' is not positively homogeneous");
  }
  if (!(alpha > 0.0)) {
    throw InputError("scale_layer alpha must be positive, got " + fmt17(alpha));
  }
  Model out = m;
  for (double& v : out.layers[size_t(layer_index)].weight.data) v *= alpha;
  for (double& v : out.layers[size_t(layer_index)].bias.data) v *= alpha;
  for (double& v : out.layers[size_t(layer_index) + 1].weight.data) v /= alpha;
  return out;
}

LandscapeGrid landscape_grid(const Model& origin, const Model& axis1,
                             const Model& axis2, const Dataset& data,
                             int resolution, LossKind loss) {
  if (resolution < 2) throw InputError("landscape resolution must be >= 2");
  if (!models_same_arch(origin, axis1) || !models_same_arch(origin, axis2)) {
    throw ShapeError("landscape anchors must share one architecture");
  }
  LandscapeGrid grid;
  grid.resolution = resolution;
  for (int i = 0; i < resolution; ++i) {
    grid.us.push_back(double(i) / double(resolution - 1));
    grid.vs.push_back(double(i) / double(resolution - 1));
  }
  auto po = origin.named_params();
  auto p1 = axis1.named_params();
  auto p2 = axis2.named_params();
  Model point = origin;
  auto pp = point.named_params();
  grid.losses.assign(size_t(resolution) * size_t(resolution), 0.0);
  for (int ui = 0; ui < resolution; ++ui) {
    for (int vi = 0; vi < resolution; ++vi) {
      double u = grid.us[size_t(ui)];
      double v = grid.vs[size_t(vi)];
      for (size_t t = 0; t < pp.size(); ++t) {
        const Tensor& o = *po[t].second;
        const Tensor& a = *p1[t].second;
        const Tensor& b = *p2[t].second;
        Tensor& w = *pp[t].second;
        for (size_t k = 0; k < w.data.size(); ++k) {
          w.data[k] = o.data[k] + u * (a.data[k] - o.data[k]) +
                      v * (b.data[k] - o.data[k]);
        }
      }
      grid.losses[size_t(ui) * size_t(resolution) + size_t(vi)] =
          evaluate(point, data, loss).loss;
    }
  }
  return grid;
}

}  // namespace wsalign
