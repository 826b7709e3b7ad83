#include "wsalign/model.hpp"

#include <cmath>
#include <set>

#include "wsalign/common.hpp"

namespace wsalign {

std::vector<std::pair<std::string, const Tensor*>> Model::named_params()
    const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(layers.size() * 2);
  for (const DenseLayer& l : layers) {
    out.emplace_back(l.name + ".weight", &l.weight);
    out.emplace_back(l.name + ".bias", &l.bias);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.reserve(layers.size() * 2);
  for (DenseLayer& l : layers) {
    out.emplace_back(l.name + ".weight", &l.weight);
    out.emplace_back(l.name + ".bias", &l.bias);
  }
  return out;
}

void Model::validate() const {
  if (layers.empty()) throw InputError("model has no layers");
  std::set<std::string> names;
  for (size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.name.empty()) throw InputError("layer " + std::to_string(i) + " has an empty name");
    if (!names.insert(l.name).second) {
      throw InputError("duplicate layer name '" + l.name + "'");
    }
    if (l.weight.shape.size() != 2) {
      throw ShapeError("layer '" + l.name + "' weight must be 2-D, got " +
                       shape_str(l.weight.shape));
    }
    if (l.bias.shape.size() != 1 || l.bias.numel() != l.weight.rows()) {
      throw ShapeError("layer '" + l.name + "' bias shape " +
                       shape_str(l.bias.shape) + " does not match " +
                       std::to_string(l.weight.rows()) + " output units");
    }
    if (i + 1 < layers.size() &&
        layers[i + 1].weight.cols() != l.weight.rows()) {
      throw ShapeError("layer '" + layers[i + 1].name + "' expects " +
                       std::to_string(layers[i + 1].weight.cols()) +
                       " inputs but '" + l.name + "' emits " +
                       std::to_string(l.weight.rows()));
    }
  }
  if (layers.back().act != Activation::identity) {
    throw InputError("output layer must use the identity activation");
  }
  ArchSpec spec = parse_arch_id(arch_id);
  if (spec.dims.size() != layers.size() + 1) {
    throw ShapeError("arch_id '" + arch_id + "' describes " +
                     std::to_string(spec.dims.size() - 1) + " layers, model has " +
                     std::to_string(layers.size()));
  }
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.cols() != spec.dims[i] ||
        layers[i].weight.rows() != spec.dims[i + 1] ||
        layers[i].act != spec.acts[i]) {
      throw ShapeError("layer '" + layers[i].name +
                       "' disagrees with arch_id '" + arch_id + "'");
    }
  }
}

std::string make_arch_id(const ArchSpec& spec) {
  if (spec.dims.size() < 2 || spec.acts.size() != spec.dims.size() - 1) {
    throw InputError("arch spec needs >= 2 dims and one activation per layer");
  }
  std::string s = "mlp:" + std::to_string(spec.dims[0]);
  for (size_t i = 1; i < spec.dims.size(); ++i) {
    s += "-" + std::to_string(spec.dims[i]);
    s += spec.acts[i - 1] == Activation::relu ? 'r' : 'i';
  }
  return s;
}

ArchSpec parse_arch_id(const std::string& arch_id) {
  const std::string prefix = "mlp:";
  if (arch_id.rfind(prefix, 0) != 0) {
    throw ParseError("arch_id '" + arch_id + "' must start with 'mlp:'");
  }
  ArchSpec spec;
  size_t pos = prefix.size();
  bool first = true;
  while (pos < arch_id.size()) {
    size_t end = arch_id.find('-', pos);
    if (end == std::string::npos) end = arch_id.size();
    std::string tok = arch_id.substr(pos, end - pos);
    if (tok.empty()) throw ParseError("arch_id '" + arch_id + "' has an empty segment");
    char act = 0;
    if (!first) {
      act = tok.back();
      if (act != 'r' && act != 'i') {
        throw ParseError("arch_id segment '" + tok +
                         "' must end in 'r' or 'i'");
      }
      tok.pop_back();
    }
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError("arch_id segment '" + tok + "' is not a positive integer");
    }
    int64_t dim = std::stoll(tok);
    if (dim <= 0) throw ParseError("arch_id dimensions must be positive");
    spec.dims.push_back(dim);
    if (!first) {
      spec.acts.push_back(act == 'r' ? Activation::relu
                                     : Activation::identity);
    }
    first = false;
    pos = end + 1;
  }
  if (spec.dims.size() < 2) {
    throw ParseError("arch_id '" + arch_id + "' needs an input and an output dim");
  }
  return spec;
}

Model make_mlp(const std::vector<int64_t>& dims, InitKind init,
               uint64_t seed) {
  if (dims.size() < 2) throw InputError("an mlp needs at least input and output dims");
  for (int64_t d : dims) {
    if (d <= 0) throw InputError("mlp dims must be positive");
  }
  ArchSpec spec;
  spec.dims = dims;
  for (size_t i = 1; i < dims.size(); ++i) {
    spec.acts.push_back(i + 1 < dims.size() ? Activation::relu
                                            : Activation::identity);
  }
  Model m;
  m.arch_id = make_arch_id(spec);
  m.seed = seed;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer layer;
    layer.name = "fc" + std::to_string(i + 1);
    layer.act = spec.acts[i];
    int64_t fan_in = dims[i];
    int64_t fan_out = dims[i + 1];
    layer.weight = Tensor::zeros({fan_out, fan_in});
    layer.bias = Tensor::zeros({fan_out});
    Rng rng = Rng::keyed(seed, {0x11A7u, uint64_t(i)});
    if (init == InitKind::kaiming_normal) {
      double std = std::sqrt(2.0 / double(fan_in));
      for (double& w : layer.weight.data) w = std * rng.next_gaussian();
    } else {
      double bound = std::sqrt(6.0 / double(fan_in));
      for (double& w : layer.weight.data) {
        w = bound * (2.0 * rng.next_double() - 1.0);
      }
    }
    // Biases get a nonzero uniform init so every tensor has a usable scope;
    // a zero-variance bias would pin its target sigma at the floor and blow
    // up the KL gradient.
    double bias_bound = 1.0 / std::sqrt(double(fan_in));
    for (double& b : layer.bias.data) {
      b = bias_bound * (2.0 * rng.next_double() - 1.0);
    }
    m.layers.push_back(std::move(layer));
  }
  m.validate();
  return m;
}

ParamTensors zeros_like_params(const Model& m) {
  ParamTensors out;
  out.reserve(m.layers.size() * 2);
  for (const DenseLayer& l : m.layers) {
    out.push_back(Tensor::zeros(l.weight.shape));
    out.push_back(Tensor::zeros(l.bias.shape));
  }
  return out;
}

void add_scaled(ParamTensors& a, const ParamTensors& b, double s) {
  if (a.size() != b.size()) {
    throw ShapeError("parameter lists differ in length");
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) {
      throw ShapeError("parameter tensor " + std::to_string(i) +
                       " shape mismatch: " + shape_str(a[i].shape) + " vs " +
                       shape_str(b[i].shape));
    }
    for (size_t k = 0; k < a[i].data.size(); ++k) {
      a[i].data[k] += s * b[i].data[k];
    }
  }
}

bool params_match(const Model& m, const ParamTensors& p) {
  if (p.size() != m.layers.size() * 2) return false;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    if (!p[2 * i].same_shape(m.layers[i].weight)) return false;
    if (!p[2 * i + 1].same_shape(m.layers[i].bias)) return false;
  }
  return true;
}

bool models_same_arch(const Model& a, const Model& b) {
  if (a.arch_id != b.arch_id) return false;
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].name != b.layers[i].name) return false;
    if (!a.layers[i].weight.same_shape(b.layers[i].weight)) return false;
    if (!a.layers[i].bias.same_shape(b.layers[i].bias)) return false;
    if (a.layers[i].act != b.layers[i].act) return false;
  }
  return true;
}

}  // namespace wsalign
