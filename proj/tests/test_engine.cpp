#include <cmath>

#include "doctest.h"
#include "wsalign/engine.hpp"
#include "wsalign/io.hpp"
#include "wsalign/regularizer.hpp"

using namespace wsalign;

namespace {

// Central finite differences of a scalar function of the model parameters.
template <typename F>
ParamTensors fd_grads(Model m, F loss_fn, double h = 1e-5) {
  ParamTensors out = zeros_like_params(m);
  auto params = m.named_params();
  for (size_t t = 0; t < params.size(); ++t) {
    Tensor* tensor = params[t].second;
    for (size_t i = 0; i < tensor->data.size(); ++i) {
      double orig = tensor->data[i];
      tensor->data[i] = orig + h;
      double up = loss_fn(m);
      tensor->data[i] = orig - h;
      double down = loss_fn(m);
      tensor->data[i] = orig;
      out[t].data[i] = (up - down) / (2.0 * h);
    }
  }
  return out;
}

double max_rel_err(const ParamTensors& a, const ParamTensors& b) {
  double worst = 0.0;
  for (size_t t = 0; t < a.size(); ++t) {
    for (size_t i = 0; i < a[t].data.size(); ++i) {
      double denom = std::max({std::abs(a[t].data[i]), std::abs(b[t].data[i]),
                               1e-6});
      worst = std::max(worst, std::abs(a[t].data[i] - b[t].data[i]) / denom);
    }
  }
  return worst;
}

Dataset random_batch(int n, int dim, int classes, uint64_t seed) {
  Dataset ds;
  ds.num_classes = classes;
  ds.features = Tensor::zeros({n, dim});
  Rng rng(seed);
  for (double& v : ds.features.data) v = rng.next_gaussian();
  for (int i = 0; i < n; ++i) {
    ds.labels.push_back(int(rng.next_index(classes)));
  }
  return ds;
}

}  // namespace

TEST_CASE("forward matches a hand computation") {
  // Single identity layer: logits = x W^T + b.
  Model m;
  m.arch_id = "mlp:2-2i";
  m.seed = 0;
  DenseLayer l;
  l.name = "fc1";
  l.act = Activation::identity;
  l.weight = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
  l.bias = Tensor({2}, {0.5, -0.5});
  m.layers.push_back(l);
  m.validate();

  Tensor x({1, 2}, {1.0, -1.0});
  Tensor y = forward(m, x);
  CHECK(y.at2(0, 0) == doctest::Approx(1.0 - 2.0 + 0.5));
  CHECK(y.at2(0, 1) == doctest::Approx(3.0 - 4.0 - 0.5));
}

TEST_CASE("relu zeroes negative pre-activations") {
  Model m;
  m.arch_id = "mlp:1-2r-1i";
  m.seed = 0;
  DenseLayer a;
  a.name = "fc1";
  a.act = Activation::relu;
  a.weight = Tensor({2, 1}, {1.0, -1.0});
  a.bias = Tensor({2}, {0.0, 0.0});
  DenseLayer b;
  b.name = "fc2";
  b.act = Activation::identity;
  b.weight = Tensor({1, 2}, {1.0, 1.0});
  b.bias = Tensor({1}, {0.0});
  m.layers = {a, b};
  m.validate();

  Tensor x({2, 1}, {2.0, -3.0});
  Tensor y = forward(m, x);
  CHECK(y.at2(0, 0) == doctest::Approx(2.0));  // relu(2) + relu(-2) = 2
  CHECK(y.at2(1, 0) == doctest::Approx(3.0));  // relu(-3) + relu(3) = 3
}

TEST_CASE("cross entropy value on known logits") {
  Model m;
  m.arch_id = "mlp:2-2i";
  m.seed = 0;
  DenseLayer l;
  l.name = "fc1";
  l.act = Activation::identity;
  l.weight = Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0});
  l.bias = Tensor({2}, {0.0, 0.0});
  m.layers.push_back(l);

  Tensor x({1, 2}, {2.0, 0.0});  // logits (2, 0)
  ParamTensors grads = zeros_like_params(m);
  double loss = loss_and_grad_ce(m, x, {0}, grads);
  double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences") {
  Rng seeds(2024);
  for (int trial = 0; trial < 10; ++trial) {
    uint64_t s = seeds.next_u64();
    int classes = 2 + int(s % 3);
    Model m = make_mlp({5, 7, classes},
                       trial % 2 ? InitKind::kaiming_uniform
                                 : InitKind::kaiming_normal,
                       s);
    Dataset batch = random_batch(6, 5, classes, s ^ 0xABCD);

    ParamTensors grads = zeros_like_params(m);
    double base = loss_and_grad_ce(m, batch.features, batch.labels, grads);
    CHECK(std::isfinite(base));
    ParamTensors fd = fd_grads(m, [&](const Model& mm) {
      ParamTensors tmp = zeros_like_params(mm);
      return loss_and_grad_ce(mm, batch.features, batch.labels, tmp);
    });
    CHECK(max_rel_err(grads, fd) < 1e-4);
  }
}

TEST_CASE("mse gradients match finite differences") {
  Model m = make_mlp({4, 6, 3}, InitKind::kaiming_normal, 55);
  Dataset batch = random_batch(5, 4, 3, 100);
  ParamTensors grads = zeros_like_params(m);
  double base = loss_and_grad(m, batch.features, batch.labels, LossKind::mse,
                              grads);
  CHECK(std::isfinite(base));
  ParamTensors fd = fd_grads(m, [&](const Model& mm) {
    ParamTensors tmp = zeros_like_params(mm);
    return loss_and_grad(mm, batch.features, batch.labels, LossKind::mse, tmp);
  });
  CHECK(max_rel_err(grads, fd) < 1e-4);
}

TEST_CASE("evaluate reports loss and accuracy; argmax ties go low") {
  Model m = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 5);
  for (DenseLayer& l : m.layers) {
    for (double& v : l.weight.data) v = 0.0;
    for (double& v : l.bias.data) v = 0.0;
  }
  Dataset ds = random_batch(10, 3, 2, 6);
  EvalResult r = evaluate(m, ds);
  // All logits are zero, so every row predicts class 0.
  int64_t zeros = 0;
  for (int y : ds.labels) zeros += (y == 0);
  CHECK(r.accuracy == doctest::Approx(double(zeros) / 10.0));
  CHECK(r.loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("sgd step follows the recurrence") {
  Model m = make_mlp({2, 3, 2}, InitKind::kaiming_normal, 1);
  Model orig = m;
  OptimizerState opt = make_optimizer(OptKind::sgd, m, 0.1, 0.0, 0.0);
  ParamTensors g = zeros_like_params(m);
  for (Tensor& t : g) {
    for (double& v : t.data) v = 2.0;
  }
  optimizer_step(opt, m, g);
  auto before = orig.named_params();
  auto after = m.named_params();
  for (size_t t = 0; t < before.size(); ++t) {
    for (size_t i = 0; i < before[t].second->data.size(); ++i) {
      CHECK(after[t].second->data[i] ==
            doctest::Approx(before[t].second->data[i] - 0.1 * 2.0)
                .epsilon(1e-15));
    }
  }
}

TEST_CASE("momentum accumulates") {
  Model m = make_mlp({2, 2, 2}, InitKind::kaiming_normal, 2);
  double w0 = m.layers[0].weight.data[0];
  OptimizerState opt = make_optimizer(OptKind::sgd, m, 0.1, 0.9, 0.0);
  ParamTensors g = zeros_like_params(m);
  g[0].data[0] = 1.0;
  optimizer_step(opt, m, g);
  CHECK(m.layers[0].weight.data[0] == doctest::Approx(w0 - 0.1));
  optimizer_step(opt, m, g);
  // buf = 0.9 * 1 + 1 = 1.9
  CHECK(m.layers[0].weight.data[0] == doctest::Approx(w0 - 0.1 - 0.19));
}

TEST_CASE("weight decay adds decay times weight to the gradient") {
  Model m = make_mlp({2, 2, 2}, InitKind::kaiming_normal, 3);
  double w0 = m.layers[0].weight.data[0];
  OptimizerState opt = make_optimizer(OptKind::sgd, m, 0.1, 0.0, 0.5);
  ParamTensors g = zeros_like_params(m);
  optimizer_step(opt, m, g);
  CHECK(m.layers[0].weight.data[0] ==
        doctest::Approx(w0 - 0.1 * 0.5 * w0).epsilon(1e-15));
}

TEST_CASE("adam first step magnitude follows the written recurrence") {
  Model m = make_mlp({2, 3, 2}, InitKind::kaiming_normal, 4);
  Model orig = m;
  double lr = 0.003;
  OptimizerState opt = make_optimizer(OptKind::adam, m, lr);
  ParamTensors g = zeros_like_params(m);
  Rng rng(9);
  for (Tensor& t : g) {
    for (double& v : t.data) v = rng.next_gaussian() + 2.0;  // nonzero
  }
  optimizer_step(opt, m, g);
  auto before = orig.named_params();
  auto after = m.named_params();
  for (size_t t = 0; t < before.size(); ++t) {
    for (size_t i = 0; i < before[t].second->data.size(); ++i) {
      double grad = g[t].data[i];
      // step 1: m_hat = g, v_hat = g^2 -> delta = lr * g / (|g| + eps)
      double expected = lr * grad / (std::abs(grad) + 1e-8);
      double delta = after[t].second->data[i] - before[t].second->data[i];
      CHECK(std::abs(delta + expected) < 1e-9);
    }
  }
}

TEST_CASE("optimizer rejects non-finite gradients with the tensor name") {
  Model m = make_mlp({2, 3, 2}, InitKind::kaiming_normal, 4);
  OptimizerState opt = make_optimizer(OptKind::sgd, m, 0.1);
  ParamTensors g = zeros_like_params(m);
  g[2].data[0] = std::nan("");
  try {
    optimizer_step(opt, m, g);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("fc2.weight") != std::string::npos);
  }
}

TEST_CASE("training is bit-identical for identical seed and config") {
  auto [train_data, test_data] = make_blobs(3, 5, 20, 0.3, 12);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  Model init = make_mlp({5, 8, 3}, InitKind::kaiming_normal, 7);
  TrainResult a = train(init, train_data, cfg, no_regularizer(), 31);
  TrainResult b = train(init, train_data, cfg, no_regularizer(), 31);
  CHECK(checkpoint_to_json(a.model) == checkpoint_to_json(b.model));
  REQUIRE(a.log.size() == 3);
  CHECK(a.log[0].epoch == 1);
  CHECK(a.log[2].loss == b.log[2].loss);
  CHECK(!a.log[0].scope.entries.empty());

  TrainResult c = train(init, train_data, cfg, no_regularizer(), 32);
  CHECK(checkpoint_to_json(a.model) != checkpoint_to_json(c.model));
}

TEST_CASE("zero epochs returns the init unchanged") {
  auto [train_data, test_data] = make_blobs(3, 5, 10, 0.3, 12);
  TrainConfig cfg;
  cfg.epochs = 0;
  Model init = make_mlp({5, 4, 3}, InitKind::kaiming_normal, 7);
  TrainResult r = train(init, train_data, cfg, no_regularizer(), 1);
  CHECK(checkpoint_to_json(r.model) == checkpoint_to_json(init));
  CHECK(r.log.empty());
}

TEST_CASE("training aborts on divergence") {
  auto [train_data, test_data] = make_blobs(3, 5, 20, 0.3, 12);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 1e9;
  Model init = make_mlp({5, 8, 3}, InitKind::kaiming_normal, 7);
  try {
    train(init, train_data, cfg, no_regularizer(), 31);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("gradient of the total regularized loss matches finite differences") {
  // The composed objective the trainer optimizes, including the KL penalty.
  Model m = make_mlp({4, 6, 3}, InitKind::kaiming_normal, 21);
  Dataset batch = random_batch(8, 4, 3, 77);
  ScopeTarget target = target_from_scope(scope_estimate(m),
                                         ScopeTarget::Origin::init_scope);
  // Perturb the model so it sits away from the target.
  Rng rng(5);
  for (auto& [name, t] : m.named_params()) {
    for (double& v : t->data) v += 0.05 * rng.next_gaussian();
  }
  RegularizerSpec reg = wsa_reg(2.0, target);
  ParamTensors grads = zeros_like_params(m);
  double loss = loss_and_grad_ce(m, batch.features, batch.labels, grads);
  loss += penalty_and_grad(reg, m, grads);
  CHECK(std::isfinite(loss));
  ParamTensors fd = fd_grads(m, [&](const Model& mm) {
    ParamTensors tmp = zeros_like_params(mm);
    double l = loss_and_grad_ce(mm, batch.features, batch.labels, tmp);
    return l + penalty_only(reg, mm);
  });
  CHECK(max_rel_err(grads, fd) < 1e-4);
}
