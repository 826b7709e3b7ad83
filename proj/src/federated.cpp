#include "wsalign/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "wsalign/common.hpp"
#include "wsalign/regularizer.hpp"

namespace wsalign {

void FLConfig::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (!(participation_fraction > 0.0) || participation_fraction > 1.0) {
    throw ConfigError("participation_fraction must lie in (0, 1]");
  }
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (local_steps < 1) throw ConfigError("local_steps must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (prox_mu < 0.0) throw ConfigError("prox_mu must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("dirichlet_alpha must be positive");
  if (wsa_window) {
    auto [start, end] = *wsa_window;
    if (start < 0 || start >= end || end > rounds) {
      throw ConfigError("wsa_window must satisfy 0 <= start < end <= rounds");
    }
  }
  if (predefined_target && !(predefined_target->sigma > 0.0)) {
    throw ConfigError("predefined target sigma must be positive");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::vector<Dataset> dirichlet_partition(const Dataset& data, int num_clients,
                                         double alpha, uint64_t seed) {
  data.validate();
  if (num_clients < 1) throw InputError("partition needs num_clients >= 1");
  if (!(alpha > 0.0)) throw InputError("dirichlet alpha must be positive");
  if (data.size() < num_clients) {
    throw InputError("dataset of " + std::to_string(data.size()) +
                     " rows cannot cover " + std::to_string(num_clients) +
                     " clients");
  }
  std::vector<std::vector<int64_t>> by_class(size_t(data.num_classes));
  for (int64_t i = 0; i < data.size(); ++i) {
    by_class[size_t(data.labels[size_t(i)])].push_back(i);
  }

  const int max_attempts = 100;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<std::vector<int64_t>> assigned(static_cast<size_t>(num_clients));
    for (int c = 0; c < data.num_classes; ++c) {
      std::vector<int64_t> rows = by_class[size_t(c)];
      if (rows.empty()) continue;
      Rng rng = Rng::keyed(seed, {0xD112u, uint64_t(attempt), uint64_t(c)});
      rng.shuffle(rows);
      std::vector<double> props(static_cast<size_t>(num_clients));
      double total = 0.0;
      for (double& p : props) {
        p = rng.next_gamma(alpha);
        total += p;
      }
      for (double& p : props) p /= total;
      // Largest-remainder rounding so the counts sum exactly to the class size.
      int64_t n = int64_t(rows.size());
      std::vector<int64_t> counts(static_cast<size_t>(num_clients));
      std::vector<std::pair<double, int>> fracs;
      int64_t allocated = 0;
      for (int k = 0; k < num_clients; ++k) {
        double want = props[size_t(k)] * double(n);
        counts[size_t(k)] = int64_t(std::floor(want));
        allocated += counts[size_t(k)];
        fracs.emplace_back(want - std::floor(want), k);
      }
      std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (int64_t r = 0; r < n - allocated; ++r) {
        counts[size_t(fracs[size_t(r)].second)] += 1;
      }
      int64_t pos = 0;
      for (int k = 0; k < num_clients; ++k) {
        for (int64_t i = 0; i < counts[size_t(k)]; ++i) {
          assigned[size_t(k)].push_back(rows[size_t(pos++)]);
        }
      }
    }
    bool ok = true;
    for (const std::vector<int64_t>& rows : assigned) {
      if (rows.empty()) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    std::vector<Dataset> shards;
    shards.reserve(size_t(num_clients));
    for (std::vector<int64_t>& rows : assigned) {
      std::sort(rows.begin(), rows.end());
      Dataset shard;
      shard.num_classes = data.num_classes;
      shard.split = data.split;
      shard.features = Tensor::zeros({int64_t(rows.size()), data.dim()});
      shard.labels.resize(rows.size());
      for (size_t i = 0; i < rows.size(); ++i) {
        shard.labels[i] = data.labels[size_t(rows[i])];
        for (int64_t d = 0; d < data.dim(); ++d) {
          shard.features.at2(int64_t(i), d) = data.features.at2(rows[i], d);
        }
      }
      shards.push_back(std::move(shard));
    }
    return shards;
  }
  throw InputError("dirichlet partition produced an empty shard in " +
                   std::to_string(max_attempts) +
                   " attempts; increase alpha or reduce num_clients");
}

std::pair<Model, WeightScope> local_update(const Model& global,
                                           const Dataset& shard,
                                           const ScopeTarget& target,
                                           const FLConfig& config, int round,
                                           int client_id, double lambda_eff) {
  if (config.local_steps < 1) throw ConfigError("local_steps must be >= 1");
  try {
    std::vector<RegularizerSpec> regs;
    bool prox = config.algorithm == FlAlgorithm::fedprox ||
                config.algorithm == FlAlgorithm::fedprox_wsa;
    bool wsa = config.algorithm == FlAlgorithm::fedavg_wsa ||
               config.algorithm == FlAlgorithm::fedprox_wsa;
    if (prox && config.prox_mu != 0.0) {
      regs.push_back(proximal_reg(config.prox_mu, global));
    }
    if (wsa && lambda_eff != 0.0) {
      regs.push_back(wsa_reg(lambda_eff, target, config.scope_biases));
    }

    Model model = global;
    OptimizerState opt =
        make_optimizer(OptKind::sgd, model, config.learning_rate, 0.0,
                       config.weight_decay);
    Rng rng = Rng::keyed(config.seed,
                         {0xF10Cu, uint64_t(round), uint64_t(client_id)});
    int64_t n = shard.size();
    int64_t bs = std::min<int64_t>(config.batch_size, n);
    ParamTensors grads = zeros_like_params(model);
    Tensor xb = Tensor::zeros({bs, shard.dim()});
    std::vector<int> yb(static_cast<size_t>(bs));
    for (int step = 0; step < config.local_steps; ++step) {
      for (int64_t r = 0; r < bs; ++r) {
        int64_t src = rng.next_index(n);
        yb[size_t(r)] = shard.labels[size_t(src)];
        for (int64_t d = 0; d < shard.dim(); ++d) {
          xb.at2(r, d) = shard.features.at2(src, d);
        }
      }
      for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
      double loss = loss_and_grad_ce(model, xb, yb, grads);
      for (const RegularizerSpec& reg : regs) {
        loss += penalty_and_grad(reg, model, grads);
      }
      if (!std::isfinite(loss) || loss > 1e6) {
        throw NumericError("local loss diverged (" + fmt17(loss) + ") at step " +
                           std::to_string(step + 1));
      }
      optimizer_step(opt, model, grads);
    }
    return {std::move(model), scope_estimate(model, config.scope_biases)};
  } catch (const NumericError& e) {
    throw NumericError("round " + std::to_string(round) + ", client " +
                       std::to_string(client_id) + ": " + e.what());
  }
}

namespace {

Model aggregate_impl(const std::vector<Model>& models,
                     const std::vector<double>* weights) {
  if (models.empty()) throw InputError("aggregate needs at least one model");
  for (size_t k = 1; k < models.size(); ++k) {
    if (!models_same_arch(models[0], models[k])) {
      throw ShapeError("aggregate: model " + std::to_string(k) +
                       " differs in architecture");
    }
  }
  std::vector<double> a(models.size(), 1.0 / double(models.size()));
  if (weights) {
    if (weights->size() != models.size()) {
      throw InputError("aggregate got " + std::to_string(weights->size()) +
                       " weights for " + std::to_string(models.size()) +
                       " models");
    }
    double total = 0.0;
    for (double w : *weights) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw InputError("aggregate weights must be finite and >= 0");
      }
      total += w;
    }
    if (total <= 0.0) throw InputError("aggregate weights sum to zero");
    for (size_t k = 0; k < a.size(); ++k) a[k] = (*weights)[k] / total;
  }

  Model out = models[0];
  auto po = out.named_params();
  std::vector<std::vector<std::pair<std::string, const Tensor*>>> params;
  params.reserve(models.size());
  for (const Model& m : models) params.push_back(m.named_params());
  // Canonical per-element order: terms sorted by (value, weight) before
  // summing, so any permutation of the model list sums identically.
  std::vector<std::pair<double, double>> terms(models.size());
  for (size_t t = 0; t < po.size(); ++t) {
    Tensor& dst = *po[t].second;
    for (size_t e = 0; e < dst.data.size(); ++e) {
      for (size_t k = 0; k < models.size(); ++k) {
        terms[k] = {params[k][t].second->data[e], a[k]};
      }
      std::sort(terms.begin(), terms.end());
      double acc = 0.0;
      for (const auto& [v, w] : terms) acc += w * v;
      dst.data[e] = acc;
    }
  }
  return out;
}

}  // namespace

Model aggregate(const std::vector<Model>& models) {
  return aggregate_impl(models, nullptr);
}

Model aggregate(const std::vector<Model>& models,
                const std::vector<double>& weights) {
  return aggregate_impl(models, &weights);
}

FederationResult run_federation(const FLConfig& config, const Dataset& train,
                                const Dataset& test, const Model& init) {
  config.validate();
  init.validate();
  train.validate();
  test.validate();
  std::vector<Dataset> shards = dirichlet_partition(
      train, config.num_clients, config.dirichlet_alpha, config.seed);

  bool wsa = config.algorithm == FlAlgorithm::fedavg_wsa ||
             config.algorithm == FlAlgorithm::fedprox_wsa;
  ScopeTarget target;
  if (config.predefined_target) {
    target = predefined_target(
        scope_estimate(init, config.scope_biases).names(),
        config.predefined_target->mu, config.predefined_target->sigma);
  } else {
    target = target_from_scope(scope_estimate(init, config.scope_biases),
                               ScopeTarget::Origin::init_scope);
  }

  int sampled = int(std::ceil(config.participation_fraction *
                              double(config.num_clients)));
  sampled = std::min(sampled, config.num_clients);

  FederationResult result;
  result.model = init;
  for (int round = 0; round < config.rounds; ++round) {
    std::vector<int> ids(size_t(config.num_clients));
    std::iota(ids.begin(), ids.end(), 0);
    Rng sampler = Rng::keyed(config.seed, {0x9A27u, uint64_t(round)});
    sampler.shuffle(ids);
    ids.resize(size_t(sampled));
    std::sort(ids.begin(), ids.end());

    double lambda_eff = wsa ? config.lambda : 0.0;
    if (config.wsa_window && (round < config.wsa_window->first ||
                              round >= config.wsa_window->second)) {
      lambda_eff = 0.0;
    }

    std::vector<Model> updated(ids.size());
    std::vector<WeightScope> scopes(ids.size());
    std::vector<std::string> failures(ids.size());
    auto worker = [&](size_t begin, size_t stride) {
      for (size_t idx = begin; idx < ids.size(); idx += stride) {
        try {
          auto [m, s] = local_update(result.model, shards[size_t(ids[idx])],
                                     target, config, round, ids[idx],
                                     lambda_eff);
          updated[idx] = std::move(m);
          scopes[idx] = std::move(s);
        } catch (const std::exception& e) {
          failures[idx] = e.what();
        }
      }
    };
    int workers = std::min<int>(config.threads, int(ids.size()));
    if (workers <= 1) {
      worker(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back(worker, size_t(w), size_t(workers));
      }
      for (std::thread& t : pool) t.join();
    }
    for (const std::string& f : failures) {
      if (!f.empty()) throw NumericError(f);
    }

    if (config.weighted_aggregation) {
      std::vector<double> weights;
      weights.reserve(ids.size());
      for (int id : ids) {
        weights.push_back(double(shards[size_t(id)].size()));
      }
      result.model = aggregate(updated, weights);
    } else {
      result.model = aggregate(updated);
    }

    RoundRecord rec;
    rec.round = round;
    rec.participants = ids;
    rec.test_accuracy = evaluate(result.model, test).accuracy;
    rec.train_loss = evaluate(result.model, train).loss;
    rec.target_used = target;
    double kl_total = 0.0;
    for (size_t i = 0; i < scopes.size(); ++i) {
      double kl = mean_scope_kl(scopes[i], target);
      rec.client_kls.push_back(kl);
      kl_total += kl;
      rec.client_scopes.emplace_back(ids[i], scopes[i]);
    }
    rec.mean_scope_kl = kl_total / double(scopes.size());
    result.rounds.push_back(std::move(rec));

    if (!config.predefined_target) {
      target = scope_fuse(scopes);
    }
  }
  return result;
}

}  // namespace wsalign
