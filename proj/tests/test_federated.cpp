#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "wsalign/federated.hpp"

using namespace wsalign;

namespace {

bool params_equal(const Model& a, const Model& b) {
  auto pa = a.named_params();
  auto pb = b.named_params();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first) return false;
    if (pa[i].second->data != pb[i].second->data) return false;
  }
  return true;
}

struct FlFixture {
  Dataset train;
  Dataset test;
  Model init;

  FlFixture() {
    auto [tr, te] = make_blobs(3, 6, 30, 0.3, 7);
    train = std::move(tr);
    test = std::move(te);
    init = make_mlp({6, 8, 3}, InitKind::kaiming_normal, 1);
  }

  FLConfig config() const {
    FLConfig cfg;
    cfg.num_clients = 4;
    cfg.rounds = 3;
    cfg.local_steps = 3;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 16;
    cfg.dirichlet_alpha = 1.0;
    cfg.seed = 11;
    return cfg;
  }
};

}  // namespace

TEST_CASE("dirichlet partition covers the data exactly") {
  auto [train, test] = make_blobs(4, 5, 40, 0.3, 3);
  std::vector<Dataset> shards = dirichlet_partition(train, 6, 0.5, 9);
  REQUIRE(shards.size() == 6);

  int64_t total = 0;
  std::vector<int64_t> class_counts(4, 0);
  for (const Dataset& s : shards) {
    CHECK(s.size() >= 1);
    CHECK(s.num_classes == train.num_classes);
    s.validate();
    total += s.size();
    for (int label : s.labels) class_counts[size_t(label)] += 1;
  }
  CHECK(total == train.size());
  for (int64_t c : class_counts) CHECK(c == 40);

  // Same seed, same shards, feature for feature.
  std::vector<Dataset> again = dirichlet_partition(train, 6, 0.5, 9);
  for (size_t k = 0; k < shards.size(); ++k) {
    CHECK(shards[k].labels == again[k].labels);
    CHECK(shards[k].features.data == again[k].features.data);
  }
  std::vector<Dataset> other = dirichlet_partition(train, 6, 0.5, 10);
  bool identical = true;
  for (size_t k = 0; k < shards.size(); ++k) {
    identical = identical && shards[k].labels == other[k].labels;
  }
  CHECK(!identical);
}

TEST_CASE("single-client partition is the dataset itself") {
  auto [train, test] = make_blobs(3, 4, 20, 0.3, 5);
  std::vector<Dataset> shards = dirichlet_partition(train, 1, 0.5, 1);
  REQUIRE(shards.size() == 1);
  CHECK(shards[0].labels == train.labels);
  CHECK(shards[0].features.data == train.features.data);
}

TEST_CASE("partition input guards") {
  auto [train, test] = make_blobs(2, 3, 4, 0.3, 2);
  CHECK_THROWS_AS(dirichlet_partition(train, 0, 0.5, 1), InputError);
  CHECK_THROWS_AS(dirichlet_partition(train, 2, 0.0, 1), InputError);
  CHECK_THROWS_AS(dirichlet_partition(train, 100, 0.5, 1), InputError);
}

TEST_CASE("aggregate is an order-invariant average") {
  Model a = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 1);
  Model b = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 2);
  Model c = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 3);

  Model abc = aggregate({a, b, c});
  Model cab = aggregate({c, a, b});
  CHECK(params_equal(abc, cab));

  // Against an independent mean, to commutation-insensitive accuracy.
  auto pa = a.named_params();
  auto pb = b.named_params();
  auto pc = c.named_params();
  auto pm = abc.named_params();
  for (size_t i = 0; i < pm.size(); ++i) {
    for (size_t k = 0; k < pm[i].second->data.size(); ++k) {
      double want = (pa[i].second->data[k] + pb[i].second->data[k] +
                     pc[i].second->data[k]) / 3.0;
      CHECK(pm[i].second->data[k] == doctest::Approx(want).epsilon(1e-14));
    }
  }

  CHECK(params_equal(aggregate({a}), a));
}

TEST_CASE("weighted aggregation") {
  Model a = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 4);
  Model b = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 5);

  CHECK(params_equal(aggregate({a, b}, {1.0, 0.0}), a));
  CHECK(params_equal(aggregate({a, b}, {0.0, 2.0}), b));
  CHECK(params_equal(aggregate({a, b}, {3.0, 3.0}), aggregate({a, b})));

  CHECK_THROWS_AS(aggregate({a, b}, {1.0}), InputError);
  CHECK_THROWS_AS(aggregate({a, b}, {1.0, -1.0}), InputError);
  CHECK_THROWS_AS(aggregate({a, b}, {0.0, 0.0}), InputError);
  CHECK_THROWS_AS(aggregate({}), InputError);
  Model other = make_mlp({3, 5, 2}, InitKind::kaiming_normal, 6);
  CHECK_THROWS_AS(aggregate({a, other}), ShapeError);
}

TEST_CASE("config validation") {
  FLConfig cfg;
  cfg.num_clients = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FLConfig{};
  cfg.participation_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FLConfig{};
  cfg.rounds = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FLConfig{};
  cfg.wsa_window = {{10, 5}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FLConfig{};
  cfg.rounds = 5;
  cfg.wsa_window = {{0, 6}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FLConfig{};
  cfg.predefined_target = GaussianParams{0.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FLConfig{};
  cfg.threads = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE_FIXTURE(FlFixture, "zero rounds pass the init model through") {
  FLConfig cfg = config();
  cfg.rounds = 0;
  FederationResult res = run_federation(cfg, train, test, init);
  CHECK(res.rounds.empty());
  CHECK(params_equal(res.model, init));
}

TEST_CASE_FIXTURE(FlFixture, "single client federation equals one local update") {
  FLConfig cfg = config();
  cfg.num_clients = 1;
  cfg.rounds = 1;
  FederationResult res = run_federation(cfg, train, test, init);
  REQUIRE(res.rounds.size() == 1);
  CHECK(res.rounds[0].participants == std::vector<int>{0});

  Dataset shard = dirichlet_partition(train, 1, cfg.dirichlet_alpha,
                                      cfg.seed)[0];
  ScopeTarget target = target_from_scope(scope_estimate(init),
                                         ScopeTarget::Origin::init_scope);
  auto [expected, scope] = local_update(init, shard, target, cfg, 0, 0, 0.0);
  CHECK(params_equal(res.model, expected));
}

TEST_CASE_FIXTURE(FlFixture, "federation is deterministic") {
  FLConfig cfg = config();
  cfg.algorithm = FlAlgorithm::fedavg_wsa;
  cfg.lambda = 5.0;
  FederationResult a = run_federation(cfg, train, test, init);
  FederationResult b = run_federation(cfg, train, test, init);
  CHECK(params_equal(a.model, b.model));
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (size_t r = 0; r < a.rounds.size(); ++r) {
    CHECK(a.rounds[r].test_accuracy == b.rounds[r].test_accuracy);
    CHECK(a.rounds[r].train_loss == b.rounds[r].train_loss);
    CHECK(a.rounds[r].mean_scope_kl == b.rounds[r].mean_scope_kl);
    CHECK(a.rounds[r].participants == b.rounds[r].participants);
  }
}

TEST_CASE_FIXTURE(FlFixture, "zero lambda variants collapse onto their bases") {
  FLConfig base = config();
  FLConfig zero = base;
  zero.algorithm = FlAlgorithm::fedavg_wsa;
  zero.lambda = 0.0;
  FederationResult a = run_federation(base, train, test, init);
  FederationResult b = run_federation(zero, train, test, init);
  CHECK(params_equal(a.model, b.model));
  for (size_t r = 0; r < a.rounds.size(); ++r) {
    CHECK(a.rounds[r].train_loss == b.rounds[r].train_loss);
  }
}

TEST_CASE_FIXTURE(FlFixture, "penalty window gates the scope term") {
  FLConfig plain = config();
  plain.rounds = 6;
  FLConfig windowed = plain;
  windowed.algorithm = FlAlgorithm::fedavg_wsa;
  windowed.lambda = 5.0;
  windowed.wsa_window = {{4, 6}};

  FederationResult a = run_federation(plain, train, test, init);
  FederationResult b = run_federation(windowed, train, test, init);
  // Identical up to the window start, bit for bit.
  for (size_t r = 0; r < 4; ++r) {
    CHECK(a.rounds[r].train_loss == b.rounds[r].train_loss);
    CHECK(a.rounds[r].test_accuracy == b.rounds[r].test_accuracy);
    CHECK(a.rounds[r].mean_scope_kl == b.rounds[r].mean_scope_kl);
  }
  // Diverges once the penalty switches on.
  CHECK(!params_equal(a.model, b.model));
}

TEST_CASE_FIXTURE(FlFixture, "striped threading does not change the result") {
  FLConfig cfg = config();
  cfg.algorithm = FlAlgorithm::fedprox_wsa;
  cfg.lambda = 2.0;
  FLConfig threaded = cfg;
  threaded.threads = 3;
  FederationResult a = run_federation(cfg, train, test, init);
  FederationResult b = run_federation(threaded, train, test, init);
  CHECK(params_equal(a.model, b.model));
  for (size_t r = 0; r < a.rounds.size(); ++r) {
    CHECK(a.rounds[r].train_loss == b.rounds[r].train_loss);
  }
}

TEST_CASE_FIXTURE(FlFixture, "partial participation samples per round") {
  FLConfig cfg = config();
  cfg.participation_fraction = 0.5;
  cfg.rounds = 4;
  FederationResult res = run_federation(cfg, train, test, init);
  bool varied = false;
  for (const RoundRecord& rec : res.rounds) {
    REQUIRE(rec.participants.size() == 2);
    CHECK(std::is_sorted(rec.participants.begin(), rec.participants.end()));
    CHECK(rec.client_kls.size() == rec.participants.size());
    CHECK(rec.client_scopes.size() == rec.participants.size());
    varied = varied || rec.participants != res.rounds[0].participants;
  }
  CHECK(varied);
}

TEST_CASE_FIXTURE(FlFixture, "predefined target is held fixed") {
  FLConfig cfg = config();
  cfg.algorithm = FlAlgorithm::fedavg_wsa;
  cfg.lambda = 1.0;
  cfg.predefined_target = GaussianParams{0.0, 0.2};
  FederationResult res = run_federation(cfg, train, test, init);
  for (const RoundRecord& rec : res.rounds) {
    CHECK(rec.target_used.origin == ScopeTarget::Origin::fixed_hyperparameter);
    for (const auto& [name, g] : rec.target_used.entries) {
      CHECK(g.mu == 0.0);
      CHECK(g.sigma == 0.2);
    }
  }
}

TEST_CASE_FIXTURE(FlFixture, "fused target evolves between rounds") {
  FLConfig cfg = config();
  cfg.algorithm = FlAlgorithm::fedavg_wsa;
  cfg.lambda = 1.0;
  FederationResult res = run_federation(cfg, train, test, init);
  REQUIRE(res.rounds.size() >= 2);
  CHECK(res.rounds[0].target_used.origin == ScopeTarget::Origin::init_scope);
  CHECK(res.rounds[1].target_used.origin == ScopeTarget::Origin::fused);
}

TEST_CASE_FIXTURE(FlFixture, "local divergence names the round and client") {
  FLConfig cfg = config();
  cfg.learning_rate = 1e9;
  CHECK_THROWS_WITH_AS(run_federation(cfg, train, test, init),
                       doctest::Contains("round 0, client"), NumericError);
}
