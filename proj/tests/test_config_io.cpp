#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "wsalign/config.hpp"
#include "wsalign/io.hpp"

using namespace wsalign;
namespace fs = std::filesystem;

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

// A fresh directory under the system temp root, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("wsalign_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("checkpoint json round trip is exact") {
  Model m = make_mlp({3, 4, 2}, InitKind::kaiming_uniform, 42);
  std::string json = checkpoint_to_json(m);
  Model back = checkpoint_from_json(json, "roundtrip");
  CHECK(back.arch_id == m.arch_id);
  CHECK(back.seed == m.seed);
  CHECK(params_equal(back, m));
}

TEST_CASE("checkpoint files round trip") {
  TempDir tmp("ckpt");
  Model m = make_mlp({5, 6, 3}, InitKind::kaiming_normal, 7);
  save_checkpoint(m, tmp.file("m.json"));
  Model back = load_checkpoint(tmp.file("m.json"));
  CHECK(params_equal(back, m));
  CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.json")), InputError);
}

TEST_CASE("checkpoint loading rejects malformed input") {
  CHECK_THROWS_AS(checkpoint_from_json("{", "bad"), ParseError);
  CHECK_THROWS_AS(checkpoint_from_json("[]", "bad"), ParseError);
  CHECK_THROWS_AS(checkpoint_from_json("{\"arch_id\": \"mlp:2-2i\"}", "bad"),
                  ParseError);

  Model m = make_mlp({3, 4, 2}, InitKind::kaiming_normal, 1);
  std::string json = checkpoint_to_json(m);

  // Architecture disagreeing with the tensor shapes.
  std::string wrong = json;
  size_t pos = wrong.find("mlp:3-4r-2i");
  REQUIRE(pos != std::string::npos);
  wrong.replace(pos, 11, "mlp:3-5r-2i");
  CHECK_THROWS_AS(checkpoint_from_json(wrong, "bad"), ParseError);

  // Non-finite parameter value.
  std::string inf = json;
  pos = inf.find("\"values\": [");
  REQUIRE(pos != std::string::npos);
  pos += 11;
  size_t comma = inf.find(',', pos);
  inf.replace(pos, comma - pos, "1e999");
  CHECK_THROWS_AS(checkpoint_from_json(inf, "bad"), ParseError);
}

TEST_CASE("empty config text gives the documented defaults") {
  ExperimentConfig cfg = parse_config("", "empty.ini");
  CHECK(cfg.command == Command::train);
  CHECK(cfg.out == "out");
  CHECK(cfg.seed == 1);
  CHECK(cfg.data.classes == 10);
  CHECK(cfg.data.dim == 20);
  CHECK(cfg.model.hidden == std::vector<int64_t>{32, 32});
  CHECK(cfg.train.epochs == 100);
  CHECK(cfg.reg.lambda == 5.0);
  CHECK(cfg.fl.rounds == 150);
  CHECK(cfg.fl.local_steps == 20);
  CHECK(cfg.interpolate.grid == 21);
}

TEST_CASE("comments, blank lines, and spacing are tolerated") {
  std::string text =
      "# leading comment\n"
      "\n"
      "[run]\n"
      "; another comment style\n"
      "  seed   =   9  \n"
      "out = runs/demo\n";
  ExperimentConfig cfg = parse_config(text, "t.ini");
  CHECK(cfg.seed == 9);
  CHECK(cfg.out == "runs/demo");
}

TEST_CASE("render and parse are mutual inverses") {
  ExperimentConfig cfg;
  cfg.command = Command::fl;
  cfg.out = "runs/x";
  cfg.seed = 123;
  cfg.data.classes = 4;
  cfg.data.dim = 9;
  cfg.data.per_class = 33;
  cfg.data.spread = 0.41;
  cfg.data.label_noise = 0.2;
  cfg.data.imbalance_favored = {0, 2};
  cfg.model.hidden = {16, 8};
  cfg.model.init = InitKind::kaiming_uniform;
  cfg.train.epochs = 7;
  cfg.train.optimizer = OptKind::adam;
  cfg.train.loss = LossKind::mse;
  cfg.train.learning_rate = 0.001;
  cfg.reg.kind = RegKind::wsa;
  cfg.reg.lambda = 2.5;
  cfg.reg.scope_biases = false;
  cfg.reg.target = "init_scope";
  cfg.fl.num_clients = 5;
  cfg.fl.rounds = 12;
  cfg.fl.algorithm = FlAlgorithm::fedprox_wsa;
  cfg.fl.wsa_window = {{2, 10}};
  cfg.fl.predefined_target = GaussianParams{0.0, 0.2};
  cfg.fl.weighted_aggregation = true;
  cfg.fl.threads = 2;
  cfg.interpolate.a = "a.json";
  cfg.interpolate.b = "b.json";
  cfg.interpolate.matched = true;
  cfg.match.max_sweeps = 9;
  cfg.scale.layer = 1;
  cfg.scale.alpha = 2.0;
  cfg.landscape.resolution = 7;
  cfg.fuse.checkpoints = {"a.json", "b.json"};
  cfg.fuse.weights = {1.0, 3.0};
  cfg.study.name = "lambda_sweep";
  cfg.study.seeds = {4, 5};
  cfg.study.lambdas = {0.0, 2.0};
  cfg.study.early_round = 3;
  cfg.study.window = 2;

  std::string rendered = render_config(cfg);
  ExperimentConfig parsed = parse_config(rendered, "rendered.ini");
  CHECK(render_config(parsed) == rendered);
  CHECK(parsed.command == Command::fl);
  CHECK(parsed.fl.wsa_window.has_value());
  CHECK(parsed.fl.wsa_window->first == 2);
  CHECK(parsed.fl.wsa_window->second == 10);
  CHECK(parsed.fl.predefined_target.has_value());
  CHECK(parsed.fl.predefined_target->sigma == 0.2);
  CHECK(parsed.reg.scope_biases == false);
  CHECK(parsed.fuse.weights == std::vector<double>{1.0, 3.0});
}

TEST_CASE("parse errors carry the file and line") {
  CHECK_THROWS_WITH_AS(parse_config("x = 1\n", "f.ini"),
                       doctest::Contains("f.ini:1"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config("[bogus]\n", "f.ini"),
                       doctest::Contains("unknown section"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config("[run]\nbogus = 1\n", "f.ini"),
                       doctest::Contains("f.ini:2"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config("[run]\nbogus = 1\n", "f.ini"),
                       doctest::Contains("run.bogus"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config("[train]\nepochs = abc\n", "f.ini"),
                       doctest::Contains("f.ini:2"), ParseError);
  CHECK_THROWS_AS(parse_config("[train]\nepochs\n", "f.ini"), ParseError);
  CHECK_THROWS_AS(parse_config("[train\nepochs = 1\n", "f.ini"), ParseError);
}

TEST_CASE("range violations name the offending field") {
  CHECK_THROWS_WITH_AS(
      parse_config("[regularizer]\nlambda = -1\n", "f.ini"),
      doctest::Contains("regularizer.lambda"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[data]\nclasses = 1\n", "f.ini"),
                       doctest::Contains("data.classes"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[train]\nepochs = -2\n", "f.ini"),
                       doctest::Contains("train.epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[study]\nname = nope\n", "f.ini"),
                       doctest::Contains("study.name"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[fl]\nwsa_window = 9,3\n", "f.ini"),
                       doctest::Contains("fl.wsa_window"), ConfigError);
}

TEST_CASE("csv artifacts carry stable headers") {
  auto [train_data, test_data] = make_blobs(3, 5, 12, 0.3, 3);
  Model init = make_mlp({5, 6, 3}, InitKind::kaiming_normal, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  TrainResult res = train(init, train_data, tc, no_regularizer(), 5);

  std::vector<std::string> metrics = lines_of(metrics_csv(res.log));
  REQUIRE(metrics.size() == 3);
  CHECK(metrics[0] ==
        "epoch,loss,acc,fc1.weight_mu,fc1.weight_sigma,fc1.bias_mu,"
        "fc1.bias_sigma,fc2.weight_mu,fc2.weight_sigma,fc2.bias_mu,"
        "fc2.bias_sigma");
  CHECK(metrics[1].substr(0, 2) == "1,");
  CHECK(metrics[2].substr(0, 2) == "2,");

  WeightScope scope = scope_estimate(res.model);
  std::vector<std::string> sc = lines_of(scope_csv(scope));
  CHECK(sc[0] == "layer,mu,sigma,count");
  CHECK(sc.size() == scope.entries.size() + 1);

  InterpolationCurve curve;
  curve.alphas = {0.0, 0.5, 1.0};
  curve.losses = {1.0, 2.0, 1.0};
  curve.accuracies = {0.5, 0.25, 0.5};
  std::vector<std::string> cv = lines_of(curve_csv(curve));
  CHECK(cv[0] == "alpha,loss,acc");
  CHECK(cv[1] == "0,1,0.5");
  CHECK(cv[2] == "0.5,2,0.25");
}

TEST_CASE("barrier report renders as a single stable json line") {
  BarrierReport rep;
  rep.barrier_loss = 1.5;
  rep.barrier_err = 0.25;
  rep.argmax_alpha = 0.5;
  CHECK(barrier_json(rep) ==
        "{\"barrier_loss\": 1.5, \"barrier_err\": 0.25, "
        "\"argmax_alpha\": 0.5}\n");
}

TEST_CASE("float formatting survives a json round trip") {
  Model m = make_mlp({4, 5, 2}, InitKind::kaiming_normal, 11);
  // Push an awkward value through to prove 17-digit fidelity.
  m.layers[0].weight.data[0] = 0.1 + 0.2;
  Model back = checkpoint_from_json(checkpoint_to_json(m), "fidelity");
  CHECK(back.layers[0].weight.data[0] == m.layers[0].weight.data[0]);
}

TEST_CASE("scope target json round trip") {
  Model m = make_mlp({4, 6, 2}, InitKind::kaiming_normal, 13);
  ScopeTarget target = target_from_scope(scope_estimate(m),
                                         ScopeTarget::Origin::init_scope);
  std::string json = target_json(target);
  ScopeTarget back = target_from_json(json, "t.json");
  CHECK(back.origin == target.origin);
  REQUIRE(back.entries.size() == target.entries.size());
  for (size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].first == target.entries[i].first);
    CHECK(back.entries[i].second.mu == target.entries[i].second.mu);
    CHECK(back.entries[i].second.sigma == target.entries[i].second.sigma);
  }
  CHECK_THROWS_AS(target_from_json("{}", "t.json"), ParseError);
}

TEST_CASE("permutation json round trip") {
  Permutation p;
  p.perms = {{2, 0, 1}, {1, 0}};
  std::string json = permutation_json(p, {"fc1", "fc2"});
  Permutation back = permutation_from_json(json, "p.json");
  CHECK(back.perms == p.perms);
  CHECK_THROWS_AS(permutation_json(p, {"fc1"}), InputError);
  CHECK_THROWS_AS(permutation_from_json("{\"layers\": []}", "p.json"),
                  ParseError);
}

TEST_CASE("scope json names the source and lists floored tensors") {
  WeightScope scope;
  scope.entries = {{"fc1.weight", {0.5, 0.25, 12}},
                   {"fc1.bias", {0.0, 0.0, 4}}};
  std::string json = scope_json(scope, "runs/train_seed1_model.json");
  CHECK(json.find("\"model_id\": \"runs/train_seed1_model.json\"") !=
        std::string::npos);
  CHECK(json.find("\"fc1.weight\"") != std::string::npos);
  // Degenerate sigma lands in the floored list.
  CHECK(json.find("\"floored\": [\"fc1.bias\"]") != std::string::npos);
}

TEST_CASE("dispatch writes a complete train run exactly once") {
  TempDir tmp("dispatch");
  ExperimentConfig cfg;
  cfg.command = Command::train;
  cfg.out = tmp.path.string();
  cfg.seed = 3;
  cfg.data.classes = 3;
  cfg.data.dim = 5;
  cfg.data.per_class = 12;
  cfg.data.test_per_class = 4;
  cfg.model.hidden = {6};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 8;
  dispatch(cfg);

  for (const char* name :
       {"train_seed3_resolved.ini", "train_seed3_model.json",
        "train_seed3_metrics.csv", "train_seed3_scope.json",
        "train_seed3_scope.csv", "train_seed3_eval.json"}) {
    CHECK(fs::exists(tmp.path / name));
  }

  Model trained = load_checkpoint(tmp.file("train_seed3_model.json"));
  trained.validate();
  CHECK(trained.arch_id == "mlp:5-6r-3i");

  // The resolved config reproduces the run settings.
  ExperimentConfig resolved =
      load_config(tmp.file("train_seed3_resolved.ini"));
  CHECK(resolved.seed == 3);
  CHECK(resolved.train.epochs == 2);

  // Run directories are write-once.
  CHECK_THROWS_AS(dispatch(cfg), InputError);
}

TEST_CASE("dispatch scope command recomputes a saved model's scope") {
  TempDir tmp("scopecmd");
  ExperimentConfig tr;
  tr.command = Command::train;
  tr.out = tmp.path.string();
  tr.seed = 4;
  tr.data.classes = 3;
  tr.data.dim = 5;
  tr.data.per_class = 10;
  tr.data.test_per_class = 3;
  tr.model.hidden = {6};
  tr.train.epochs = 1;
  dispatch(tr);

  ExperimentConfig sc;
  sc.command = Command::scope;
  sc.out = (tmp.path / "scope_out").string();
  sc.seed = 4;
  sc.scope.checkpoint = tmp.file("train_seed4_model.json");
  dispatch(sc);

  std::string direct =
      scope_csv(scope_estimate(load_checkpoint(sc.scope.checkpoint)));
  CHECK(read_text_file((fs::path(sc.out) / "scope_seed4_scope.csv").string()) ==
        direct);
}

TEST_CASE("dispatch fl with zero rounds emits the untouched init model") {
  TempDir tmp("flzero");
  ExperimentConfig cfg;
  cfg.command = Command::fl;
  cfg.out = tmp.path.string();
  cfg.seed = 5;
  cfg.data.classes = 3;
  cfg.data.dim = 5;
  cfg.data.per_class = 10;
  cfg.data.test_per_class = 3;
  cfg.model.hidden = {6};
  cfg.fl.num_clients = 2;
  cfg.fl.rounds = 0;
  dispatch(cfg);

  CHECK(fs::exists(tmp.path / "fl_seed5_model.json"));
  CHECK(fs::exists(tmp.path / "fl_seed5_round_log.csv"));
  CHECK(!fs::exists(tmp.path / "fl_seed5_target.json"));
  Model out = load_checkpoint(tmp.file("fl_seed5_model.json"));
  Model init = make_mlp({5, 6, 3}, InitKind::kaiming_normal, 5);
  CHECK(params_equal(out, init));
}

TEST_CASE("dispatch rejects commands with missing inputs") {
  TempDir tmp("missing");
  ExperimentConfig cfg;
  cfg.command = Command::scope;
  cfg.out = tmp.path.string();
  CHECK_THROWS_AS(dispatch(cfg), ConfigError);

  ExperimentConfig fuse;
  fuse.command = Command::fuse_scope;
  fuse.out = (tmp.path / "f").string();
  CHECK_THROWS_AS(dispatch(fuse), ConfigError);
}
