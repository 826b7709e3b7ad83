#include <filesystem>
#include <utility>

#include "wsalign/common.hpp"
#include "wsalign/config.hpp"
#include "wsalign/experiments.hpp"
#include "wsalign/io.hpp"
#include "wsalign/merge.hpp"

namespace wsalign {

namespace {

namespace fs = std::filesystem;

// Artifact sink for one run. Filenames carry the command and seed; a path
// that already exists is an error, keeping run directories write-once.
struct RunDir {
  fs::path dir;
  std::string prefix;

  void write(const std::string& name, const std::string& content) const {
    fs::path p = dir / (prefix + name);
    if (fs::exists(p)) {
      throw InputError("artifact '" + p.string() +
                       "' already exists; run directories are write-once");
    }
    write_text_file(p.string(), content);
  }
  std::string artifact_id(const std::string& name) const {
    return prefix + name;
  }
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

uint64_t perturb_seed(uint64_t data_seed, uint64_t slot) {
  return Rng::keyed(data_seed, {0xD5A1, slot}).next_u64();
}

// Size reductions run before noise so the noise streams see the final rows.
Dataset apply_perturbations(Dataset train, const DataConfig& d) {
  if (d.subsample < 1.0) {
    PerturbSpec s;
    s.kind = PerturbSpec::Kind::subsample;
    s.q = d.subsample;
    train = perturb(train, s, perturb_seed(d.seed, 0));
  }
  if (!d.imbalance_favored.empty()) {
    PerturbSpec s;
    s.kind = PerturbSpec::Kind::imbalance;
    s.favored_classes = d.imbalance_favored;
    s.keep_high = d.imbalance_keep_high;
    s.keep_low = d.imbalance_keep_low;
    train = perturb(train, s, perturb_seed(d.seed, 1));
  }
  if (d.feature_noise > 0.0) {
    PerturbSpec s;
    s.kind = PerturbSpec::Kind::feature_noise;
    s.eps = d.feature_noise;
    train = perturb(train, s, perturb_seed(d.seed, 2));
  }
  if (d.label_noise > 0.0) {
    PerturbSpec s;
    s.kind = PerturbSpec::Kind::label_noise;
    s.p = d.label_noise;
    train = perturb(train, s, perturb_seed(d.seed, 3));
  }
  return train;
}

std::pair<Dataset, Dataset> build_data(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  Dataset train, test;
  if (!d.train_csv.empty()) {
    require(!d.test_csv.empty(),
            "data.test_csv is required when data.train_csv is set");
    train = load_dataset_csv(d.train_csv, d.classes);
    test = load_dataset_csv(d.test_csv, d.classes);
    test.split = Dataset::Split::test;
  } else {
    std::tie(train, test) = make_blobs(d.classes, d.dim, d.per_class, d.spread,
                                       d.seed, d.test_per_class);
  }
  return {apply_perturbations(std::move(train), d), std::move(test)};
}

std::vector<int64_t> model_dims(const ExperimentConfig& cfg,
                                const Dataset& train) {
  std::vector<int64_t> dims;
  dims.push_back(train.dim());
  for (int64_t h : cfg.model.hidden) dims.push_back(h);
  dims.push_back(train.num_classes);
  return dims;
}

const Dataset& pick_split(const std::string& split, const Dataset& train,
                          const Dataset& test) {
  return split == "train" ? train : test;
}

RegularizerSpec resolve_reg(const RegConfig& r, const Model& init) {
  switch (r.kind) {
    case RegKind::none:
      return no_regularizer();
    case RegKind::weight_decay:
      return weight_decay_reg(r.lambda);
    case RegKind::proximal:
      require(!r.anchor.empty(), "regularizer.anchor is required for proximal");
      return proximal_reg(r.lambda, load_checkpoint(r.anchor));
    case RegKind::wsa: {
      ScopeTarget target;
      if (r.target.empty() || r.target == "init_scope") {
        target = target_from_scope(scope_estimate(init, r.scope_biases),
                                   ScopeTarget::Origin::init_scope);
      } else {
        target = target_from_json(read_text_file(r.target), r.target);
      }
      return wsa_reg(r.lambda, std::move(target), r.scope_biases);
    }
    case RegKind::predefined_gaussian:
      return predefined_gaussian_reg(r.lambda, init, r.target_mu,
                                     r.target_sigma, r.scope_biases);
  }
  throw ConfigError("unhandled regularizer kind");
}

std::vector<std::string> hidden_layer_names(const Model& m) {
  std::vector<std::string> names;
  for (size_t l = 0; l + 1 < m.layers.size(); ++l) {
    names.push_back(m.layers[l].name);
  }
  return names;
}

std::string eval_json(const EvalResult& train, const EvalResult& test) {
  return "{\"train_loss\": " + fmt17(train.loss) +
         ", \"train_acc\": " + fmt17(train.accuracy) +
         ", \"test_loss\": " + fmt17(test.loss) +
         ", \"test_acc\": " + fmt17(test.accuracy) + "}\n";
}

void run_train(const ExperimentConfig& cfg, const RunDir& rd) {
  auto [train_data, test_data] = build_data(cfg);
  Model init = make_mlp(model_dims(cfg, train_data), cfg.model.init, cfg.seed);
  RegularizerSpec reg = resolve_reg(cfg.reg, init);
  TrainResult res = train(init, train_data, cfg.train, reg, cfg.seed);
  rd.write("model.json", checkpoint_to_json(res.model));
  if (!res.log.empty()) rd.write("metrics.csv", metrics_csv(res.log));
  WeightScope scope = scope_estimate(res.model);
  rd.write("scope.json", scope_json(scope, rd.artifact_id("model.json")));
  rd.write("scope.csv", scope_csv(scope));
  rd.write("eval.json", eval_json(evaluate(res.model, train_data, cfg.train.loss),
                                  evaluate(res.model, test_data, cfg.train.loss)));
}

void run_scope(const ExperimentConfig& cfg, const RunDir& rd) {
  require(!cfg.scope.checkpoint.empty(), "scope.checkpoint is required");
  Model m = load_checkpoint(cfg.scope.checkpoint);
  WeightScope scope = scope_estimate(m);
  rd.write("scope.json", scope_json(scope, cfg.scope.checkpoint));
  rd.write("scope.csv", scope_csv(scope));
}

void run_fuse_scope(const ExperimentConfig& cfg, const RunDir& rd) {
  require(!cfg.fuse.checkpoints.empty(),
          "fuse-scope.checkpoints needs at least one checkpoint");
  std::vector<WeightScope> scopes;
  for (const std::string& path : cfg.fuse.checkpoints) {
    scopes.push_back(scope_estimate(load_checkpoint(path)));
  }
  const std::vector<double>* w =
      cfg.fuse.weights.empty() ? nullptr : &cfg.fuse.weights;
  rd.write("target.json", target_json(scope_fuse(scopes, w)));
}

void run_interpolate(const ExperimentConfig& cfg, const RunDir& rd) {
  require(!cfg.interpolate.a.empty() && !cfg.interpolate.b.empty(),
          "interpolate.a and interpolate.b are required");
  Model a = load_checkpoint(cfg.interpolate.a);
  Model b = load_checkpoint(cfg.interpolate.b);
  auto [train_data, test_data] = build_data(cfg);
  const Dataset& data = pick_split(cfg.interpolate.split, train_data, test_data);
  Permutation perm;
  if (cfg.interpolate.matched) {
    perm = match_weights(a, b, cfg.match.max_sweeps);
    rd.write("permutation.json", permutation_json(perm, hidden_layer_names(a)));
  }
  auto [report, curve] =
      barrier(a, b, data, cfg.interpolate.matched ? &perm : nullptr,
              cfg.interpolate.grid, cfg.train.loss);
  rd.write("curve.csv", curve_csv(curve));
  rd.write("barrier.json", barrier_json(report));
}

void run_match(const ExperimentConfig& cfg, const RunDir& rd) {
  require(!cfg.match.a.empty() && !cfg.match.b.empty(),
          "match.a and match.b are required");
  Model a = load_checkpoint(cfg.match.a);
  Model b = load_checkpoint(cfg.match.b);
  Permutation perm = match_weights(a, b, cfg.match.max_sweeps);
  double before = matching_objective(a, b, identity_permutation(b));
  double after = matching_objective(a, b, perm);
  rd.write("permutation.json", permutation_json(perm, hidden_layer_names(a)));
  rd.write("matched.json", checkpoint_to_json(apply_permutation(b, perm)));
  rd.write("match.json", "{\"objective_identity\": " + fmt17(before) +
                             ", \"objective_matched\": " + fmt17(after) +
                             ", \"is_identity\": " +
                             (is_identity(perm) ? "true" : "false") + "}\n");
}

void run_scale(const ExperimentConfig& cfg, const RunDir& rd) {
  require(!cfg.scale.checkpoint.empty(), "scale.checkpoint is required");
  Model m = load_checkpoint(cfg.scale.checkpoint);
  Model scaled = scale_layer(m, cfg.scale.layer, cfg.scale.alpha);
  rd.write("scaled.json", checkpoint_to_json(scaled));
  rd.write("scaled_scope.csv", scope_csv(scope_estimate(scaled)));
}

void run_landscape(const ExperimentConfig& cfg, const RunDir& rd) {
  require(!cfg.landscape.origin.empty() && !cfg.landscape.a.empty() &&
              !cfg.landscape.b.empty(),
          "landscape.origin, landscape.a, and landscape.b are required");
  Model origin = load_checkpoint(cfg.landscape.origin);
  Model a = load_checkpoint(cfg.landscape.a);
  Model b = load_checkpoint(cfg.landscape.b);
  auto [train_data, test_data] = build_data(cfg);
  const Dataset& data = pick_split(cfg.landscape.split, train_data, test_data);
  rd.write("landscape.csv",
           landscape_csv(landscape_grid(origin, a, b, data,
                                        cfg.landscape.resolution,
                                        cfg.train.loss)));
}

void run_fl(const ExperimentConfig& cfg, const RunDir& rd) {
  auto [train_data, test_data] = build_data(cfg);
  Model init = make_mlp(model_dims(cfg, train_data), cfg.model.init, cfg.seed);
  FLConfig fl = cfg.fl;
  fl.seed = cfg.seed;
  FederationResult res = run_federation(fl, train_data, test_data, init);
  rd.write("model.json", checkpoint_to_json(res.model));
  rd.write("round_log.csv", round_log_csv(res.rounds));
  rd.write("trajectory.csv", scope_trajectory_csv(res.rounds));
  if (!res.rounds.empty()) {
    rd.write("target.json", target_json(res.rounds.back().target_used));
  }
}

void run_study(const ExperimentConfig& cfg, const RunDir& rd) {
  const StudyConfig& s = cfg.study;
  StudySetup base;
  base.classes = cfg.data.classes;
  base.dim = cfg.data.dim;
  base.per_class = cfg.data.per_class;
  base.test_per_class = cfg.data.test_per_class;
  base.spread = cfg.data.spread;
  base.data_seed = cfg.data.seed;
  base.hidden = cfg.model.hidden;
  base.init = cfg.model.init;
  base.train = cfg.train;
  if (s.epochs >= 0) base.train.epochs = s.epochs;

  if (s.name == "condition_matrix") {
    ConditionMatrixResult result =
        run_condition_matrix(default_condition_specs(), base, s.seeds);
    rd.write("condition_matrix.csv", condition_matrix_csv(result));
    rd.write("condition_matrix.json", condition_matrix_json(result));
  } else if (s.name == "wsa_barrier") {
    WsaBarrierStudyResult result =
        run_wsa_barrier_study(base, s.seeds, s.with_matching, s.lambda);
    rd.write("wsa_barrier.json", wsa_barrier_study_json(result));
  } else if (s.name == "scaling") {
    ScalingStudyResult result =
        run_scaling_study(base, s.seeds, s.layer, s.alphas);
    rd.write("scaling.csv", scaling_study_csv(result));
  } else if (s.name == "lambda_sweep") {
    auto [train_data, test_data] = build_data(cfg);
    Model init =
        make_mlp(model_dims(cfg, train_data), cfg.model.init, cfg.seed);
    LambdaSweepResult result =
        run_lambda_sweep(s.lambdas, cfg.fl, train_data, test_data, init,
                         s.seeds, s.early_round, s.window);
    rd.write("lambda_sweep.csv", lambda_sweep_csv(result));
  } else if (s.name == "predefined_ablation") {
    auto [train_data, test_data] = build_data(cfg);
    Model init =
        make_mlp(model_dims(cfg, train_data), cfg.model.init, cfg.seed);
    // Fixed N(0, sigma) targets bracketing a typical init scope.
    std::vector<GaussianParams> targets = {
        {0.0, 0.05}, {0.0, 0.1}, {0.0, 0.2}};
    PredefinedAblationResult result = run_predefined_ablation(
        targets, cfg.fl, train_data, test_data, init, s.seeds);
    rd.write("predefined_ablation.csv", predefined_ablation_csv(result));
  } else {
    throw ConfigError("unknown study '" + s.name + "'");
  }
}

}  // namespace

void dispatch(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out);
  std::string cmd = command_name(cfg.command);
  for (char& c : cmd) {
    if (c == '-') c = '_';
  }
  RunDir rd{fs::path(cfg.out), cmd + "_seed" + std::to_string(cfg.seed) + "_"};
  rd.write("resolved.ini", render_config(cfg));
  switch (cfg.command) {
    case Command::train: run_train(cfg, rd); break;
    case Command::scope: run_scope(cfg, rd); break;
    case Command::fuse_scope: run_fuse_scope(cfg, rd); break;
    case Command::interpolate: run_interpolate(cfg, rd); break;
    case Command::match: run_match(cfg, rd); break;
    case Command::scale: run_scale(cfg, rd); break;
    case Command::landscape: run_landscape(cfg, rd); break;
    case Command::fl: run_fl(cfg, rd); break;
    case Command::study: run_study(cfg, rd); break;
  }
}

}  // namespace wsalign
