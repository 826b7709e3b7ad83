#include "wsalign/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "wsalign/common.hpp"
#include "wsalign/io.hpp"

namespace wsalign {

std::string command_name(Command c) {
  switch (c) {
    case Command::train: return "train";
    case Command::scope: return "scope";
    case Command::fuse_scope: return "fuse-scope";
    case Command::interpolate: return "interpolate";
    case Command::match: return "match";
    case Command::scale: return "scale";
    case Command::landscape: return "landscape";
    case Command::fl: return "fl";
    case Command::study: return "study";
  }
  throw InputError("unhandled command enum value");
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::train, Command::scope, Command::fuse_scope,
                    Command::interpolate, Command::match, Command::scale,
                    Command::landscape, Command::fl, Command::study}) {
    if (command_name(c) == name) return c;
  }
  throw ParseError("unknown command '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Ctx {
  std::string origin;
  int line = 0;
  std::string field;  // "section.key"

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(origin + ":" + std::to_string(line) + ": " + field +
                     ": " + what);
  }
  [[noreturn]] void bad_value(const std::string& what) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + field +
                      " " + what);
  }
};

int64_t parse_i64(const Ctx& c, const std::string& v) {
  if (v.empty()) c.fail("expected an integer, got empty value");
  errno = 0;
  char* end = nullptr;
  long long out = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size()) {
    c.fail("expected an integer, got '" + v + "'");
  }
  return out;
}

int parse_int(const Ctx& c, const std::string& v) {
  int64_t x = parse_i64(c, v);
  if (x < INT32_MIN || x > INT32_MAX) c.fail("integer out of range: " + v);
  return static_cast<int>(x);
}

uint64_t parse_u64(const Ctx& c, const std::string& v) {
  if (v.empty() || v[0] == '-') {
    c.fail("expected a non-negative integer, got '" + v + "'");
  }
  errno = 0;
  char* end = nullptr;
  unsigned long long out = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size()) {
    c.fail("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_f64(const Ctx& c, const std::string& v) {
  if (v.empty()) c.fail("expected a number, got empty value");
  errno = 0;
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (errno == ERANGE || end != v.c_str() + v.size()) {
    c.fail("expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const Ctx& c, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  c.fail("expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  if (trim(v).empty()) return parts;
  size_t start = 0;
  while (true) {
    size_t comma = v.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(trim(v.substr(start)));
      break;
    }
    parts.push_back(trim(v.substr(start, comma - start)));
    start = comma + 1;
  }
  return parts;
}

template <typename T, typename F>
std::vector<T> parse_list(const Ctx& c, const std::string& v, F f) {
  std::vector<T> out;
  for (const std::string& part : split_list(v)) out.push_back(f(c, part));
  return out;
}

OptKind parse_opt_kind(const Ctx& c, const std::string& v) {
  if (v == "sgd") return OptKind::sgd;
  if (v == "adam") return OptKind::adam;
  c.fail("expected sgd or adam, got '" + v + "'");
}

LossKind parse_loss_kind(const Ctx& c, const std::string& v) {
  if (v == "cross_entropy") return LossKind::cross_entropy;
  if (v == "mse") return LossKind::mse;
  c.fail("expected cross_entropy or mse, got '" + v + "'");
}

InitKind parse_init_kind(const Ctx& c, const std::string& v) {
  if (v == "kaiming_normal") return InitKind::kaiming_normal;
  if (v == "kaiming_uniform") return InitKind::kaiming_uniform;
  c.fail("expected kaiming_normal or kaiming_uniform, got '" + v + "'");
}

RegKind parse_reg_kind(const Ctx& c, const std::string& v) {
  if (v == "none") return RegKind::none;
  if (v == "weight_decay") return RegKind::weight_decay;
  if (v == "proximal") return RegKind::proximal;
  if (v == "wsa") return RegKind::wsa;
  if (v == "predefined_gaussian") return RegKind::predefined_gaussian;
  c.fail(
      "expected none, weight_decay, proximal, wsa, or predefined_gaussian, "
      "got '" +
      v + "'");
}

FlAlgorithm parse_algorithm(const Ctx& c, const std::string& v) {
  if (v == "fedavg") return FlAlgorithm::fedavg;
  if (v == "fedprox") return FlAlgorithm::fedprox;
  if (v == "fedavg_wsa") return FlAlgorithm::fedavg_wsa;
  if (v == "fedprox_wsa") return FlAlgorithm::fedprox_wsa;
  c.fail("expected fedavg, fedprox, fedavg_wsa, or fedprox_wsa, got '" + v +
         "'");
}

std::string check_split(const Ctx& c, const std::string& v) {
  if (v == "train" || v == "test") return v;
  c.fail("expected train or test, got '" + v + "'");
}

// Field-level range validation with the offending section.key name. Cross
// field constraints stay with the owning module's validate().
void check_ranges(const ExperimentConfig& cfg, const std::string& origin) {
  auto bad = [&origin](const std::string& field, const std::string& what) {
    throw ConfigError(origin + ": " + field + " " + what);
  };
  const DataConfig& d = cfg.data;
  if (d.classes < 2) bad("data.classes", "must be >= 2");
  if (d.dim < 1) bad("data.dim", "must be >= 1");
  if (d.per_class < 1) bad("data.per_class", "must be >= 1");
  if (d.test_per_class < 1) bad("data.test_per_class", "must be >= 1");
  if (!(d.spread > 0.0)) bad("data.spread", "must be > 0");
  if (!(d.label_noise >= 0.0 && d.label_noise <= 1.0)) {
    bad("data.label_noise", "must be in [0, 1]");
  }
  if (!(d.feature_noise >= 0.0)) bad("data.feature_noise", "must be >= 0");
  if (!(d.subsample > 0.0 && d.subsample <= 1.0)) {
    bad("data.subsample", "must be in (0, 1]");
  }
  for (int c : d.imbalance_favored) {
    if (c < 0 || c >= d.classes) {
      bad("data.imbalance_favored", "class index out of range");
    }
  }
  if (!(d.imbalance_keep_high >= 0.0 && d.imbalance_keep_high <= 1.0)) {
    bad("data.imbalance_keep_high", "must be in [0, 1]");
  }
  if (!(d.imbalance_keep_low >= 0.0 && d.imbalance_keep_low <= 1.0)) {
    bad("data.imbalance_keep_low", "must be in [0, 1]");
  }
  for (int64_t h : cfg.model.hidden) {
    if (h < 1) bad("model.hidden", "widths must be >= 1");
  }
  const TrainConfig& t = cfg.train;
  if (t.epochs < 0) bad("train.epochs", "must be >= 0");
  if (t.batch_size < 1) bad("train.batch_size", "must be >= 1");
  if (!(t.learning_rate > 0.0)) bad("train.learning_rate", "must be > 0");
  if (!(t.momentum >= 0.0 && t.momentum < 1.0)) {
    bad("train.momentum", "must be in [0, 1)");
  }
  if (!(t.weight_decay >= 0.0)) bad("train.weight_decay", "must be >= 0");
  const RegConfig& r = cfg.reg;
  if (!(r.lambda >= 0.0)) bad("regularizer.lambda", "must be >= 0");
  if (!(r.target_sigma > 0.0)) bad("regularizer.target_sigma", "must be > 0");
  const FLConfig& f = cfg.fl;
  if (f.num_clients < 1) bad("fl.num_clients", "must be >= 1");
  if (!(f.participation_fraction > 0.0 && f.participation_fraction <= 1.0)) {
    bad("fl.participation_fraction", "must be in (0, 1]");
  }
  if (f.rounds < 0) bad("fl.rounds", "must be >= 0");
  if (f.local_steps < 1) bad("fl.local_steps", "must be >= 1");
  if (!(f.learning_rate > 0.0)) bad("fl.learning_rate", "must be > 0");
  if (!(f.lambda >= 0.0)) bad("fl.lambda", "must be >= 0");
  if (!(f.prox_mu >= 0.0)) bad("fl.prox_mu", "must be >= 0");
  if (!(f.weight_decay >= 0.0)) bad("fl.weight_decay", "must be >= 0");
  if (f.batch_size < 1) bad("fl.batch_size", "must be >= 1");
  if (!(f.dirichlet_alpha > 0.0)) bad("fl.dirichlet_alpha", "must be > 0");
  if (f.threads < 1) bad("fl.threads", "must be >= 1");
  if (f.wsa_window) {
    if (f.wsa_window->first < 0 || f.wsa_window->second <= f.wsa_window->first)
      bad("fl.wsa_window", "needs 0 <= start < end");
  }
  if (f.predefined_target && !(f.predefined_target->sigma > 0.0)) {
    bad("fl.predefined_target", "sigma must be > 0");
  }
  if (cfg.interpolate.grid < 3) bad("interpolate.grid", "must be >= 3");
  if (cfg.match.max_sweeps < 1) bad("match.max_sweeps", "must be >= 1");
  if (!(cfg.scale.alpha > 0.0)) bad("scale.alpha", "must be > 0");
  if (cfg.scale.layer < 0) bad("scale.layer", "must be >= 0");
  if (cfg.landscape.resolution < 2) bad("landscape.resolution", "must be >= 2");
  const StudyConfig& s = cfg.study;
  static const char* kStudies[] = {"condition_matrix", "wsa_barrier",
                                   "scaling", "lambda_sweep",
                                   "predefined_ablation"};
  bool known = false;
  for (const char* name : kStudies) known = known || s.name == name;
  if (!known) bad("study.name", "unknown study '" + s.name + "'");
  if (s.seeds.empty()) bad("study.seeds", "needs at least one seed");
  if (!(s.lambda >= 0.0)) bad("study.lambda", "must be >= 0");
  for (double l : s.lambdas) {
    if (!(l >= 0.0)) bad("study.lambdas", "must all be >= 0");
  }
  for (double a : s.alphas) {
    if (!(a > 0.0)) bad("study.alphas", "must all be > 0");
  }
  if (s.layer < 0) bad("study.layer", "must be >= 0");
  if (s.window < 1) bad("study.window", "must be >= 1");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  Ctx ctx;
  ctx.origin = origin;
  bool window_set = false, predefined_set = false;
  while (std::getline(in, raw)) {
    ++ctx.line;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        ctx.field = line;
        ctx.fail("unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      static const char* kSections[] = {
          "run",   "data",  "model",     "train", "regularizer",
          "fl",    "interpolate", "match", "scale", "landscape",
          "scope", "fuse-scope",  "study"};
      bool ok = false;
      for (const char* s : kSections) ok = ok || section == s;
      if (!ok) {
        ctx.field = section;
        ctx.fail("unknown section");
      }
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      ctx.field = line;
      ctx.fail("expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      ctx.field = key;
      ctx.fail("key outside any section");
    }
    ctx.field = section + "." + key;
    bool known = true;
    if (section == "run") {
      if (key == "command") cfg.command = parse_command(value);
      else if (key == "out") cfg.out = value;
      else if (key == "seed") cfg.seed = parse_u64(ctx, value);
      else known = false;
    } else if (section == "data") {
      DataConfig& d = cfg.data;
      if (key == "classes") d.classes = parse_int(ctx, value);
      else if (key == "dim") d.dim = parse_int(ctx, value);
      else if (key == "per_class") d.per_class = parse_int(ctx, value);
      else if (key == "test_per_class") d.test_per_class = parse_int(ctx, value);
      else if (key == "spread") d.spread = parse_f64(ctx, value);
      else if (key == "seed") d.seed = parse_u64(ctx, value);
      else if (key == "train_csv") d.train_csv = value;
      else if (key == "test_csv") d.test_csv = value;
      else if (key == "label_noise") d.label_noise = parse_f64(ctx, value);
      else if (key == "feature_noise") d.feature_noise = parse_f64(ctx, value);
      else if (key == "subsample") d.subsample = parse_f64(ctx, value);
      else if (key == "imbalance_favored")
        d.imbalance_favored = parse_list<int>(ctx, value, parse_int);
      else if (key == "imbalance_keep_high")
        d.imbalance_keep_high = parse_f64(ctx, value);
      else if (key == "imbalance_keep_low")
        d.imbalance_keep_low = parse_f64(ctx, value);
      else known = false;
    } else if (section == "model") {
      if (key == "hidden") cfg.model.hidden = parse_list<int64_t>(ctx, value, parse_i64);
      else if (key == "init") cfg.model.init = parse_init_kind(ctx, value);
      else known = false;
    } else if (section == "train") {
      TrainConfig& t = cfg.train;
      if (key == "epochs") t.epochs = parse_int(ctx, value);
      else if (key == "batch_size") t.batch_size = parse_int(ctx, value);
      else if (key == "optimizer") t.optimizer = parse_opt_kind(ctx, value);
      else if (key == "learning_rate") t.learning_rate = parse_f64(ctx, value);
      else if (key == "momentum") t.momentum = parse_f64(ctx, value);
      else if (key == "adam_beta1") t.adam_beta1 = parse_f64(ctx, value);
      else if (key == "adam_beta2") t.adam_beta2 = parse_f64(ctx, value);
      else if (key == "adam_eps") t.adam_eps = parse_f64(ctx, value);
      else if (key == "weight_decay") t.weight_decay = parse_f64(ctx, value);
      else if (key == "loss") t.loss = parse_loss_kind(ctx, value);
      else known = false;
    } else if (section == "regularizer") {
      RegConfig& r = cfg.reg;
      if (key == "kind") r.kind = parse_reg_kind(ctx, value);
      else if (key == "lambda") r.lambda = parse_f64(ctx, value);
      else if (key == "scope_biases") r.scope_biases = parse_bool(ctx, value);
      else if (key == "target") r.target = value;
      else if (key == "target_mu") r.target_mu = parse_f64(ctx, value);
      else if (key == "target_sigma") r.target_sigma = parse_f64(ctx, value);
      else if (key == "anchor") r.anchor = value;
      else known = false;
    } else if (section == "fl") {
      FLConfig& f = cfg.fl;
      if (key == "num_clients") f.num_clients = parse_int(ctx, value);
      else if (key == "participation_fraction")
        f.participation_fraction = parse_f64(ctx, value);
      else if (key == "rounds") f.rounds = parse_int(ctx, value);
      else if (key == "local_steps") f.local_steps = parse_int(ctx, value);
      else if (key == "learning_rate") f.learning_rate = parse_f64(ctx, value);
      else if (key == "lambda") f.lambda = parse_f64(ctx, value);
      else if (key == "prox_mu") f.prox_mu = parse_f64(ctx, value);
      else if (key == "weight_decay") f.weight_decay = parse_f64(ctx, value);
      else if (key == "batch_size") f.batch_size = parse_int(ctx, value);
      else if (key == "algorithm") f.algorithm = parse_algorithm(ctx, value);
      else if (key == "wsa_window") {
        window_set = true;
        auto parts = parse_list<int>(ctx, value, parse_int);
        if (parts.empty()) f.wsa_window.reset();
        else if (parts.size() == 2) f.wsa_window = {parts[0], parts[1]};
        else ctx.fail("expected 'start,end' or empty");
      } else if (key == "dirichlet_alpha")
        f.dirichlet_alpha = parse_f64(ctx, value);
      else if (key == "scope_biases") f.scope_biases = parse_bool(ctx, value);
      else if (key == "predefined_target") {
        predefined_set = true;
        auto parts = parse_list<double>(ctx, value, parse_f64);
        if (parts.empty()) f.predefined_target.reset();
        else if (parts.size() == 2)
          f.predefined_target = GaussianParams{parts[0], parts[1]};
        else ctx.fail("expected 'mu,sigma' or empty");
      } else if (key == "weighted_aggregation")
        f.weighted_aggregation = parse_bool(ctx, value);
      else if (key == "threads") f.threads = parse_int(ctx, value);
      else known = false;
    } else if (section == "interpolate") {
      InterpolateConfig& i = cfg.interpolate;
      if (key == "a") i.a = value;
      else if (key == "b") i.b = value;
      else if (key == "grid") i.grid = parse_int(ctx, value);
      else if (key == "matched") i.matched = parse_bool(ctx, value);
      else if (key == "split") i.split = check_split(ctx, value);
      else known = false;
    } else if (section == "match") {
      if (key == "a") cfg.match.a = value;
      else if (key == "b") cfg.match.b = value;
      else if (key == "max_sweeps") cfg.match.max_sweeps = parse_int(ctx, value);
      else known = false;
    } else if (section == "scale") {
      if (key == "checkpoint") cfg.scale.checkpoint = value;
      else if (key == "layer") cfg.scale.layer = parse_int(ctx, value);
      else if (key == "alpha") cfg.scale.alpha = parse_f64(ctx, value);
      else known = false;
    } else if (section == "landscape") {
      LandscapeConfig& l = cfg.landscape;
      if (key == "origin") l.origin = value;
      else if (key == "a") l.a = value;
      else if (key == "b") l.b = value;
      else if (key == "resolution") l.resolution = parse_int(ctx, value);
      else if (key == "split") l.split = check_split(ctx, value);
      else known = false;
    } else if (section == "scope") {
      if (key == "checkpoint") cfg.scope.checkpoint = value;
      else known = false;
    } else if (section == "fuse-scope") {
      if (key == "checkpoints")
        cfg.fuse.checkpoints = split_list(value);
      else if (key == "weights")
        cfg.fuse.weights = parse_list<double>(ctx, value, parse_f64);
      else known = false;
    } else if (section == "study") {
      StudyConfig& s = cfg.study;
      if (key == "name") s.name = value;
      else if (key == "seeds") s.seeds = parse_list<uint64_t>(ctx, value, parse_u64);
      else if (key == "epochs") s.epochs = parse_int(ctx, value);
      else if (key == "lambda") s.lambda = parse_f64(ctx, value);
      else if (key == "lambdas") s.lambdas = parse_list<double>(ctx, value, parse_f64);
      else if (key == "alphas") s.alphas = parse_list<double>(ctx, value, parse_f64);
      else if (key == "layer") s.layer = parse_int(ctx, value);
      else if (key == "with_matching") s.with_matching = parse_bool(ctx, value);
      else if (key == "early_round") s.early_round = parse_int(ctx, value);
      else if (key == "window") s.window = parse_int(ctx, value);
      else known = false;
    }
    if (!known) ctx.fail("unknown key");
  }
  (void)window_set;
  (void)predefined_set;
  check_ranges(cfg, origin);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path), path);
}

namespace {

std::string join_i64(const std::vector<int64_t>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_int(const std::vector<int>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_u64(const std::vector<uint64_t>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_f64(const std::vector<double>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt17(xs[i]);
  }
  return out;
}

std::string join_str(const std::vector<std::string>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += xs[i];
  }
  return out;
}

const char* opt_name(OptKind k) { return k == OptKind::sgd ? "sgd" : "adam"; }
const char* loss_name(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "mse";
}
const char* init_name(InitKind k) {
  return k == InitKind::kaiming_normal ? "kaiming_normal" : "kaiming_uniform";
}

const char* reg_name(RegKind k) {
  switch (k) {
    case RegKind::none: return "none";
    case RegKind::weight_decay: return "weight_decay";
    case RegKind::proximal: return "proximal";
    case RegKind::wsa: return "wsa";
    case RegKind::predefined_gaussian: return "predefined_gaussian";
  }
  return "none";
}

const char* algorithm_name(FlAlgorithm a) {
  switch (a) {
    case FlAlgorithm::fedavg: return "fedavg";
    case FlAlgorithm::fedprox: return "fedprox";
    case FlAlgorithm::fedavg_wsa: return "fedavg_wsa";
    case FlAlgorithm::fedprox_wsa: return "fedprox_wsa";
  }
  return "fedavg";
}

}  // namespace

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[run]\n";
  out << "command = " << command_name(cfg.command) << "\n";
  out << "out = " << cfg.out << "\n";
  out << "seed = " << cfg.seed << "\n\n";

  const DataConfig& d = cfg.data;
  out << "[data]\n";
  out << "classes = " << d.classes << "\n";
  out << "dim = " << d.dim << "\n";
  out << "per_class = " << d.per_class << "\n";
  out << "test_per_class = " << d.test_per_class << "\n";
  out << "spread = " << fmt17(d.spread) << "\n";
  out << "seed = " << d.seed << "\n";
  out << "train_csv = " << d.train_csv << "\n";
  out << "test_csv = " << d.test_csv << "\n";
  out << "label_noise = " << fmt17(d.label_noise) << "\n";
  out << "feature_noise = " << fmt17(d.feature_noise) << "\n";
  out << "subsample = " << fmt17(d.subsample) << "\n";
  out << "imbalance_favored = " << join_int(d.imbalance_favored) << "\n";
  out << "imbalance_keep_high = " << fmt17(d.imbalance_keep_high) << "\n";
  out << "imbalance_keep_low = " << fmt17(d.imbalance_keep_low) << "\n\n";

  out << "[model]\n";
  out << "hidden = " << join_i64(cfg.model.hidden) << "\n";
  out << "init = " << init_name(cfg.model.init) << "\n\n";

  const TrainConfig& t = cfg.train;
  out << "[train]\n";
  out << "epochs = " << t.epochs << "\n";
  out << "batch_size = " << t.batch_size << "\n";
  out << "optimizer = " << opt_name(t.optimizer) << "\n";
  out << "learning_rate = " << fmt17(t.learning_rate) << "\n";
  out << "momentum = " << fmt17(t.momentum) << "\n";
  out << "adam_beta1 = " << fmt17(t.adam_beta1) << "\n";
  out << "adam_beta2 = " << fmt17(t.adam_beta2) << "\n";
  out << "adam_eps = " << fmt17(t.adam_eps) << "\n";
  out << "weight_decay = " << fmt17(t.weight_decay) << "\n";
  out << "loss = " << loss_name(t.loss) << "\n\n";

  const RegConfig& r = cfg.reg;
  out << "[regularizer]\n";
  out << "kind = " << reg_name(r.kind) << "\n";
  out << "lambda = " << fmt17(r.lambda) << "\n";
  out << "scope_biases = " << (r.scope_biases ? "true" : "false") << "\n";
  out << "target = " << r.target << "\n";
  out << "target_mu = " << fmt17(r.target_mu) << "\n";
  out << "target_sigma = " << fmt17(r.target_sigma) << "\n";
  out << "anchor = " << r.anchor << "\n\n";

  const FLConfig& f = cfg.fl;
  out << "[fl]\n";
  out << "num_clients = " << f.num_clients << "\n";
  out << "participation_fraction = " << fmt17(f.participation_fraction) << "\n";
  out << "rounds = " << f.rounds << "\n";
  out << "local_steps = " << f.local_steps << "\n";
  out << "learning_rate = " << fmt17(f.learning_rate) << "\n";
  out << "lambda = " << fmt17(f.lambda) << "\n";
  out << "prox_mu = " << fmt17(f.prox_mu) << "\n";
  out << "weight_decay = " << fmt17(f.weight_decay) << "\n";
  out << "batch_size = " << f.batch_size << "\n";
  out << "algorithm = " << algorithm_name(f.algorithm) << "\n";
  out << "wsa_window = ";
  if (f.wsa_window) {
    out << f.wsa_window->first << "," << f.wsa_window->second;
  }
  out << "\n";
  out << "dirichlet_alpha = " << fmt17(f.dirichlet_alpha) << "\n";
  out << "scope_biases = " << (f.scope_biases ? "true" : "false") << "\n";
  out << "predefined_target = ";
  if (f.predefined_target) {
    out << fmt17(f.predefined_target->mu) << ","
        << fmt17(f.predefined_target->sigma);
  }
  out << "\n";
  out << "weighted_aggregation = " << (f.weighted_aggregation ? "true" : "false")
      << "\n";
  out << "threads = " << f.threads << "\n\n";

  const InterpolateConfig& ip = cfg.interpolate;
  out << "[interpolate]\n";
  out << "a = " << ip.a << "\n";
  out << "b = " << ip.b << "\n";
  out << "grid = " << ip.grid << "\n";
  out << "matched = " << (ip.matched ? "true" : "false") << "\n";
  out << "split = " << ip.split << "\n\n";

  out << "[match]\n";
  out << "a = " << cfg.match.a << "\n";
  out << "b = " << cfg.match.b << "\n";
  out << "max_sweeps = " << cfg.match.max_sweeps << "\n\n";

  out << "[scale]\n";
  out << "checkpoint = " << cfg.scale.checkpoint << "\n";
  out << "layer = " << cfg.scale.layer << "\n";
  out << "alpha = " << fmt17(cfg.scale.alpha) << "\n\n";

  const LandscapeConfig& l = cfg.landscape;
  out << "[landscape]\n";
  out << "origin = " << l.origin << "\n";
  out << "a = " << l.a << "\n";
  out << "b = " << l.b << "\n";
  out << "resolution = " << l.resolution << "\n";
  out << "split = " << l.split << "\n\n";

  out << "[scope]\n";
  out << "checkpoint = " << cfg.scope.checkpoint << "\n\n";

  out << "[fuse-scope]\n";
  out << "checkpoints = " << join_str(cfg.fuse.checkpoints) << "\n";
  out << "weights = " << join_f64(cfg.fuse.weights) << "\n\n";

  const StudyConfig& s = cfg.study;
  out << "[study]\n";
  out << "name = " << s.name << "\n";
  out << "seeds = " << join_u64(s.seeds) << "\n";
  out << "epochs = " << s.epochs << "\n";
  out << "lambda = " << fmt17(s.lambda) << "\n";
  out << "lambdas = " << join_f64(s.lambdas) << "\n";
  out << "alphas = " << join_f64(s.alphas) << "\n";
  out << "layer = " << s.layer << "\n";
  out << "with_matching = " << (s.with_matching ? "true" : "false") << "\n";
  out << "early_round = " << s.early_round << "\n";
  out << "window = " << s.window << "\n";
  return out.str();
}

}  // namespace wsalign
