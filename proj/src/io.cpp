#include "wsalign/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wsalign/common.hpp"

namespace wsalign {

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  f << content;
  if (!f.good()) throw InputError("short write to '" + path + "'");
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::string jquote(const std::string& s) { return "\"" + json_escape(s) + "\""; }

}  // namespace

std::string checkpoint_to_json(const Model& m) {
  m.validate();
  std::string out = "{\n";
  out += "  \"arch_id\": " + jquote(m.arch_id) + ",\n";
  out += "  \"seed\": " + std::to_string(m.seed) + ",\n";
  out += "  \"layers\": [\n";
  auto params = m.named_params();
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = *params[i].second;
    out += "    {\"name\": " + jquote(params[i].first) + ", \"shape\": [";
    for (size_t d = 0; d < t.shape.size(); ++d) {
      if (d) out += ", ";
      out += std::to_string(t.shape[d]);
    }
    out += "], \"values\": [";
    for (size_t k = 0; k < t.data.size(); ++k) {
      if (k) out += ", ";
      out += fmt17(t.data[k]);
    }
    out += "]}";
    out += i + 1 < params.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

void save_checkpoint(const Model& m, const std::string& path) {
  write_text_file(path, checkpoint_to_json(m));
}

Model checkpoint_from_json(const std::string& text,
                           const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": invalid JSON: " + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("arch_id") || !j.contains("seed") ||
        !j.contains("layers")) {
      throw ParseError(origin + ": checkpoint needs arch_id, seed, layers");
    }
    ArchSpec spec = parse_arch_id(j["arch_id"].get<std::string>());
    Model m;
    m.arch_id = j["arch_id"].get<std::string>();
    m.seed = j["seed"].get<uint64_t>();
    const auto& layers = j["layers"];
    if (!layers.is_array() || layers.size() != 2 * spec.acts.size()) {
      throw ParseError(origin + ": expected " +
                       std::to_string(2 * spec.acts.size()) +
                       " parameter tensors for " + m.arch_id);
    }
    for (size_t l = 0; l < spec.acts.size(); ++l) {
      const auto& jw = layers[2 * l];
      const auto& jb = layers[2 * l + 1];
      std::string wname = jw.at("name").get<std::string>();
      std::string bname = jb.at("name").get<std::string>();
      if (wname.size() < 8 ||
          wname.compare(wname.size() - 7, 7, ".weight") != 0) {
        throw ParseError(origin + ": tensor " + std::to_string(2 * l) +
                         " ('" + wname + "') should be a .weight entry");
      }
      std::string lname = wname.substr(0, wname.size() - 7);
      if (bname != lname + ".bias") {
        throw ParseError(origin + ": expected '" + lname + ".bias' after '" +
                         wname + "', got '" + bname + "'");
      }
      DenseLayer layer;
      layer.name = lname;
      layer.act = spec.acts[l];
      std::vector<int64_t> wshape = jw.at("shape").get<std::vector<int64_t>>();
      std::vector<int64_t> bshape = jb.at("shape").get<std::vector<int64_t>>();
      layer.weight = Tensor(wshape, jw.at("values").get<std::vector<double>>());
      layer.bias = Tensor(bshape, jb.at("values").get<std::vector<double>>());
      if (!layer.weight.all_finite() || !layer.bias.all_finite()) {
        throw ParseError(origin + ": layer '" + lname +
                         "' contains non-finite values");
      }
      m.layers.push_back(std::move(layer));
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": malformed checkpoint: " + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(origin + ": " + e.what());
  } catch (const InputError& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

Model load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_text_file(path), path);
}

std::string metrics_csv(const std::vector<EpochRecord>& log) {
  if (log.empty()) throw InputError("metrics log is empty");
  std::string out = "epoch,loss,acc";
  for (const auto& [name, s] : log.front().scope.entries) {
    out += "," + name + "_mu," + name + "_sigma";
  }
  out += "\n";
  for (const EpochRecord& rec : log) {
    if (rec.scope.entries.size() != log.front().scope.entries.size()) {
      throw InputError("metrics log rows disagree on scoped tensors");
    }
    out += std::to_string(rec.epoch) + "," + fmt17(rec.loss) + "," +
           fmt17(rec.accuracy);
    for (const auto& [name, s] : rec.scope.entries) {
      out += "," + fmt17(s.mu) + "," + fmt17(s.sigma);
    }
    out += "\n";
  }
  return out;
}

std::string curve_csv(const InterpolationCurve& curve) {
  std::string out = "alpha,loss,acc\n";
  for (size_t i = 0; i < curve.alphas.size(); ++i) {
    out += fmt17(curve.alphas[i]) + "," + fmt17(curve.losses[i]) + "," +
           fmt17(curve.accuracies[i]) + "\n";
  }
  return out;
}

std::string round_log_csv(const std::vector<RoundRecord>& rounds) {
  std::string out = "round,acc,loss,mean_scope_kl\n";
  for (const RoundRecord& r : rounds) {
    out += std::to_string(r.round) + "," + fmt17(r.test_accuracy) + "," +
           fmt17(r.train_loss) + "," + fmt17(r.mean_scope_kl) + "\n";
  }
  return out;
}

std::string scope_trajectory_csv(const std::vector<RoundRecord>& rounds) {
  std::string out = "round,client,layer,mu,sigma\n";
  for (const RoundRecord& r : rounds) {
    for (const auto& [client, scope] : r.client_scopes) {
      for (const auto& [name, s] : scope.entries) {
        out += std::to_string(r.round) + "," + std::to_string(client) + "," +
               name + "," + fmt17(s.mu) + "," + fmt17(s.sigma) + "\n";
      }
    }
  }
  return out;
}

std::string landscape_csv(const LandscapeGrid& grid) {
  std::string out = "u,v,loss\n";
  for (size_t ui = 0; ui < grid.us.size(); ++ui) {
    for (size_t vi = 0; vi < grid.vs.size(); ++vi) {
      out += fmt17(grid.us[ui]) + "," + fmt17(grid.vs[vi]) + "," +
             fmt17(grid.losses[ui * grid.vs.size() + vi]) + "\n";
    }
  }
  return out;
}

std::string scope_csv(const WeightScope& scope) {
  std::string out = "layer,mu,sigma,count\n";
  for (const auto& [name, s] : scope.entries) {
    out += name + "," + fmt17(s.mu) + "," + fmt17(s.sigma) + "," +
           std::to_string(s.count) + "\n";
  }
  return out;
}

std::string barrier_json(const BarrierReport& report) {
  return "{\"barrier_loss\": " + fmt17(report.barrier_loss) +
         ", \"barrier_err\": " + fmt17(report.barrier_err) +
         ", \"argmax_alpha\": " + fmt17(report.argmax_alpha) + "}\n";
}

std::string scope_json(const WeightScope& scope, const std::string& model_id) {
  std::string out = "{\n  \"model_id\": " + jquote(model_id) + ",\n";
  out += "  \"entries\": {\n";
  for (size_t i = 0; i < scope.entries.size(); ++i) {
    const auto& [name, s] = scope.entries[i];
    out += "    " + jquote(name) + ": {\"mu\": " + fmt17(s.mu) +
           ", \"sigma\": " + fmt17(s.sigma) +
           ", \"count\": " + std::to_string(s.count) + "}";
    out += i + 1 < scope.entries.size() ? ",\n" : "\n";
  }
  out += "  },\n  \"floored\": [";
  bool first = true;
  for (const auto& [name, s] : scope.entries) {
    if (s.sigma < kSigmaFloor) {
      if (!first) out += ", ";
      out += jquote(name);
      first = false;
    }
  }
  out += "]\n}\n";
  return out;
}

namespace {

std::string origin_name(ScopeTarget::Origin origin) {
  switch (origin) {
    case ScopeTarget::Origin::fixed_hyperparameter: return "fixed_hyperparameter";
    case ScopeTarget::Origin::fused: return "fused";
    case ScopeTarget::Origin::init_scope: return "init_scope";
  }
  return "unknown";
}

ScopeTarget::Origin origin_from_name(const std::string& name,
                                     const std::string& origin) {
  if (name == "fixed_hyperparameter") return ScopeTarget::Origin::fixed_hyperparameter;
  if (name == "fused") return ScopeTarget::Origin::fused;
  if (name == "init_scope") return ScopeTarget::Origin::init_scope;
  throw ParseError(origin + ": unknown target origin '" + name + "'");
}

}  // namespace

std::string target_json(const ScopeTarget& target) {
  std::string out = "{\n  \"origin\": " + jquote(origin_name(target.origin)) +
                    ",\n  \"entries\": {\n";
  for (size_t i = 0; i < target.entries.size(); ++i) {
    const auto& [name, g] = target.entries[i];
    out += "    " + jquote(name) + ": {\"mu\": " + fmt17(g.mu) +
           ", \"sigma\": " + fmt17(g.sigma) + "}";
    out += i + 1 < target.entries.size() ? ",\n" : "\n";
  }
  out += "  }\n}\n";
  return out;
}

ScopeTarget target_from_json(const std::string& text,
                             const std::string& origin) {
  // ordered_json keeps the file's entry order, which follows model parameter
  // order; plain json would silently re-sort by name.
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": invalid JSON: " + e.what());
  }
  try {
    ScopeTarget t;
    t.origin = origin_from_name(j.at("origin").get<std::string>(), origin);
    const auto& entries = j.at("entries");
    if (!entries.is_object() || entries.empty()) {
      throw ParseError(origin + ": target needs a non-empty entries object");
    }
    for (const auto& [name, g] : entries.items()) {
      GaussianParams p;
      p.mu = g.at("mu").get<double>();
      p.sigma = g.at("sigma").get<double>();
      if (!(p.sigma >= 0.0)) {
        throw ParseError(origin + ": entry '" + name + "' has negative sigma");
      }
      t.entries.emplace_back(name, p);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": malformed target: " + e.what());
  }
}

std::string permutation_json(const Permutation& perm,
                             const std::vector<std::string>& layer_names) {
  if (layer_names.size() != perm.perms.size()) {
    throw InputError("permutation layer-name count mismatch");
  }
  std::string out = "{\n  \"layers\": [";
  for (size_t i = 0; i < layer_names.size(); ++i) {
    if (i) out += ", ";
    out += jquote(layer_names[i]);
  }
  out += "],\n  \"perms\": [\n";
  for (size_t l = 0; l < perm.perms.size(); ++l) {
    out += "    [";
    for (size_t i = 0; i < perm.perms[l].size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(perm.perms[l][i]);
    }
    out += "]";
    out += l + 1 < perm.perms.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

Permutation permutation_from_json(const std::string& text,
                                  const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": invalid JSON: " + e.what());
  }
  try {
    Permutation p;
    p.perms = j.at("perms").get<std::vector<std::vector<int>>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": malformed permutation: " + e.what());
  }
}

std::string condition_matrix_csv(const ConditionMatrixResult& result) {
  std::string out =
      "factor,setting_same,setting_diff,mean_scope_kl,barrier_same,"
      "barrier_diff,diff,failed\n";
  for (const ConditionReport& row : result.rows) {
    out += factor_name(row.factor) + "," + row.setting_same + "," +
           row.setting_diff + "," + fmt17(row.mean_scope_kl) + "," +
           fmt17(row.barrier_same) + "," + fmt17(row.barrier_diff) + "," +
           fmt17(row.diff) + "," + (row.failed ? "1" : "0") + "\n";
  }
  return out;
}

std::string condition_matrix_json(const ConditionMatrixResult& result) {
  std::string out = "{\n  \"rows\": [\n";
  for (size_t i = 0; i < result.rows.size(); ++i) {
    const ConditionReport& row = result.rows[i];
    out += "    {\"factor\": " + jquote(factor_name(row.factor)) +
           ", \"setting_same\": " + jquote(row.setting_same) +
           ", \"setting_diff\": " + jquote(row.setting_diff) +
           ", \"mean_scope_kl\": " + fmt17(row.mean_scope_kl) +
           ", \"barrier_same\": " + fmt17(row.barrier_same) +
           ", \"barrier_diff\": " + fmt17(row.barrier_diff) +
           ", \"diff\": " + fmt17(row.diff) +
           ", \"failed\": " + (row.failed ? "true" : "false") + "}";
    out += i + 1 < result.rows.size() ? ",\n" : "\n";
  }
  out += "  ],\n";
  out += "  \"spearman_kl_vs_barrier\": " + fmt17(result.spearman_kl_vs_barrier) + ",\n";
  out += "  \"spearman_kl_vs_diff\": " + fmt17(result.spearman_kl_vs_diff) + ",\n";
  out += "  \"factors_same_le_diff\": " +
         std::to_string(result.factors_same_le_diff) + "\n}\n";
  return out;
}

std::string wsa_barrier_study_json(const WsaBarrierStudyResult& result) {
  std::string out = "{\n  \"pairs\": [\n";
  for (size_t i = 0; i < result.pairs.size(); ++i) {
    const auto& p = result.pairs[i];
    out += "    {\"seed_a\": " + std::to_string(p.seed_a) +
           ", \"seed_b\": " + std::to_string(p.seed_b) +
           ", \"baseline_naive\": " + fmt17(p.baseline_naive) +
           ", \"baseline_matched\": " + fmt17(p.baseline_matched) +
           ", \"wsa_naive\": " + fmt17(p.wsa_naive) +
           ", \"wsa_matched\": " + fmt17(p.wsa_matched) +
           ", \"baseline_naive_err\": " + fmt17(p.baseline_naive_err) +
           ", \"baseline_matched_err\": " + fmt17(p.baseline_matched_err) +
           ", \"wsa_naive_err\": " + fmt17(p.wsa_naive_err) +
           ", \"wsa_matched_err\": " + fmt17(p.wsa_matched_err) + "}";
    out += i + 1 < result.pairs.size() ? ",\n" : "\n";
  }
  out += "  ],\n";
  out += "  \"mean_baseline_naive\": " + fmt17(result.mean_baseline_naive) + ",\n";
  out += "  \"mean_baseline_matched\": " + fmt17(result.mean_baseline_matched) + ",\n";
  out += "  \"mean_wsa_naive\": " + fmt17(result.mean_wsa_naive) + ",\n";
  out += "  \"mean_wsa_matched\": " + fmt17(result.mean_wsa_matched) + ",\n";
  out += "  \"mean_baseline_naive_err\": " + fmt17(result.mean_baseline_naive_err) + ",\n";
  out += "  \"mean_baseline_matched_err\": " + fmt17(result.mean_baseline_matched_err) + ",\n";
  out += "  \"mean_wsa_naive_err\": " + fmt17(result.mean_wsa_naive_err) + ",\n";
  out += "  \"mean_wsa_matched_err\": " + fmt17(result.mean_wsa_matched_err) + "\n}\n";
  return out;
}

std::string scaling_study_csv(const ScalingStudyResult& result) {
  std::string out = "seed_a,seed_b,layer,alpha,barrier\n";
  for (const auto& row : result.rows) {
    for (size_t i = 0; i < result.alphas.size(); ++i) {
      out += std::to_string(row.seed_a) + "," + std::to_string(row.seed_b) +
             "," + std::to_string(result.layer_index) + "," +
             fmt17(result.alphas[i]) + "," + fmt17(row.barriers[i]) + "\n";
    }
  }
  return out;
}

std::string lambda_sweep_csv(const LambdaSweepResult& result) {
  std::string out = "lambda,acc_early,acc_final\n";
  for (const LambdaSweepRow& row : result.rows) {
    out += fmt17(row.lambda) + "," + fmt17(row.acc_early) + "," +
           fmt17(row.acc_final) + "\n";
  }
  return out;
}

std::string predefined_ablation_csv(const PredefinedAblationResult& result) {
  std::string out = "arm,seed_index,final_acc\n";
  for (const auto& arm : result.arms) {
    for (size_t i = 0; i < arm.final_acc_by_seed.size(); ++i) {
      out += arm.name + "," + std::to_string(i) + "," +
             fmt17(arm.final_acc_by_seed[i]) + "\n";
    }
    out += arm.name + ",mean," + fmt17(arm.mean_final_acc) + "\n";
  }
  return out;
}

}  // namespace wsalign
