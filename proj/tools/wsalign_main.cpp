#include <cerrno>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wsalign/common.hpp"
#include "wsalign/config.hpp"
#include "wsalign/io.hpp"

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

// One machine-readable line on stderr, then the taxonomy's exit code.
int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << "{\"error\": \"" << kind << "\", \"message\": \""
            << json_escape(message) << "\"}" << std::endl;
  return code;
}

const char* command_help(wsalign::Command c) {
  using wsalign::Command;
  switch (c) {
    case Command::train:
      return "train an MLP on blob data, with an optional scope penalty";
    case Command::scope:
      return "per-tensor Gaussian weight statistics of a checkpoint";
    case Command::fuse_scope:
      return "fuse the scopes of several checkpoints into one target";
    case Command::interpolate:
      return "loss curve and barrier along the line between two checkpoints";
    case Command::match:
      return "permute one checkpoint's hidden units to match another";
    case Command::scale:
      return "function-preserving rescaling of one relu layer";
    case Command::landscape:
      return "loss over the plane spanned by three checkpoints";
    case Command::fl:
      return "federated simulation (fedavg/fedprox, optional scope alignment)";
    case Command::study:
      return "multi-seed study presets (condition_matrix, wsa_barrier, "
             "scaling, lambda_sweep, predefined_ablation)";
  }
  return "";
}

int run(int argc, char** argv) {
  using wsalign::Command;
  CLI::App app{
      "wsalign: weight-scope statistics, scope-aligned training, model "
      "merging, and a federated-learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  uint64_t seed_override = 0;

  for (Command c :
       {Command::train, Command::scope, Command::fuse_scope,
        Command::interpolate, Command::match, Command::scale,
        Command::landscape, Command::fl, Command::study}) {
    CLI::App* sub =
        app.add_subcommand(wsalign::command_name(c), command_help(c));
    sub->add_option("-c,--config", config_path,
                    "configuration file (sectioned key = value, strict)")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_override,
                    "output directory (overrides config and WSALIGN_OUT)");
    sub->add_option("-s,--seed", seed_override, "run seed (overrides config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    return fail("cli", e.what(), 2);
  }

  CLI::App* sub = app.get_subcommands().front();
  wsalign::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = wsalign::load_config(config_path);
  cfg.command = wsalign::parse_command(sub->get_name());

  if (const char* env_out = std::getenv("WSALIGN_OUT")) {
    if (*env_out) cfg.out = env_out;
  }
  if (const char* env_threads = std::getenv("WSALIGN_THREADS")) {
    errno = 0;
    char* end = nullptr;
    long t = std::strtol(env_threads, &end, 10);
    if (errno != 0 || end == env_threads || *end != '\0' || t < 1) {
      throw wsalign::ConfigError(
          std::string("WSALIGN_THREADS must be a positive integer, got '") +
          env_threads + "'");
    }
    cfg.fl.threads = static_cast<int>(t);
  }
  if (sub->count("--out")) cfg.out = out_override;
  if (sub->count("--seed")) cfg.seed = seed_override;

  wsalign::dispatch(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const wsalign::ParseError& e) {
    return fail("parse", e.what(), 2);
  } catch (const wsalign::ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const wsalign::InputError& e) {
    return fail("input", e.what(), 3);
  } catch (const wsalign::ShapeError& e) {
    return fail("shape", e.what(), 3);
  } catch (const wsalign::NumericError& e) {
    return fail("numeric", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
