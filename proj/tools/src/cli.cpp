// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "svcdiff/error.hpp"
#include "svcdiff/version.hpp"

namespace svcdiff::cli {

namespace {

std::string type_label(const ConfigKey& k) {
  switch (k.type) {
    case KeyType::kInt: return "int";
    case KeyType::kSeed: return "uint64";
    case KeyType::kNumber: return "number";
    case KeyType::kBool: return "bool";
    case KeyType::kString: return "string";
    case KeyType::kIntList: return "int list";
    case KeyType::kNumberList: return "number list";
  }
  return "";
}

std::string keys_footer(const std::string& command) {
  std::ostringstream o;
  o << "Config keys consumed (set in --config JSON or with --set section.key=value):\n";
  for (const auto& section : sections_for(command))
    for (const auto& k : config_schema()) {
      if (section != k.section) continue;
      o << "  " << k.dotted() << " (" << type_label(k) << ", default " << k.fallback.dump() << ")  " << k.help;
      if (!k.choices.empty()) {
        o << " {";
        for (std::size_t i = 0; i < k.choices.size(); ++i) o << (i ? "|" : "") << k.choices[i];
        o << "}";
      }
      o << '\n';
    }
  return o.str();
}

int bad_input_code(Errc c) {
  switch (c) {
    case Errc::kNonFiniteLoss:
    case Errc::kUnstableLatency:
    case Errc::kDegenerateStep:
      return kExitInternal;
    default:
      return kExitBadInput;
  }
}

void report(std::ostream& err, const std::string& command, const std::string& code, const std::string& message,
            int exit_code, const std::vector<std::string>& failed = {}) {
  nlohmann::json j;
  j["error"] = {{"code", code}, {"message", message}, {"exit_code", exit_code}};
  if (!command.empty()) j["error"]["command"] = command;
  if (!failed.empty()) j["error"]["failed"] = failed;
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"svcdiff: diffusion singing-voice conversion toolkit", "svcdiff"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Invocation inv;
  std::string config_file;
  std::vector<std::string> sets;
  // (key, raw value) from dedicated flags; applied after --config and --set.
  std::vector<std::pair<std::string, std::string>> flags;

  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const Invocation&);
  };
  static const Sub subs[] = {
      {"slice", "Cut every WAV under --in at silences; write segments and manifest.csv", cmd_slice},
      {"featurize", "Extract mel, F0 and conditioning tensors for each manifest segment", cmd_featurize},
      {"train", "Train a denoiser on featurized segments", cmd_train},
      {"distill", "Progressively distill a teacher checkpoint, one checkpoint per halving", cmd_distill},
      {"slim", "Remove or duplicate residual blocks against a latency target", cmd_slim},
      {"convert", "Convert one WAV through the full pipeline", cmd_convert},
      {"bench", "Time the pipeline over step counts and thread counts", cmd_bench},
  };

  struct Binding {
    const char* opt;
    const char* key;
    const char* help;
  };
  for (const auto& sub : subs) {
    CLI::App* sc = app.add_subcommand(sub.name, sub.help);
    const std::string name = sub.name;
    sc->footer(keys_footer(name));
    sc->add_option("--out", inv.out, "Output directory")->required();
    sc->add_option("--config", config_file, "JSON config file with one object per section");
    sc->add_option("--set", sets, "Override a config key: section.key=value (repeatable)");

    std::vector<Binding> b{{"--threads", "run.threads", "Thread cap"}, {"--seed", "run.seed", "Master seed"}};
    if (name == "convert" || name == "bench" || name == "distill") {
      b.push_back({"--mode", "sampler.mode", "Sampler: ddim or ancestral"});
      b.push_back({"--kappa", "sampler.kappa", "Ancestral noise interpolation"});
      b.push_back({"--time-grid", "sampler.time_grid", "uniform or quadratic"});
    }
    if (name == "convert") b.push_back({"--steps", "sampler.steps", "Sampler transitions"});
    if (name == "bench") {
      b.push_back({"--steps", "bench.steps", "Comma-separated step counts"});
      b.push_back({"--threads-list", "bench.threads", "Comma-separated thread counts"});
    }
    if (name == "distill") b.push_back({"--halvings", "distill.halvings", "Distillation stages"});
    if (name == "slim") b.push_back({"--latency-target", "slim.latency_target", "Target latency in seconds"});
    for (const auto& bind : b) {
      const std::string key = bind.key;
      sc->add_option_function<std::string>(
          bind.opt, [&flags, key](const std::string& v) { flags.emplace_back(key, v); },
          std::string(bind.help) + " [" + key + "]");
    }
    if (name == "bench")
      sc->add_flag_callback("--plot", [&flags] { flags.emplace_back("bench.plot", "true"); },
                            "Also write bench.svg [bench.plot]");

    if (name == "slice") sc->add_option("--in", inv.input, "Directory of WAV files")->required();
    if (name == "featurize") sc->add_option("--manifest", inv.manifest, "manifest.csv written by slice")->required();
    if (name == "train" || name == "distill" || name == "slim")
      sc->add_option("--features", inv.features, "Output directory of featurize")->required();
    if (name == "distill" || name == "slim" || name == "convert" || name == "bench")
      sc->add_option("--checkpoint", inv.checkpoint, "Denoiser checkpoint")->required();
    if (name == "convert" || name == "bench") sc->add_option("--in", inv.input, "Input WAV")->required();
    if (name == "bench") sc->add_option("--students", inv.students, "Directory of distilled stage checkpoints");
  }

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, "", "UsageError", e.what(), kExitBadInput);
    return kExitBadInput;
  }

  const Sub* chosen = nullptr;
  for (const auto& sub : subs)
    if (app.got_subcommand(sub.name)) chosen = &sub;
  inv.command = chosen->name;
  inv.args.assign(argv.begin() + 1, argv.end());

  try {
    if (!config_file.empty()) inv.config.merge_file(config_file);
    for (const auto& s : sets) inv.config.set_override(s);
    for (const auto& [key, raw] : flags) {
      const ConfigKey& k = find_key(key);
      if (k.type == KeyType::kIntList || k.type == KeyType::kNumberList)
        inv.config.set_override(key + "=[" + raw + "]");
      else
        inv.config.set_override(key + "=" + raw);
    }
    chosen->fn(inv);
    return kExitOk;
  } catch (const UsageError& e) {
    report(err, inv.command, "UsageError", e.what(), kExitBadInput);
    return kExitBadInput;
  } catch (const PartialFailure& e) {
    report(err, inv.command, "PartialFailure", e.what(), kExitBadInput, e.failed());
    return kExitBadInput;
  } catch (const Error& e) {
    const int code = bad_input_code(e.code());
    report(err, inv.command, std::string(errc_name(e.code())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report(err, inv.command, "InternalError", e.what(), kExitInternal);
    return kExitInternal;
  }
}

}  // namespace svcdiff::cli
