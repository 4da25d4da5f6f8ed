// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <openssl/evp.h>

namespace svcdiff::cli {

namespace {

using K = KeyType;

const std::vector<ConfigKey>& schema() {
  static const std::vector<ConfigKey> keys{
      {"run", "seed", K::kSeed, 0, "master seed for every random draw"},
      {"run", "threads", K::kInt, 1, "worker threads (the --threads flag)"},

      {"schedule", "kind", K::kString, "vp-cosine", "noise schedule", {"vp-cosine", "vp-linear-logsnr"}},
      {"schedule", "params", K::kNumberList, json::array(), "schedule parameters ([] = schedule defaults)"},

      {"sampler", "mode", K::kString, "ddim", "sampler update rule", {"ddim", "ancestral"}},
      {"sampler", "steps", K::kInt, 64, "sampler transitions"},
      {"sampler", "kappa", K::kNumber, 0.0, "ancestral noise interpolation in [0, 1]"},
      {"sampler", "time_grid", K::kString, "uniform", "diffusion time grid", {"uniform", "quadratic"}},

      {"denoiser", "widths", K::kIntList, json::array({128, 128}), "hidden width, then residual block widths"},
      {"denoiser", "time_embed", K::kInt, 16, "time embedding width (even)"},
      {"denoiser", "attention", K::kBool, false, "cross-attention over the conditioning track"},

      {"loss", "weight", K::kString, "unit", "loss weighting v(theta)", {"unit", "snr"}},
      {"loss", "batch", K::kInt, 8, "examples per training batch"},
      {"loss", "lr", K::kNumber, 1e-4, "Adam learning rate"},

      {"train", "iterations", K::kInt, 1000, "optimizer steps"},
      {"train", "crop_frames", K::kInt, 64, "random crop length in frames (0 = whole segments)"},

      {"distill", "start_steps", K::kInt, 64, "teacher step count (power of two)"},
      {"distill", "halvings", K::kInt, 3, "distillation stages"},
      {"distill", "steps_per_stage", K::kInt, 1000, "training iterations per stage"},
      {"distill", "lr", K::kNumber, 5e-5, "student learning rate"},
      {"distill", "batch", K::kInt, 8, "examples per batch"},
      {"distill", "crop_frames", K::kInt, 64, "random crop length in frames (0 = whole segments)"},
      {"distill", "eval_every", K::kInt, 1, "score every n-th stage on the validation set (0 = never)"},

      {"slim", "latency_target", K::kNumber, 0.0, "target median latency in seconds (> 0)"},
      {"slim", "latency_reps", K::kInt, 10, "timed runs per latency measurement (>= 10)"},
      {"slim", "probe_frames", K::kInt, 64, "frames in the fixed latency probe"},
      {"slim", "validation_examples", K::kInt, 8, "segments held as the validation set"},

      {"slicer", "silence_db", K::kNumber, -40.0, "RMS silence threshold in dBFS"},
      {"slicer", "min_silence", K::kNumber, 0.3, "seconds of silence that cut a segment"},
      {"slicer", "max_segment", K::kNumber, 30.0, "segments are strictly shorter (seconds)"},
      {"slicer", "min_segment", K::kNumber, 0.5, "shorter segments are dropped (seconds)"},

      {"convert", "griffin_lim_iters", K::kInt, 32, "phase reconstruction iterations"},

      {"bench", "steps", K::kIntList, json::array({8, 64}), "sampler step counts to sweep"},
      {"bench", "threads", K::kIntList, json::array(), "thread counts to sweep, each <= run.threads ([] = run.threads)"},
      {"bench", "repetitions", K::kInt, 5, "timed runs per cell (after one warm-up)"},
      {"bench", "plot", K::kBool, false, "also write an SVG of RTF against steps"},
  };
  return keys;
}

std::string type_name(KeyType t) {
  switch (t) {
    case K::kInt: return "integer";
    case K::kSeed: return "non-negative integer";
    case K::kNumber: return "number";
    case K::kBool: return "boolean";
    case K::kString: return "string";
    case K::kIntList: return "list of integers";
    case K::kNumberList: return "list of numbers";
  }
  return "value";
}

bool is_integral(const json& v) {
  if (v.is_number_integer()) return true;
  if (!v.is_number_float()) return false;
  const double d = v.get<double>();
  return std::isfinite(d) && std::floor(d) == d && std::abs(d) < 9e15;
}

}  // namespace

std::span<const ConfigKey> config_schema() { return schema(); }

const ConfigKey& find_key(const std::string& dotted) {
  for (const auto& k : schema())
    if (k.dotted() == dotted) return k;
  throw UsageError("unknown config key '" + dotted + "'");
}

json check_value(const ConfigKey& key, const json& value) {
  const auto bad = [&] {
    return UsageError("config key '" + key.dotted() + "' expects a " + type_name(key.type) + ", got " + value.dump());
  };
  switch (key.type) {
    case K::kInt:
      if (!is_integral(value)) throw bad();
      return static_cast<std::int64_t>(value.get<double>());
    case K::kSeed:
      if (value.is_number_unsigned()) return value.get<std::uint64_t>();
      if (!is_integral(value) || value.get<double>() < 0) throw bad();
      return static_cast<std::uint64_t>(value.get<double>());
    case K::kNumber:
      if (!value.is_number() || !std::isfinite(value.get<double>())) throw bad();
      return value.get<double>();
    case K::kBool:
      if (!value.is_boolean()) throw bad();
      return value;
    case K::kString: {
      if (!value.is_string()) throw bad();
      const auto s = value.get<std::string>();
      if (!key.choices.empty() && std::find(key.choices.begin(), key.choices.end(), s) == key.choices.end()) {
        std::string allowed;
        for (const auto& c : key.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw UsageError("config key '" + key.dotted() + "' must be one of {" + allowed + "}, got '" + s + "'");
      }
      return value;
    }
    case K::kIntList:
    case K::kNumberList: {
      if (!value.is_array()) throw bad();
      json out = json::array();
      for (const auto& e : value) {
        if (key.type == K::kIntList) {
          if (!is_integral(e)) throw bad();
          out.push_back(static_cast<std::int64_t>(e.get<double>()));
        } else {
          if (!e.is_number() || !std::isfinite(e.get<double>())) throw bad();
          out.push_back(e.get<double>());
        }
      }
      return out;
    }
  }
  throw bad();
}

RunConfig::RunConfig() : values_(json::object()) {
  for (const auto& k : schema()) values_[k.section][k.name] = check_value(k, k.fallback);
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  merge_json(doc, path.string());
}

void RunConfig::merge_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) throw UsageError(origin + ": top level must be an object of sections");
  for (const auto& [section, body] : doc.items()) {
    if (!values_.contains(section)) throw UsageError(origin + ": unknown config section '" + section + "'");
    if (!body.is_object()) throw UsageError(origin + ": section '" + section + "' must be an object");
    for (const auto& [name, value] : body.items()) set(section + "." + name, value);
  }
}

void RunConfig::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects section.key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  set(key, value);
}

void RunConfig::set(const std::string& dotted, const json& value) {
  const ConfigKey& k = find_key(dotted);
  values_[k.section][k.name] = check_value(k, value);
}

const json& RunConfig::get(const std::string& dotted) const {
  const ConfigKey& k = find_key(dotted);
  return values_.at(k.section).at(k.name);
}

std::int64_t RunConfig::integer(const std::string& dotted) const { return get(dotted).get<std::int64_t>(); }
std::uint64_t RunConfig::seed(const std::string& dotted) const { return get(dotted).get<std::uint64_t>(); }
double RunConfig::number(const std::string& dotted) const { return get(dotted).get<double>(); }
bool RunConfig::boolean(const std::string& dotted) const { return get(dotted).get<bool>(); }
std::string RunConfig::string(const std::string& dotted) const { return get(dotted).get<std::string>(); }

std::vector<int> RunConfig::int_list(const std::string& dotted) const {
  std::vector<int> out;
  for (const auto& v : get(dotted)) {
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw UsageError("config key '" + dotted + "' has an out-of-range entry");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

std::vector<double> RunConfig::number_list(const std::string& dotted) const {
  return get(dotted).get<std::vector<double>>();
}

std::string RunConfig::canonical() const { return values_.dump(); }

std::string RunConfig::hash() const { return sha256_hex(canonical()); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

}  // namespace svcdiff::cli
