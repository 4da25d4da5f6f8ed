// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>

#include "svcdiff/audio.hpp"
#include "svcdiff/bench.hpp"
#include "svcdiff/conditioning.hpp"
#include "svcdiff/denoiser.hpp"
#include "svcdiff/distill.hpp"
#include "svcdiff/error.hpp"
#include "svcdiff/f0.hpp"
#include "svcdiff/parallel.hpp"
#include "svcdiff/rng.hpp"
#include "svcdiff/sampler.hpp"
#include "svcdiff/slicer.hpp"
#include "svcdiff/spectral.hpp"
#include "svcdiff/tensor_io.hpp"
#include "svcdiff/version.hpp"

namespace fs = std::filesystem;

namespace svcdiff::cli {

namespace {

// ---- shared plumbing -------------------------------------------------------

class Outputs {
 public:
  explicit Outputs(const Invocation& inv) : inv_(inv) { fs::create_directories(inv.out); }

  fs::path path(const fs::path& rel) {
    const fs::path p = inv_.out / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    files_.push_back(rel.generic_string());
    return p;
  }

  // Timing-dependent files are listed separately: they are the only
  // artifacts allowed to differ between identical re-runs.
  fs::path timing_path(const fs::path& rel) {
    timing_.push_back(rel.generic_string());
    return inv_.out / rel;
  }

  void write_manifest(const json& summary) const {
    json versions = json::object();
    for (const auto& [name, v] : component_versions()) versions[name] = v;
    json j;
    j["command"] = inv_.command;
    j["args"] = inv_.args;
    j["config"] = inv_.config.resolved();
    j["reproducibility"] = {{"config_hash", inv_.config.hash()},
                            {"seed", inv_.config.seed("run.seed")},
                            {"versions", versions}};
    auto files = files_;
    std::sort(files.begin(), files.end());
    j["outputs"] = files;
    auto timing = timing_;
    std::sort(timing.begin(), timing.end());
    j["timing_outputs"] = timing;
    j["summary"] = summary;
    std::ofstream(inv_.out / "run.json") << j.dump(2) << '\n';
  }

 private:
  const Invocation& inv_;
  std::vector<std::string> files_;
  std::vector<std::string> timing_;
};

int threads_of(const Invocation& inv) {
  const auto t = inv.config.integer("run.threads");
  if (t < 1 || t > 1024) throw UsageError("run.threads must lie in [1, 1024]");
  return static_cast<int>(t);
}

int positive_int(const RunConfig& c, const std::string& key, std::int64_t min = 1) {
  const auto v = c.integer(key);
  if (v < min || v > 1'000'000'000) throw UsageError(key + " must be >= " + std::to_string(min));
  return static_cast<int>(v);
}

void require_dir(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_directory(p)) throw UsageError(std::string(flag) + " " + p.string() + " is not a directory");
}

void require_file(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_regular_file(p)) throw UsageError(std::string(flag) + " " + p.string() + " is not a file");
}

NoiseSchedule schedule_of(const RunConfig& c) {
  const auto params = c.number_list("schedule.params");
  return make_schedule(parse_schedule_kind(c.string("schedule.kind")), params);
}

SamplerConfig sampler_of(const RunConfig& c) {
  SamplerConfig s;
  s.mode = parse_sampler_mode(c.string("sampler.mode"));
  s.steps = static_cast<int>(c.integer("sampler.steps"));
  s.kappa = c.number("sampler.kappa");
  s.seed = c.seed("run.seed");
  s.time_grid = parse_time_grid(c.string("sampler.time_grid"));
  s.validate();
  return s;
}

LossConfig loss_of(const RunConfig& c) {
  LossConfig l;
  l.weight = parse_loss_weight(c.string("loss.weight"));
  l.batch = positive_int(c, "loss.batch");
  l.lr = c.number("loss.lr");
  return l;
}

DenoiserArch arch_of(const RunConfig& c) {
  DenoiserArch a;
  a.data_dim = kMelBands;
  a.widths = c.int_list("denoiser.widths");
  a.time_embed = static_cast<int>(c.integer("denoiser.time_embed"));
  a.attention = c.boolean("denoiser.attention");
  return a;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

// Features written by `featurize`, loaded back as training examples.
struct FeatureRow {
  std::string id;
  fs::path mel, f0, cond;
};

std::vector<FeatureRow> feature_rows(const fs::path& dir) {
  require_dir(dir, "--features");
  const fs::path index = dir / "features.csv";
  if (!fs::is_regular_file(index)) throw UsageError("--features directory has no features.csv");
  const auto rows = read_csv(index);
  std::vector<FeatureRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 5) throw UsageError("features.csv row " + std::to_string(i) + " has the wrong field count");
    out.push_back({rows[i][0], dir / rows[i][2], dir / rows[i][3], dir / rows[i][4]});
  }
  return out;
}

std::vector<Example> load_examples(const fs::path& dir) {
  const MelNormalizer norm;
  std::vector<Example> out;
  for (const auto& r : feature_rows(dir)) {
    Example ex;
    ex.x.values = norm.normalize(read_tensor(r.mel).as_matrix());
    ex.cond = ConditioningTrack{read_tensor(r.cond).as_matrix()};
    if (ex.x.values.cols() != kMelBands || ex.cond->vectors.cols() != kConditioningDim ||
        ex.cond->vectors.rows() != ex.x.values.rows())
      throw Error(Errc::kShapeMismatch, "feature files for " + r.id + " have inconsistent shapes");
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw UsageError("no feature segments listed in " + (dir / "features.csv").string());
  return out;
}

DenoiserParams load_model(const Invocation& inv) {
  require_file(inv.checkpoint, "--checkpoint");
  return load_checkpoint(inv.checkpoint);
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

// First `frames` frames of an example (all of it when shorter).
Example head(const Example& ex, Eigen::Index frames) {
  const Eigen::Index n = std::min(frames, ex.x.values.rows());
  Example out;
  out.x.values = ex.x.values.topRows(n);
  if (ex.cond) out.cond = ConditioningTrack{ex.cond->vectors.topRows(n)};
  return out;
}

}  // namespace

// ---- CSV -------------------------------------------------------------------

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), {}};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) throw UsageError(path.string() + ": unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> sections_for(const std::string& command) {
  static const std::map<std::string, std::vector<std::string>> m{
      {"slice", {"run", "slicer"}},
      {"featurize", {"run"}},
      {"train", {"run", "schedule", "denoiser", "loss", "train"}},
      {"distill", {"run", "schedule", "sampler", "loss", "distill"}},
      {"slim", {"run", "schedule", "loss", "slim"}},
      {"convert", {"run", "schedule", "sampler", "convert"}},
      {"bench", {"run", "schedule", "sampler", "convert", "bench"}},
  };
  return m.at(command);
}

// ---- slice -----------------------------------------------------------------

void cmd_slice(const Invocation& inv) {
  require_dir(inv.input, "--in");
  const RunConfig& c = inv.config;
  SlicerConfig sc;
  sc.silence_db = c.number("slicer.silence_db");
  sc.min_silence = c.number("slicer.min_silence");
  sc.max_segment = c.number("slicer.max_segment");
  sc.min_segment = c.number("slicer.min_segment");
  sc.validate();

  std::vector<fs::path> wavs;
  for (const auto& e : fs::recursive_directory_iterator(inv.input))
    if (e.is_regular_file() && lower(e.path().extension().string()) == ".wav") wavs.push_back(e.path());
  std::sort(wavs.begin(), wavs.end());

  Outputs outs(inv);
  std::vector<std::string> rows{"source,start_sec,end_sec,path"};
  std::vector<std::string> failed;
  std::size_t segments = 0;
  for (const auto& wav : wavs) {
    const std::string rel = fs::relative(wav, inv.input).generic_string();
    std::vector<Segment> segs;
    try {
      segs = slice_segments(read_wav(wav), sc);
    } catch (const Error& e) {
      failed.push_back(rel + ": " + e.what());
      continue;
    }
    std::string stem = fs::path(rel).replace_extension().generic_string();
    std::replace(stem.begin(), stem.end(), '/', '_');
    for (std::size_t k = 0; k < segs.size(); ++k) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_%04zu.wav", k);
      const fs::path seg_rel = fs::path("segments") / (stem + suffix);
      write_wav(outs.path(seg_rel), segs[k].clip);
      rows.push_back(csv_field(rel) + "," + fixed(segs[k].start_sec) + "," + fixed(segs[k].end_sec) + "," +
                     csv_field(seg_rel.generic_string()));
      ++segments;
    }
  }
  write_lines(outs.path("manifest.csv"), rows);
  outs.write_manifest({{"inputs", wavs.size()}, {"segments", segments}, {"failed", failed}});
  if (!failed.empty()) throw PartialFailure("some inputs could not be sliced", failed);
}

// ---- featurize -------------------------------------------------------------

void cmd_featurize(const Invocation& inv) {
  require_file(inv.manifest, "--manifest");
  const int threads = threads_of(inv);
  const auto rows = read_csv(inv.manifest);
  const fs::path base = inv.manifest.parent_path();
  struct Job {
    std::string id;
    fs::path source;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw UsageError("manifest row " + std::to_string(i) + " has the wrong field count");
    const fs::path seg = rows[i][3];
    jobs.push_back({seg.stem().string(), seg.is_absolute() ? seg : base / seg});
  }

  Outputs outs(inv);
  struct Done {
    Eigen::Index frames = 0;
    bool skipped = false;
    std::string error;
  };
  std::vector<Done> done(jobs.size());
  const fs::path feat_dir = inv.out / "features";
  fs::create_directories(feat_dir);
  std::vector<fs::path> mel_p, f0_p, cond_p;
  for (const auto& j : jobs) {
    mel_p.push_back(feat_dir / (j.id + ".mel.svct"));
    f0_p.push_back(feat_dir / (j.id + ".f0.svct"));
    cond_p.push_back(feat_dir / (j.id + ".cond.svct"));
  }

  // Clips are independent; each is featurized single-threaded so results do
  // not depend on the thread count.
  parallel_for(jobs.size(), threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        const auto src_time = fs::last_write_time(jobs[i].source);
        const auto fresh = [&](const fs::path& p) { return fs::exists(p) && fs::last_write_time(p) >= src_time; };
        if (fresh(mel_p[i]) && fresh(f0_p[i]) && fresh(cond_p[i])) {
          done[i].frames = static_cast<Eigen::Index>(read_tensor_header(mel_p[i]).dims[0]);
          done[i].skipped = true;
          continue;
        }
        const AudioClip clip = normalize(resample(read_wav(jobs[i].source), kModelRate));
        const MelSpectrogram mel = mel_spectrogram(clip);
        const F0Contour f0 = estimate_f0(clip);
        const ConditioningTrack cond = build_conditioning(f0, content_features(mel));
        Tensor f0t(static_cast<Eigen::Index>(f0.size()), 2);
        for (std::size_t f = 0; f < f0.size(); ++f) {
          f0t(static_cast<Eigen::Index>(f), 0) = f0.hz[f];
          f0t(static_cast<Eigen::Index>(f), 1) = f0.voiced[f] ? 1.0 : 0.0;
        }
        write_tensor(mel_p[i], mel.frames);
        write_tensor(f0_p[i], f0t);
        write_tensor(cond_p[i], cond.vectors);
        done[i].frames = mel.frames.rows();
      } catch (const std::exception& ex) {
        done[i].error = ex.what();
      }
    }
  });

  std::vector<std::string> index{"id,frames,mel,f0,cond"};
  std::vector<std::string> failed;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!done[i].error.empty()) {
      failed.push_back(jobs[i].id + ": " + done[i].error);
      continue;
    }
    skipped += done[i].skipped ? 1 : 0;
    for (const auto* p : {&mel_p[i], &f0_p[i], &cond_p[i]}) outs.path(fs::relative(*p, inv.out));
    index.push_back(csv_field(jobs[i].id) + "," + std::to_string(done[i].frames) + "," +
                    csv_field(fs::relative(mel_p[i], inv.out).generic_string()) + "," +
                    csv_field(fs::relative(f0_p[i], inv.out).generic_string()) + "," +
                    csv_field(fs::relative(cond_p[i], inv.out).generic_string()));
  }
  write_lines(outs.path("features.csv"), index);
  // Skip counts differ between a first run and a re-run, so they stay out
  // of run.json.
  outs.write_manifest({{"segments", jobs.size()}, {"failed", failed}});
  std::ofstream(outs.timing_path("featurize_status.json")) << json{{"skipped_up_to_date", skipped}}.dump() << '\n';
  if (!failed.empty()) throw PartialFailure("some segments could not be featurized", failed);
}

// ---- train -----------------------------------------------------------------

void cmd_train(const Invocation& inv) {
  const RunConfig& c = inv.config;
  const auto data = load_examples(inv.features);
  const NoiseSchedule s = schedule_of(c);
  TrainConfig tc;
  tc.loss = loss_of(c);
  tc.seed = c.seed("run.seed");
  tc.crop_frames = positive_int(c, "train.crop_frames", 0);
  const int iterations = positive_int(c, "train.iterations", 0);

  Outputs outs(inv);
  const TrainResult r = train(init_denoiser(arch_of(c), tc.seed), data, s, tc, iterations);
  save_checkpoint(outs.path("denoiser.ckpt"), r.params);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < r.losses.size(); ++i)
    lines.push_back(json{{"step", i}, {"loss", r.losses[i]}}.dump());
  write_lines(outs.path("losses.jsonl"), lines);
  outs.write_manifest({{"examples", data.size()},
                       {"iterations", iterations},
                       {"parameters", r.params.parameter_count()},
                       {"final_loss", r.losses.empty() ? 0.0 : r.losses.back()}});
}

// ---- distill ---------------------------------------------------------------

void cmd_distill(const Invocation& inv) {
  const RunConfig& c = inv.config;
  const DenoiserParams teacher = load_model(inv);
  const auto data = load_examples(inv.features);
  const NoiseSchedule s = schedule_of(c);
  DistillConfig dc;
  dc.start_steps = static_cast<int>(c.integer("distill.start_steps"));
  dc.halvings = static_cast<int>(c.integer("distill.halvings"));
  dc.steps_per_stage = positive_int(c, "distill.steps_per_stage", 0);
  dc.lr = c.number("distill.lr");
  dc.seed = c.seed("run.seed");
  dc.batch = positive_int(c, "distill.batch");
  dc.crop_frames = positive_int(c, "distill.crop_frames", 0);
  dc.time_grid = parse_time_grid(c.string("sampler.time_grid"));
  dc.validate();
  const int eval_every = positive_int(c, "distill.eval_every", 0);

  EvalSet eval{data, s, loss_of(c), dc.seed, {}, std::nullopt, 1};
  int stage = 0;
  const QualityFn quality = [&](const DenoiserParams& student, int) {
    ++stage;
    if (eval_every == 0 || stage % eval_every != 0) return std::numeric_limits<double>::quiet_NaN();
    return -validation_loss(student, eval);
  };
  std::vector<StageReport> reports;
  const auto stages = progressive_distill(teacher, data, s, dc, quality, &reports);

  Outputs outs(inv);
  std::vector<std::string> lines, ckpts;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const std::string name =
        "stage" + std::to_string(k + 1) + "_" + std::to_string(stages[k].student_steps) + "steps.ckpt";
    save_checkpoint(outs.path(name), stages[k].student);
    ckpts.push_back(name);
    if (reports[k].quality && std::isnan(*reports[k].quality)) reports[k].quality.reset();
    lines.push_back(reports[k].to_json());
  }
  write_lines(outs.path("stages.jsonl"), lines);
  outs.write_manifest({{"stages", stages.size()}, {"checkpoints", ckpts}});
}

// ---- slim ------------------------------------------------------------------

void cmd_slim(const Invocation& inv) {
  const RunConfig& c = inv.config;
  const DenoiserParams net = load_model(inv);
  const auto data = load_examples(inv.features);
  const double target = c.number("slim.latency_target");
  if (!(target > 0.0)) throw UsageError("slim.latency_target must be > 0 seconds");
  const int reps = positive_int(c, "slim.latency_reps", 10);
  const int probe_frames = positive_int(c, "slim.probe_frames");
  const auto n_val = static_cast<std::size_t>(positive_int(c, "slim.validation_examples"));

  std::vector<Example> val;
  for (std::size_t i = 0; i < std::min(n_val, data.size()); ++i) val.push_back(head(data[i], probe_frames));
  CounterRng rng(c.seed("run.seed"), 0x51u);
  LatentState probe{rng.normal_tensor(probe_frames, net.data_dim), 0.5};
  std::optional<ConditioningTrack> probe_cond;
  if (net.cond_dim > 0) probe_cond = ConditioningTrack{rng.normal_tensor(probe_frames, net.cond_dim)};
  const EvalSet eval{val, schedule_of(c), loss_of(c), c.seed("run.seed"), probe, probe_cond, 1};

  const SlimResult r = slim_network(net, target, eval, reps);
  Outputs outs(inv);
  save_checkpoint(outs.path("slim.ckpt"), r.net);
  std::vector<std::string> lines;
  for (const auto& a : r.log) lines.push_back(a.to_json());
  write_lines(outs.timing_path("actions.jsonl"), lines);
  outs.write_manifest({{"blocks_before", net.blocks.size()}, {"blocks_after", r.net.blocks.size()}});
}

// ---- convert / bench -------------------------------------------------------

void cmd_convert(const Invocation& inv) {
  const RunConfig& c = inv.config;
  const MlpDenoiser model(load_model(inv));
  require_file(inv.input, "--in");
  const AudioClip clip = read_wav(inv.input);
  PipelineOptions opt;
  opt.threads = threads_of(inv);
  opt.repetitions = 1;
  opt.warmup = false;
  opt.griffin_lim_iters = positive_int(c, "convert.griffin_lim_iters", 0);
  const PipelineOutput r = run_pipeline(clip, model, schedule_of(c), sampler_of(c), opt);

  Outputs outs(inv);
  write_wav(outs.path("converted.wav"), r.clip);
  std::ofstream(outs.timing_path("report.json")) << r.report.to_json() << '\n';
  outs.write_manifest({{"input_seconds", clip.seconds()}, {"output_seconds", r.clip.seconds()}});
}

void cmd_bench(const Invocation& inv) {
  const RunConfig& c = inv.config;
  const int cap = threads_of(inv);
  std::vector<int> threads = c.int_list("bench.threads");
  if (threads.empty()) threads.push_back(cap);
  for (int t : threads)
    if (t < 1 || t > cap) throw UsageError("bench.threads entries must lie in [1, run.threads]");
  const std::vector<int> steps = c.int_list("bench.steps");
  if (steps.empty()) throw UsageError("bench.steps must not be empty");
  for (int n : steps)
    if (n < 1) throw UsageError("bench.steps entries must be >= 1");

  // The teacher serves every step count unless a distilled student with
  // exactly that many steps is supplied.
  std::map<int, MlpDenoiser> models;
  const MlpDenoiser teacher(load_model(inv));
  if (!inv.students.empty()) {
    require_dir(inv.students, "--students");
    const std::regex pat(R"(stage\d+_(\d+)steps\.ckpt)");
    for (const auto& e : fs::directory_iterator(inv.students)) {
      std::smatch m;
      const std::string name = e.path().filename().string();
      if (std::regex_match(name, m, pat)) models.emplace(std::stoi(m[1]), MlpDenoiser(load_checkpoint(e.path())));
    }
  }
  const DenoiserChain chain = [&](int n) -> const Denoiser& {
    const auto it = models.find(n);
    return it == models.end() ? static_cast<const Denoiser&>(teacher) : it->second;
  };

  require_file(inv.input, "--in");
  const AudioClip clip = read_wav(inv.input);
  PipelineOptions opt;
  opt.repetitions = positive_int(c, "bench.repetitions");
  opt.griffin_lim_iters = positive_int(c, "convert.griffin_lim_iters", 0);
  const auto reports = step_sweep(chain, clip, schedule_of(c), sampler_of(c), steps, threads, opt);

  Outputs outs(inv);
  write_jsonl(outs.timing_path("bench.jsonl"), reports);
  write_csv_summary(outs.timing_path("bench.csv"), reports);
  if (c.boolean("bench.plot")) write_svg_plot(outs.timing_path("bench.svg"), reports);
  std::vector<std::string> served;
  for (int n : steps) served.push_back(std::to_string(n) + (models.count(n) ? ":student" : ":teacher"));
  outs.write_manifest({{"cells", reports.size()}, {"models", served}});
}

}  // namespace svcdiff::cli
