// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "svcdiff/audio.hpp"
#include "svcdiff/bench.hpp"
#include "svcdiff/denoiser.hpp"
#include "svcdiff/sampler.hpp"
#include "svcdiff/spectral.hpp"
#include "svcdiff/tensor_io.hpp"
#include "test_support.hpp"

namespace svcdiff {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "svcdiff");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          (std::string("svcdiff_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }

  // slice + featurize of a few short formant tones.
  fs::path prepare_features(int clips = 3) {
    fs::create_directories(dir / "wav");
    for (int i = 0; i < clips; ++i)
      write_wav(dir / "wav" / ("voice" + std::to_string(i) + ".wav"),
                testing::formant_tone(i % 2 ? testing::kVowelA : testing::kVowelI, 150.0 + 40.0 * i, 0.8, 0.02,
                                      5.0, 16000));
    EXPECT_EQ(cli({"slice", "--in", p("wav"), "--out", p("sliced")}).code, 0);
    EXPECT_EQ(cli({"featurize", "--manifest", p("sliced/manifest.csv"), "--out", p("feat")}).code, 0);
    return dir / "feat";
  }

  fs::path point_mass_checkpoint(double level) {
    DenoiserArch arch;
    arch.widths = {8, 8};
    arch.time_embed = 4;
    const fs::path path = dir / "pm.ckpt";
    save_checkpoint(path, point_mass_denoiser(arch, Eigen::VectorXd::Constant(kMelBands, level)));
    return path;
  }

  fs::path dir;
};

// ---- arguments, config, errors ----

TEST_F(CliTest, HelpListsEveryConsumedKey) {
  for (const char* cmd : {"slice", "featurize", "train", "distill", "slim", "convert", "bench"}) {
    const CliResult r = cli({cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& section : cli::sections_for(cmd))
      for (const auto& k : cli::config_schema())
        if (section == k.section) EXPECT_NE(r.out.find(k.dotted()), std::string::npos) << cmd << " " << k.dotted();
  }
}

TEST_F(CliTest, UsageErrorsExitTwoWithJson) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"slice", "--in", p("missing"), "--out", p("o")},
           {"slice", "--out", p("o")},
           {"nonsense"},
           {"slice", "--in", p(""), "--out", p("o"), "--set", "slicer.bogus=1"},
           {"slice", "--in", p(""), "--out", p("o"), "--set", "slicer.silence_db=\"loud\""},
           {"slice", "--in", p(""), "--out", p("o"), "--threads", "x"},
           {"convert", "--in", p("x.wav"), "--out", p("o"), "--checkpoint", p("none.ckpt")},
       }) {
    const CliResult r = cli(args);
    EXPECT_EQ(r.code, 2) << args[0];
    const json j = json::parse(r.err);
    EXPECT_EQ(j.at("error").at("exit_code"), 2);
    EXPECT_FALSE(j.at("error").at("message").get<std::string>().empty());
  }
}

TEST_F(CliTest, ConfigFileRejectsUnknownKeysAndFlagsWin) {
  std::ofstream(dir / "bad.json") << R"({"slicer": {"silence_db": -30, "typo": 1}})";
  EXPECT_EQ(cli({"slice", "--in", p(""), "--out", p("o"), "--config", p("bad.json")}).code, 2);
  std::ofstream(dir / "bad2.json") << R"({"nosection": {}})";
  EXPECT_EQ(cli({"slice", "--in", p(""), "--out", p("o"), "--config", p("bad2.json")}).code, 2);

  std::ofstream(dir / "good.json") << R"({"run": {"seed": 7, "threads": 2}, "slicer": {"silence_db": -30}})";
  const CliResult r =
      cli({"slice", "--in", p(""), "--out", p("o"), "--config", p("good.json"), "--seed", "9", "--set",
           "slicer.min_silence=0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json run = read_json(dir / "o" / "run.json");
  EXPECT_EQ(run.at("config").at("run").at("seed"), 9);
  EXPECT_EQ(run.at("config").at("run").at("threads"), 2);
  EXPECT_EQ(run.at("config").at("slicer").at("silence_db"), -30.0);
  EXPECT_EQ(run.at("config").at("slicer").at("min_silence"), 0.5);
  EXPECT_EQ(run.at("reproducibility").at("seed"), 9);
  EXPECT_EQ(run.at("reproducibility").at("config_hash").get<std::string>().size(), 64u);
  EXPECT_TRUE(run.at("reproducibility").at("versions").contains("svcdiff"));
}

TEST(CliConfig, HashDependsOnValuesOnly) {
  cli::RunConfig a, b;
  EXPECT_EQ(a.hash(), b.hash());
  a.set("sampler.kappa", 0);
  EXPECT_EQ(a.hash(), b.hash());  // 0 and 0.0 canonicalise alike
  a.set("sampler.steps", 32);
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CliCsv, QuotingRoundTrip) {
  const fs::path path = fs::temp_directory_path() / "svcdiff_csv_test.csv";
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", ""};
  {
    std::ofstream out(path);
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << cli::csv_field(fields[i]);
    out << "\nx,y,z,w\n";
  }
  const auto rows = cli::read_csv(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], fields);
  fs::remove(path);
}

// ---- slice ----

TEST_F(CliTest, SliceEmptyDirectory) {
  fs::create_directories(dir / "empty");
  const CliResult r = cli({"slice", "--in", p("empty"), "--out", p("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(dir / "o" / "manifest.csv"), std::vector<std::string>{"source,start_sec,end_sec,path"});
}

TEST_F(CliTest, SliceSilentFiles) {
  fs::create_directories(dir / "in");
  write_wav(dir / "in" / "a.wav", testing::silence(2.0, 16000));
  write_wav(dir / "in" / "b.wav", testing::silence(1.0, 16000), WavEncoding::kPcm16);
  ASSERT_EQ(cli({"slice", "--in", p("in"), "--out", p("o")}).code, 0);
  EXPECT_EQ(lines_of(dir / "o" / "manifest.csv").size(), 1u);
}

TEST_F(CliTest, SliceTwoSegments) {
  fs::create_directories(dir / "in");
  const int rate = 16000;
  write_wav(dir / "in" / "song.wav", testing::concat({testing::sine(220.0, 10.0, rate), testing::silence(2.0, rate),
                                                      testing::sine(330.0, 10.0, rate)}));
  ASSERT_EQ(cli({"slice", "--in", p("in"), "--out", p("o")}).code, 0);
  const auto rows = cli::read_csv(dir / "o" / "manifest.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "song.wav");
  EXPECT_NEAR(std::stod(rows[2][1]), 12.0, 0.02);
  const AudioClip seg = read_wav(dir / "o" / rows[2][3]);
  EXPECT_NEAR(seg.seconds(), 10.0, 0.02);
}

TEST_F(CliTest, SliceKeepsPartialProgress) {
  fs::create_directories(dir / "in");
  write_wav(dir / "in" / "good.wav", testing::sine(220.0, 2.0, 16000));
  std::ofstream(dir / "in" / "broken.wav") << "not audio";
  const CliResult r = cli({"slice", "--in", p("in"), "--out", p("o")});
  EXPECT_EQ(r.code, 2);
  const json e = json::parse(r.err);
  ASSERT_EQ(e.at("error").at("failed").size(), 1u);
  EXPECT_NE(e.at("error").at("failed")[0].get<std::string>().find("broken.wav"), std::string::npos);
  EXPECT_EQ(lines_of(dir / "o" / "manifest.csv").size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "o" / "run.json"));
}

// ---- featurize ----

TEST_F(CliTest, FeaturizeEmptyManifest) {
  std::ofstream(dir / "m.csv") << "source,start_sec,end_sec,path\n";
  ASSERT_EQ(cli({"featurize", "--manifest", p("m.csv"), "--out", p("f")}).code, 0);
  EXPECT_EQ(lines_of(dir / "f" / "features.csv"), std::vector<std::string>{"id,frames,mel,f0,cond"});
}

TEST_F(CliTest, FeaturizeAlignmentHeadersAndDeterminism) {
  const fs::path feat = prepare_features();
  const auto rows = cli::read_csv(feat / "features.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto frames = static_cast<std::uint32_t>(std::stoul(rows[i][1]));
    const TensorHeader mel = read_tensor_header(feat / rows[i][2]);
    const TensorHeader f0 = read_tensor_header(feat / rows[i][3]);
    const TensorHeader cond = read_tensor_header(feat / rows[i][4]);
    EXPECT_EQ(mel.dims[0], frames);
    EXPECT_EQ(f0.dims[0], frames);
    EXPECT_EQ(cond.dims[0], frames);
    EXPECT_EQ(mel.dims[1], 80u);
    EXPECT_EQ(f0.dims[1], 2u);
    EXPECT_EQ(cond.dims[1], 256u);
    // The segment at 40 kHz sets the frame count.
    const AudioClip seg = resample(read_wav(dir / "sliced" / "segments" / (rows[i][0] + ".wav")));
    EXPECT_EQ(static_cast<Eigen::Index>(frames), frame_count(seg.samples.size()));
    // Header round trip: payload matches what the library computes.
    const Tensor want = mel_spectrogram(normalize(seg)).frames;
    const Tensor got = read_tensor(feat / rows[i][2]).as_matrix();
    EXPECT_LT((want.cast<float>().cast<double>() - got).cwiseAbs().maxCoeff(), 1e-12);
  }

  // A fresh run with more threads writes identical bytes.
  ASSERT_EQ(cli({"featurize", "--manifest", p("sliced/manifest.csv"), "--out", p("feat2"), "--threads", "3"}).code, 0);
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (int c = 2; c <= 4; ++c) EXPECT_EQ(slurp(feat / rows[i][c]), slurp(dir / "feat2" / rows[i][c]));
}

TEST_F(CliTest, FeaturizeSkipsUpToDateOutputs) {
  const fs::path feat = prepare_features(2);
  const auto rows = cli::read_csv(feat / "features.csv");
  const auto stamp = fs::last_write_time(feat / rows[1][2]);
  const std::string index = slurp(feat / "features.csv");
  const std::string run = slurp(feat / "run.json");
  ASSERT_EQ(cli({"featurize", "--manifest", p("sliced/manifest.csv"), "--out", p("feat")}).code, 0);
  EXPECT_EQ(fs::last_write_time(feat / rows[1][2]), stamp);
  EXPECT_EQ(slurp(feat / "features.csv"), index);
  EXPECT_EQ(slurp(feat / "run.json"), run);
  EXPECT_EQ(read_json(feat / "featurize_status.json").at("skipped_up_to_date"), 2);
}

TEST_F(CliTest, FeaturizeReportsFailedSegments) {
  fs::create_directories(dir / "seg");
  write_wav(dir / "seg" / "ok.wav", testing::sine(200.0, 0.5, 16000));
  write_wav(dir / "seg" / "tiny.wav", AudioClip{std::vector<double>(50, 0.1), 16000});
  std::ofstream(dir / "m.csv") << "source,start_sec,end_sec,path\nx,0,1,seg/ok.wav\nx,1,2,seg/tiny.wav\n";
  const CliResult r = cli({"featurize", "--manifest", p("m.csv"), "--out", p("f")});
  EXPECT_EQ(r.code, 2);
  const json e = json::parse(r.err);
  ASSERT_EQ(e.at("error").at("failed").size(), 1u);
  EXPECT_NE(e.at("error").at("failed")[0].get<std::string>().find("tiny"), std::string::npos);
  EXPECT_EQ(lines_of(dir / "f" / "features.csv").size(), 2u);
}

// ---- train / distill / slim ----

TEST_F(CliTest, TrainIsReproducible) {
  const fs::path feat = prepare_features(2);
  const std::vector<std::string> common{"--features", feat.string(),          "--set", "denoiser.widths=[16,16]",
                                        "--set",      "train.iterations=6",   "--set", "train.crop_frames=16",
                                        "--set",      "denoiser.time_embed=4", "--seed", "3"};
  auto a = common, b = common;
  a.insert(a.begin(), {"train", "--out", p("t1")});
  b.insert(b.begin(), {"train", "--out", p("t2")});
  ASSERT_EQ(cli(a).code, 0);
  ASSERT_EQ(cli(b).code, 0);
  EXPECT_EQ(slurp(dir / "t1" / "denoiser.ckpt"), slurp(dir / "t2" / "denoiser.ckpt"));
  EXPECT_EQ(slurp(dir / "t1" / "losses.jsonl"), slurp(dir / "t2" / "losses.jsonl"));
  EXPECT_EQ(lines_of(dir / "t1" / "losses.jsonl").size(), 6u);
  const DenoiserParams net = load_checkpoint(dir / "t1" / "denoiser.ckpt");
  EXPECT_EQ(net.hidden(), 16);
  const json r1 = read_json(dir / "t1" / "run.json"), r2 = read_json(dir / "t2" / "run.json");
  EXPECT_EQ(r1.at("reproducibility"), r2.at("reproducibility"));
}

TEST_F(CliTest, DistillHalvingsThreeWritesThreeCheckpoints) {
  const fs::path feat = prepare_features(2);
  ASSERT_EQ(cli({"train", "--out", p("t"), "--features", feat.string(), "--set", "denoiser.widths=[8,8]", "--set",
                 "denoiser.time_embed=4", "--set", "train.iterations=2", "--set", "train.crop_frames=8"})
                .code,
            0);
  const CliResult r = cli({"distill", "--out", p("d"), "--features", feat.string(), "--checkpoint", p("t/denoiser.ckpt"),
                           "--halvings", "3", "--set", "distill.start_steps=16", "--set", "distill.steps_per_stage=2",
                           "--set", "distill.crop_frames=8", "--set", "distill.eval_every=2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> ckpts;
  for (const auto& e : fs::directory_iterator(dir / "d"))
    if (e.path().extension() == ".ckpt") ckpts.push_back(e.path().filename().string());
  std::sort(ckpts.begin(), ckpts.end());
  EXPECT_EQ(ckpts, (std::vector<std::string>{"stage1_8steps.ckpt", "stage2_4steps.ckpt", "stage3_2steps.ckpt"}));
  const auto stages = lines_of(dir / "d" / "stages.jsonl");
  ASSERT_EQ(stages.size(), 3u);
  // eval_every = 2 scores only the second stage.
  EXPECT_TRUE(json::parse(stages[0]).at("quality").is_null());
  EXPECT_TRUE(json::parse(stages[1]).at("quality").is_number());
  EXPECT_TRUE(json::parse(stages[2]).at("quality").is_null());
  EXPECT_EQ(json::parse(stages[2]).at("student_steps"), 2);

  EXPECT_EQ(cli({"distill", "--out", p("d2"), "--features", feat.string(), "--checkpoint", p("t/denoiser.ckpt"),
                 "--halvings", "5", "--set", "distill.start_steps=16"})
                .code,
            2);
}

TEST_F(CliTest, SlimRequiresTargetAndRejectsImpossibleOnes) {
  const fs::path feat = prepare_features(2);
  ASSERT_EQ(cli({"train", "--out", p("t"), "--features", feat.string(), "--set", "denoiser.widths=[8,8]", "--set",
                 "denoiser.time_embed=4", "--set", "train.iterations=1"})
                .code,
            0);
  EXPECT_EQ(cli({"slim", "--out", p("s"), "--features", feat.string(), "--checkpoint", p("t/denoiser.ckpt")}).code, 2);
  EXPECT_EQ(cli({"slim", "--out", p("s"), "--features", feat.string(), "--checkpoint", p("t/denoiser.ckpt"),
                 "--latency-target", "0.001", "--set", "slim.latency_reps=5"})
                .code,
            2);
}

// ---- convert / bench ----

TEST_F(CliTest, ConvertPointMassOneStepMatchesLibrary) {
  const fs::path ckpt = point_mass_checkpoint(-0.75);
  const AudioClip input = testing::sine(300.0, 0.4, 16000);
  write_wav(dir / "in.wav", input);
  const CliResult r = cli({"convert", "--in", p("in.wav"), "--out", p("c"), "--checkpoint", ckpt.string(), "--steps",
                           "1", "--seed", "4", "--set", "convert.griffin_lim_iters=5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const AudioClip got = read_wav(dir / "c" / "converted.wav");

  // The sampler's trivial case: one step lands on the point mass, so the
  // output is Griffin-Lim of the denormalised constant mel.
  const AudioClip in40 = resample(read_wav(dir / "in.wav"));
  MelSpectrogram mel;
  mel.frames = MelNormalizer{}.denormalize(Tensor::Constant(frame_count(in40.samples.size()), kMelBands, -0.75));
  const AudioClip want = griffin_lim(mel, 5, 4, 1).clip;
  ASSERT_EQ(got.samples.size(), want.samples.size());
  for (std::size_t i = 0; i < want.samples.size(); ++i)
    ASSERT_EQ(got.samples[i], static_cast<float>(want.samples[i])) << i;
  EXPECT_LE(std::abs(got.seconds() - input.seconds()), 128.0 / kModelRate);
  EXPECT_TRUE(fs::exists(dir / "c" / "report.json"));
}

TEST_F(CliTest, BenchEmitsOneRecordPerStepCount) {
  const fs::path ckpt = point_mass_checkpoint(0.0);
  write_wav(dir / "in.wav", testing::sine(300.0, 0.3));
  const CliResult r = cli({"bench", "--in", p("in.wav"), "--out", p("b"), "--checkpoint", ckpt.string(), "--steps",
                           "8,64", "--plot", "--set", "bench.repetitions=1", "--set", "convert.griffin_lim_iters=1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(dir / "b" / "bench.jsonl");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(json::parse(lines[0]).at("steps"), 8);
  EXPECT_EQ(json::parse(lines[1]).at("steps"), 64);
  EXPECT_TRUE(fs::exists(dir / "b" / "bench.svg"));
  EXPECT_EQ(lines_of(dir / "b" / "bench.csv").size(), 3u);

  EXPECT_EQ(cli({"bench", "--in", p("in.wav"), "--out", p("b2"), "--checkpoint", ckpt.string(), "--threads-list", "2"})
                .code,
            2);
}

}  // namespace
}  // namespace svcdiff
