#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "pcam/experiment.hpp"
#include "pcam/synth.hpp"
#include "test_support.hpp"

using namespace pcam;
using testing_support::TempDir;

namespace {

// Small enough that a clip takes milliseconds.
ExperimentConfig small_config(const TempDir& dir) {
  ExperimentConfig c;
  c.input = dir / "clips";
  c.output_dir = dir / "out";
  c.target_rate = 8000;
  c.segment_ms = 4.0;  // 32 samples
  c.max_segments = 4;
  c.hidden_dim = 16;
  c.write.epochs = 3;
  c.write.n1_iters = 10;
  c.read.n2_iters = 20;
  return c;
}

void make_corpus(const TempDir& dir, int n) {
  std::filesystem::create_directories(dir / "clips");
  for (int i = 0; i < n; ++i)
    save_wav(synth::tonal_clip(std::uint64_t(i + 1), 0.05, 16000),
             dir / "clips" / ("clip" + std::to_string(i) + ".wav"));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Experiment, TenClipsTwoModes) {
  TempDir dir("exp");
  make_corpus(dir, 10);
  const ExperimentConfig cfg = small_config(dir);
  const auto records = run_experiment(cfg);
  ASSERT_EQ(records.size(), 20u);
  for (const auto& r : records) EXPECT_TRUE(r.ok()) << r.status;
  EXPECT_EQ(records[0].clip_id, "clip0");
  EXPECT_EQ(records[0].mode, ReadMode::open_loop);
  EXPECT_EQ(records[1].mode, ReadMode::closed_loop);

  const std::string csv = slurp(cfg.output_dir / "results.csv");
  EXPECT_EQ(count_lines(csv), 21u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kResultsCsvHeader);
  std::size_t wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(cfg.output_dir))
    if (e.path().extension() == ".wav") ++wavs;
  EXPECT_EQ(wavs, 20u);

  const std::string pairs = slurp(cfg.output_dir / "pairs.csv");
  EXPECT_EQ(count_lines(pairs), 21u);
  EXPECT_EQ(pairs.substr(0, pairs.find('\n')), kPairsCsvHeader);
  EXPECT_NE(pairs.find("clip3,closed_loop," + (dir / "clips" / "clip3.wav").string() + "," +
                       (cfg.output_dir / "clip3.closed_loop.recalled.wav").string() + "\n"),
            std::string::npos);

  const auto summary = nlohmann::json::parse(slurp(cfg.output_dir / "summary.json"));
  EXPECT_EQ(summary["n_clips"], 10);
  EXPECT_EQ(summary["closed_vs_open"]["n_pairs"], 10);
}

TEST(Experiment, RecalledWavMatchesReportedCosine) {
  TempDir dir("exp");
  make_corpus(dir, 1);
  const ExperimentConfig cfg = small_config(dir);
  const auto records = run_experiment(cfg);
  const SegmentedSequence seq = prepare_clip(dir / "clips" / "clip0.wav", cfg);
  const Waveform rec = load_wav(cfg.output_dir / "clip0.closed_loop.recalled.wav");
  const Waveform orig = reassemble(seq);
  ASSERT_EQ(rec.size(), orig.size());
  EXPECT_NEAR(cosine_sim(orig.samples, rec.samples), records[1].clip_cosine, 1e-6);
}

TEST(Experiment, RepeatedRunsAreByteIdentical) {
  TempDir dir("exp");
  make_corpus(dir, 3);
  ExperimentConfig a = small_config(dir), b = a;
  a.save_models = b.save_models = true;
  b.output_dir = dir / "out2";
  b.jobs = 3;
  run_experiment(a);
  run_experiment(b);
  EXPECT_EQ(slurp(a.output_dir / "results.csv"), slurp(b.output_dir / "results.csv"));
  EXPECT_EQ(slurp(a.output_dir / "summary.json"), slurp(b.output_dir / "summary.json"));
  for (const char* f : {"clip0.model.pcam", "clip2.model.pcam", "clip1.closed_loop.recalled.wav"})
    EXPECT_EQ(testing_support::read_bytes(a.output_dir / f), testing_support::read_bytes(b.output_dir / f)) << f;
}

TEST(Experiment, MalformedClipBecomesErrorRows) {
  TempDir dir("exp");
  make_corpus(dir, 2);
  testing_support::write_bytes(dir / "clips" / "broken.wav", {'R', 'I', 'F', 'F', 0, 0});
  const ExperimentConfig cfg = small_config(dir);
  const auto records = run_experiment(cfg);
  ASSERT_EQ(records.size(), 6u);
  std::size_t errors = 0;
  for (const auto& r : records) {
    if (r.clip_id == "broken") {
      EXPECT_FALSE(r.ok());
      ++errors;
    } else {
      EXPECT_TRUE(r.ok());
    }
  }
  EXPECT_EQ(errors, 2u);
  EXPECT_EQ(count_lines(slurp(cfg.output_dir / "pairs.csv")), 5u);  // broken clip has no recall
  const std::string csv = slurp(cfg.output_dir / "results.csv");
  EXPECT_NE(csv.find("broken,open_loop,,,,,,,error: "), std::string::npos) << csv;
}

TEST(Experiment, WallTimeColumnOnlyWhenRequested) {
  TempDir dir("exp");
  make_corpus(dir, 1);
  ExperimentConfig cfg = small_config(dir);
  run_experiment(cfg);
  std::string csv = slurp(cfg.output_dir / "results.csv");
  std::string row = csv.substr(csv.find('\n') + 1);
  EXPECT_NE(row.find(",,ok"), std::string::npos);
  cfg.record_wall_time = true;
  run_experiment(cfg);
  csv = slurp(cfg.output_dir / "results.csv");
  row = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(row.find(",,ok"), std::string::npos);
}

TEST(Experiment, MissingInputIsAnError) {
  TempDir dir("exp");
  ExperimentConfig cfg = small_config(dir);
  EXPECT_THROW(run_experiment(cfg), IoError);
}

TEST(Sweep, SingleValueMatchesPlainRun) {
  TempDir dir("exp");
  make_corpus(dir, 2);
  ExperimentConfig cfg = small_config(dir);
  const auto plain = run_experiment(cfg);
  cfg.output_dir = dir / "sweep";
  const auto blocks = sweep(cfg, SweepAxis::hidden_dim, {16});
  ASSERT_EQ(blocks.size(), 1u);
  EXPECT_EQ(slurp(dir / "out" / "results.csv"), slurp(dir / "sweep" / "hidden_dim-16" / "results.csv"));
  const std::string s = slurp(dir / "sweep" / "sweep.csv");
  EXPECT_EQ(count_lines(s), 1u + plain.size());
  EXPECT_EQ(s.rfind("axis,value,clip_id", 0), 0u);
}

TEST(Sweep, HiddenDimBlocks) {
  TempDir dir("exp");
  make_corpus(dir, 1);
  ExperimentConfig cfg = small_config(dir);
  const auto blocks = sweep(cfg, SweepAxis::hidden_dim, {64, 256, 1024});
  ASSERT_EQ(blocks.size(), 3u);
  for (const auto& b : blocks) {
    ASSERT_EQ(b.records.size(), 2u);
    for (const auto& r : b.records) EXPECT_TRUE(r.ok()) << r.status;
  }
  EXPECT_EQ(count_lines(slurp(cfg.output_dir / "sweep.csv")), 7u);
}

TEST(Sweep, InvalidValueFailsBeforeAnyRun) {
  TempDir dir("exp");
  make_corpus(dir, 1);
  ExperimentConfig cfg = small_config(dir);
  EXPECT_THROW(sweep(cfg, SweepAxis::hidden_dim, {16, 0}), ConfigError);
  EXPECT_THROW(sweep(cfg, SweepAxis::max_segments, {2.5}), ConfigError);
  EXPECT_THROW(sweep(cfg, SweepAxis::n2_iters, {}), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(cfg.output_dir));
  EXPECT_THROW(parse_sweep_axis("epochs_per_day"), ConfigError);
}
