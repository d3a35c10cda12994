#include <gtest/gtest.h>

#include "pcam/config.hpp"

using namespace pcam;

TEST(Config, DefaultsDescribeFullScaleRun) {
  const ExperimentConfig c;
  EXPECT_EQ(c.hidden_dim, 1600u);
  EXPECT_EQ(c.segment_ms, 200.0);
  EXPECT_EQ(c.max_segments, 20u);
  EXPECT_EQ(c.target_rate, 16000u);
  EXPECT_EQ(c.write.epochs, 100u);
  EXPECT_EQ(c.write.n1_iters, 100u);
  EXPECT_EQ(c.write.eta_w, 1e-4);
  EXPECT_EQ(c.read.n2_iters, 500u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, TextRoundTrip) {
  ExperimentConfig c;
  EXPECT_EQ(parse_config(to_text(c)), c);

  c.input = "/data/clips";
  c.write.eta_w = 3.3e-5;
  c.write.weight_init_std = 0.125;
  c.write.cue_init = CueInit::zeros;
  c.read.eta_x = 0.2;
  c.read.kernel = Kernel::direct;
  c.modes = {ReadMode::closed_loop};
  c.hidden_activation = Activation::relu;
  c.recalled_encoding = WavEncoding::pcm16;
  c.record_wall_time = true;
  c.seed = 18446744073709551615ULL;
  const ExperimentConfig back = parse_config(to_text(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_text(back), to_text(c));
}

TEST(Config, CommentsBlankLinesAndWhitespace) {
  const ExperimentConfig c = parse_config("# header\n\n  hidden_dim =  64   # small\nmodes = open\n");
  EXPECT_EQ(c.hidden_dim, 64u);
  EXPECT_EQ(c.modes, std::vector<ReadMode>{ReadMode::open_loop});
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_config("hidden_dim = 8\nbogus_key = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
  }
  EXPECT_THROW(parse_config("hidden_dim 8\n"), ConfigError);
  EXPECT_THROW(parse_config("hidden_dim = eight\n"), ConfigError);
  EXPECT_THROW(parse_config("hidden_dim = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("normalize_peak = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("modes = sideways\n"), ConfigError);
}

TEST(Config, ValidateRejectsOutOfRangeValues) {
  for (const char* text : {"write.epochs = 0", "max_segments = 0", "hidden_dim = 0", "segment_ms = 0",
                           "write.eta_w = 0", "read.eta_x = -1", "jobs = 0", "read.prime_segments = 21"}) {
    EXPECT_THROW(parse_config(text).validate(), ConfigError) << text;
  }
}

TEST(Config, HashIsStableAndSensitive) {
  ExperimentConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.output_dir = "elsewhere";
  b.jobs = 8;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.write.epochs = 99;
  EXPECT_NE(config_hash(a), config_hash(b));
}
