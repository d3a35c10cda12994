#include <cstring>

#include <gtest/gtest.h>

#include "pcam/model_file.hpp"
#include "test_support.hpp"

using namespace pcam;
using testing_support::TempDir;

namespace {
MemoryModel sample_model() {
  return init_model(5, 3, Activation::relu, Activation::identity, 0xfeedULL, WriteConfig{});
}
}  // namespace

TEST(ModelFile, RoundTripIsBitExact) {
  TempDir dir("model");
  const MemoryModel m = sample_model();
  save_model(m, dir / "m.pcam");
  EXPECT_EQ(load_model(dir / "m.pcam"), m);
}

TEST(ModelFile, LayoutIsLittleEndianRowMajor) {
  const MemoryModel m = sample_model();
  const auto bytes = serialize_model(m);
  ASSERT_EQ(bytes.size(), kModelHeaderBytes + 8u * (25 + 15 + 5));
  EXPECT_EQ(std::memcmp(bytes.data(), "PCAM", 4), 0);
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[8], 5);  // H
  EXPECT_EQ(bytes[16], 3);  // l
  EXPECT_EQ(bytes[24], 2);  // relu
  EXPECT_EQ(bytes[25], 1);  // identity
  EXPECT_EQ(bytes[26], 0xed);
  EXPECT_EQ(bytes[27], 0xfe);
  double v;
  std::memcpy(&v, bytes.data() + kModelHeaderBytes + 8, 8);
  EXPECT_EQ(v, m.w_hidden(0, 1));
  std::memcpy(&v, bytes.data() + kModelHeaderBytes + 8 * (25 + 5), 8);
  EXPECT_EQ(v, m.w_out(1, 0));
}

TEST(ModelFile, TruncatedFileIsRejected) {
  TempDir dir("model");
  auto bytes = serialize_model(sample_model());
  bytes.pop_back();
  testing_support::write_bytes(dir / "t.pcam", bytes);
  try {
    load_model(dir / "t.pcam");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("size mismatch"), std::string::npos);
  }
  bytes.resize(10);
  EXPECT_THROW(deserialize_model(bytes), FormatError);
}

TEST(ModelFile, BadMagicVersionAndCodes) {
  const auto good = serialize_model(sample_model());
  auto b = good;
  b[0] = 'X';
  EXPECT_THROW(deserialize_model(b), FormatError);
  b = good;
  b[4] = 2;
  try {
    deserialize_model(b);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  b = good;
  b[24] = 9;
  EXPECT_THROW(deserialize_model(b), FormatError);
}

TEST(ModelFile, MissingFileAndNonFiniteModel) {
  TempDir dir("model");
  EXPECT_THROW(load_model(dir / "nope.pcam"), IoError);
  MemoryModel m = sample_model();
  m.cue(0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(serialize_model(m), DivergenceError);
}
