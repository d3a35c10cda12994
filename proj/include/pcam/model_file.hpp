#pragma once

// Binary model file:
//
//   "PCAM" | version u32 | H u64 | l u64 | f u8 | h u8 | seed u64 |
//   W_H (H*H f64) | W_out (l*H f64) | cue (H f64)
//
// Little-endian throughout, matrices row-major, no padding or compression.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pcam/errors.hpp"
#include "pcam/model.hpp"

namespace pcam {

inline constexpr char kModelMagic[4] = {'P', 'C', 'A', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 4 + 4 + 8 + 8 + 1 + 1 + 8;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get_le(const unsigned char* p) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace detail

inline std::vector<unsigned char> serialize_model(const MemoryModel& m) {
  m.validate();
  const std::uint64_t H = m.hidden_dim(), L = m.segment_len();
  std::vector<unsigned char> out;
  out.reserve(kModelHeaderBytes + 8 * (H * H + L * H + H));
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  detail::put_le<std::uint32_t>(out, kModelFormatVersion);
  detail::put_le<std::uint64_t>(out, H);
  detail::put_le<std::uint64_t>(out, L);
  out.push_back(static_cast<unsigned char>(m.output_activation));
  out.push_back(static_cast<unsigned char>(m.hidden_activation));
  detail::put_le<std::uint64_t>(out, m.seed);
  for (Eigen::Index i = 0; i < m.w_hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_hidden.cols(); ++j) detail::put_le<double>(out, m.w_hidden(i, j));
  for (Eigen::Index i = 0; i < m.w_out.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_out.cols(); ++j) detail::put_le<double>(out, m.w_out(i, j));
  for (Eigen::Index i = 0; i < m.cue.size(); ++i) detail::put_le<double>(out, m.cue(i));
  return out;
}

inline MemoryModel deserialize_model(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kModelHeaderBytes) throw FormatError("model file shorter than its header");
  const unsigned char* p = bytes.data();
  if (std::memcmp(p, kModelMagic, 4) != 0) throw FormatError("bad magic: not a PCAM model file");
  const auto version = detail::get_le<std::uint32_t>(p + 4);
  if (version != kModelFormatVersion)
    throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  const auto H = detail::get_le<std::uint64_t>(p + 8);
  const auto L = detail::get_le<std::uint64_t>(p + 16);
  const std::uint8_t f_code = p[24], h_code = p[25];
  const auto seed = detail::get_le<std::uint64_t>(p + 26);
  if (H == 0 || L == 0) throw FormatError("model dimensions must be nonzero");
  if (!is_valid_activation_code(f_code) || !is_valid_activation_code(h_code))
    throw FormatError("unknown activation code in model header");
  // Guard the multiplication below against absurd headers.
  if (H > (1u << 20) || L > (1u << 24)) throw FormatError("model dimensions out of range");

  const std::uint64_t values = H * H + L * H + H;
  const std::uint64_t expected = kModelHeaderBytes + 8 * values;
  if (bytes.size() != expected)
    throw FormatError("model payload size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));

  MemoryModel m;
  m.output_activation = static_cast<Activation>(f_code);
  m.hidden_activation = static_cast<Activation>(h_code);
  m.seed = seed;
  m.w_hidden.resize(Eigen::Index(H), Eigen::Index(H));
  m.w_out.resize(Eigen::Index(L), Eigen::Index(H));
  m.cue.resize(Eigen::Index(H));
  const unsigned char* q = p + kModelHeaderBytes;
  for (Eigen::Index i = 0; i < m.w_hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_hidden.cols(); ++j, q += 8) m.w_hidden(i, j) = detail::get_le<double>(q);
  for (Eigen::Index i = 0; i < m.w_out.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_out.cols(); ++j, q += 8) m.w_out(i, j) = detail::get_le<double>(q);
  for (Eigen::Index i = 0; i < m.cue.size(); ++i, q += 8) m.cue(i) = detail::get_le<double>(q);
  return m;
}

inline void save_model(const MemoryModel& m, const std::filesystem::path& path) {
  const auto bytes = serialize_model(m);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline MemoryModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace pcam
