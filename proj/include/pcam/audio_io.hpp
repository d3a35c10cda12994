#pragma once

// Waveform containers, WAV (RIFF) reading and writing, band-limited
// resampling, and fixed-length segmentation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcam/errors.hpp"

namespace pcam {

/// Mono audio signal, amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return sample_rate ? double(samples.size()) / sample_rate : 0.0; }

  /// Throws if the rate is zero or any sample is NaN/Inf.
  void validate() const {
    if (sample_rate == 0) throw ConfigError("waveform sample_rate must be > 0");
    for (double s : samples)
      if (!std::isfinite(s)) throw ConfigError("waveform contains a non-finite sample");
  }

  bool operator==(const Waveform&) const = default;
};

/// Row-major T x l matrix: one audio segment per row.
using SegmentMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SegmentedSequence {
  SegmentMatrix segments;
  std::size_t segment_len = 0;  // l, samples
  std::uint32_t sample_rate = 0;
  std::size_t original_len = 0;  // samples before zero padding

  std::size_t count() const { return std::size_t(segments.rows()); }
};

enum class WavEncoding { pcm16, float32 };

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }
inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back(v >> 8);
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}
inline void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

/// Reads a PCM16 or IEEE float32 WAV. Multichannel input is averaged to mono
/// and integer samples are scaled by 1/32768.
inline Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("'" + path.string() + "' is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::size_t size = detail::read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("truncated fmt chunk in '" + path.string() + "'");
      const unsigned char* f = bytes.data() + body;
      format = detail::read_u16(f);
      channels = detail::read_u16(f + 2);
      rate = detail::read_u32(f + 4);
      bits = detail::read_u16(f + 14);
      if (format == detail::kFormatExtensible) {
        if (avail < 26) throw FormatError("truncated extensible fmt chunk in '" + path.string() + "'");
        format = detail::read_u16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;  // tolerate a truncated final chunk
    }
    pos = body + size + (size & 1);
  }

  if (!have_fmt) throw FormatError("missing fmt chunk in '" + path.string() + "'");
  if (!data) throw FormatError("missing data chunk in '" + path.string() + "'");
  if (channels == 0 || rate == 0) throw FormatError("invalid channel count or sample rate in '" + path.string() + "'");

  const bool pcm16 = format == detail::kFormatPcm && bits == 16;
  const bool f32 = format == detail::kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits) in '" + path.string() + "'");

  const std::size_t frame_bytes = std::size_t(channels) * (bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw FormatError("'" + path.string() + "' contains no audio");

  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* frame = data + i * frame_bytes;
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      if (pcm16) {
        auto v = static_cast<std::int16_t>(detail::read_u16(frame + 2 * c));
        acc += double(v) / 32768.0;
      } else {
        std::uint32_t u = detail::read_u32(frame + 4 * c);
        float v;
        std::memcpy(&v, &u, sizeof v);
        acc += double(v);
      }
    }
    w.samples[i] = channels == 1 ? acc : acc / channels;
  }
  for (double s : w.samples)
    if (!std::isfinite(s)) throw FormatError("'" + path.string() + "' contains non-finite samples");
  return w;
}

/// Writes a mono WAV. pcm16 clamps to [-1, 1] and quantizes with a 32768
/// scale so that load_wav/save_wav round trips reproduce the payload.
inline void save_wav(const Waveform& w, const std::filesystem::path& path,
                     WavEncoding encoding = WavEncoding::pcm16) {
  w.validate();
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * block);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  detail::put_tag(out, "RIFF");
  detail::put_u32(out, 36 + data_size);
  detail::put_tag(out, "WAVE");
  detail::put_tag(out, "fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, encoding == WavEncoding::pcm16 ? detail::kFormatPcm : detail::kFormatFloat);
  detail::put_u16(out, 1);
  detail::put_u32(out, w.sample_rate);
  detail::put_u32(out, w.sample_rate * block);
  detail::put_u16(out, block);
  detail::put_u16(out, bits);
  detail::put_tag(out, "data");
  detail::put_u32(out, data_size);
  for (double s : w.samples) {
    if (encoding == WavEncoding::pcm16) {
      double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
      detail::put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      detail::put_u32(out, u);
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

/// Resampler constants. The kernel is a Kaiser-windowed sinc with these fixed
/// parameters so that results are reproducible across builds.
struct ResamplerDesign {
  static constexpr int zero_crossings = 32;  // one-sided kernel length, in cutoff periods
  static constexpr double kaiser_beta = 8.0;
  static constexpr double rolloff = 0.95;  // passband edge as a fraction of the lower Nyquist
};

/// Band-limited resampling. Output length is round(len * target / source).
inline Waveform resample(const Waveform& w, std::uint32_t target_rate) {
  if (target_rate == 0) throw ConfigError("target_rate must be > 0");
  if (w.sample_rate == 0) throw ConfigError("waveform sample_rate must be > 0");
  if (target_rate == w.sample_rate) return w;

  const std::uint64_t len = w.samples.size();
  const std::uint64_t src = w.sample_rate;
  const std::uint64_t out_len = (2 * len * target_rate + src) / (2 * src);

  // Cutoff in cycles per input sample.
  const double ratio = double(target_rate) / double(src);
  const double cutoff = 0.5 * std::min(1.0, ratio) * ResamplerDesign::rolloff;
  const double half_width = ResamplerDesign::zero_crossings / (2.0 * cutoff);
  const double i0_beta = std::cyl_bessel_i(0.0, ResamplerDesign::kaiser_beta);

  auto kernel = [&](double d) {
    const double r = d / half_width;
    if (std::abs(r) >= 1.0) return 0.0;
    const double window = std::cyl_bessel_i(0.0, ResamplerDesign::kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
    const double x = 2.0 * cutoff * d;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    return 2.0 * cutoff * sinc * window;
  };

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.assign(out_len, 0.0);
  for (std::uint64_t n = 0; n < out_len; ++n) {
    const double t = double(n) * double(src) / double(target_rate);
    const auto first = static_cast<std::int64_t>(std::ceil(t - half_width));
    const auto last = static_cast<std::int64_t>(std::floor(t + half_width));
    double acc = 0.0;
    for (std::int64_t k = std::max<std::int64_t>(first, 0); k <= std::min<std::int64_t>(last, std::int64_t(len) - 1); ++k)
      acc += w.samples[std::size_t(k)] * kernel(t - double(k));
    out.samples[n] = acc;
  }
  return out;
}

/// Scales so that max |sample| == peak. All-zero input is returned unchanged.
inline Waveform peak_normalize(const Waveform& w, double peak = 1.0) {
  double m = 0.0;
  for (double s : w.samples) m = std::max(m, std::abs(s));
  Waveform out = w;
  if (m > 0.0)
    for (double& s : out.samples) s *= peak / m;
  return out;
}

inline std::size_t segment_length(double segment_ms, std::uint32_t sample_rate) {
  if (!(segment_ms > 0.0)) throw ConfigError("segment_ms must be > 0");
  auto l = static_cast<std::size_t>(std::llround(segment_ms * sample_rate / 1000.0));
  if (l == 0) throw ConfigError("segment_ms too short for the sample rate (zero-length segment)");
  return l;
}

/// Splits into l-sample segments, zero-padding the final partial segment.
/// With max_segments, only the first max_segments segments are kept.
inline SegmentedSequence segment(const Waveform& w, double segment_ms,
                                 std::optional<std::size_t> max_segments = std::nullopt) {
  if (w.samples.empty()) throw ConfigError("cannot segment an empty waveform");
  if (max_segments && *max_segments == 0) throw ConfigError("max_segments must be >= 1");
  const std::size_t l = segment_length(segment_ms, w.sample_rate);
  std::size_t t = (w.samples.size() + l - 1) / l;
  if (max_segments) t = std::min(t, *max_segments);

  SegmentedSequence s;
  s.segment_len = l;
  s.sample_rate = w.sample_rate;
  s.original_len = std::min(w.samples.size(), t * l);
  s.segments = SegmentMatrix::Zero(Eigen::Index(t), Eigen::Index(l));
  std::copy_n(w.samples.begin(), s.original_len, s.segments.data());
  return s;
}

/// Concatenates segments and drops the zero padding.
inline Waveform reassemble(const SegmentedSequence& s) {
  if (std::size_t(s.segments.cols()) != s.segment_len)
    throw DimensionError("segment matrix width does not match segment_len");
  if (s.original_len > std::size_t(s.segments.size()))
    throw DimensionError("original_len exceeds the segmented payload");
  Waveform w;
  w.sample_rate = s.sample_rate;
  w.samples.assign(s.segments.data(), s.segments.data() + s.original_len);
  return w;
}

}  // namespace pcam
