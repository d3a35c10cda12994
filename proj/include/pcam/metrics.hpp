#pragma once

// Waveform fidelity between an original and a recalled signal.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <span>
#include <vector>

#include "pcam/audio_io.hpp"
#include "pcam/errors.hpp"
#include "pcam/memory.hpp"

namespace pcam {

namespace detail {
inline void require_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace detail

inline double segment_mse(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a, b);
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / double(a.size());
}

/// a.b / (|a||b|); 0 when either vector has zero norm.
inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a, b);
  const double na = std::sqrt(detail::dot(a, a));
  const double nb = std::sqrt(detail::dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(detail::dot(a, b) / (na * nb), -1.0, 1.0);
}

/// 10 log10(|ref|^2 / |ref - est|^2); +inf when the residual is exactly zero.
inline double snr_db(std::span<const double> reference, std::span<const double> estimate) {
  detail::require_same_length(reference, estimate);
  const double signal = detail::dot(reference, reference);
  if (signal == 0.0) throw ConfigError("snr_db: reference has zero energy");
  double noise = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - estimate[i];
    noise += d * d;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

struct XcorrPeak {
  double peak = 0.0;
  long lag = 0;
};

/// Normalized cross-correlation c(k) = sum_n r[n] e[n+k] / (|r||e|) over
/// k in [-max_lag, max_lag]. A positive lag means the estimate is delayed.
/// Ties go to the smaller |k|, then to the negative lag.
inline XcorrPeak xcorr_peak(std::span<const double> reference, std::span<const double> estimate,
                            std::size_t max_lag) {
  detail::require_same_length(reference, estimate);
  const std::size_t n = reference.size();
  if (n == 0 || max_lag >= n) throw ConfigError("xcorr_peak: max_lag must be < signal length");
  const double norm = std::sqrt(detail::dot(reference, reference) * detail::dot(estimate, estimate));
  if (norm == 0.0) return {0.0, 0};

  XcorrPeak best{-std::numeric_limits<double>::infinity(), 0};
  auto consider = [&](long k) {
    double s = 0.0;
    const long len = long(n);
    for (long i = std::max(0L, -k); i < std::min(len, len - k); ++i) s += reference[std::size_t(i)] * estimate[std::size_t(i + k)];
    const double c = std::clamp(s / norm, -1.0, 1.0);
    if (c > best.peak) best = {c, k};
  };
  // Visiting 0, -1, +1, -2, +2, ... with a strict comparison realizes the tie rule.
  consider(0);
  for (long k = 1; k <= long(max_lag); ++k) {
    consider(-k);
    consider(k);
  }
  return best;
}

struct SegmentFidelity {
  double mse = 0.0;
  double cosine = 0.0;
  double snr_db = 0.0;  // +inf: exact; -inf: silent reference, nonzero estimate
  double xcorr_peak = 0.0;
  long xcorr_lag = 0;
};

struct FidelityReport {
  std::vector<SegmentFidelity> per_segment;
  double clip_cosine = 0.0;
  double clip_snr_db = 0.0;
  std::size_t n_segments = 0;

  double mean_segment_cosine() const {
    double s = 0.0;
    for (const auto& p : per_segment) s += p.cosine;
    return per_segment.empty() ? 0.0 : s / double(per_segment.size());
  }
  double min_segment_cosine() const {
    double m = per_segment.empty() ? 0.0 : 1.0;
    for (const auto& p : per_segment) m = std::min(m, p.cosine);
    return m;
  }
  /// Lower median of the per-segment xcorr lags.
  long median_lag() const {
    if (per_segment.empty()) return 0;
    std::vector<long> lags;
    for (const auto& p : per_segment) lags.push_back(p.xcorr_lag);
    std::sort(lags.begin(), lags.end());
    return lags[(lags.size() - 1) / 2];
  }
};

/// SNR that tolerates a silent reference: 0 residual -> +inf, else -inf.
inline double snr_db_or_sentinel(std::span<const double> reference, std::span<const double> estimate) {
  if (detail::dot(reference, reference) == 0.0) {
    for (std::size_t i = 0; i < estimate.size(); ++i)
      if (estimate[i] != 0.0) return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::infinity();
  }
  return snr_db(reference, estimate);
}

inline std::size_t default_max_lag(std::uint32_t sample_rate, double max_lag_ms = 10.0) {
  return static_cast<std::size_t>(std::llround(max_lag_ms * sample_rate / 1000.0));
}

/// Per-segment metrics plus clip-level cosine and SNR over the reassembled
/// waveforms (padding excluded). max_lag is clamped to l - 1.
inline FidelityReport fidelity_report(const SegmentedSequence& original, const SegmentedSequence& recalled,
                                      std::size_t max_lag) {
  if (original.segments.rows() != recalled.segments.rows() || original.segments.cols() != recalled.segments.cols())
    throw DimensionError("fidelity_report: original is " + std::to_string(original.segments.rows()) + "x" +
                         std::to_string(original.segments.cols()) + ", recalled is " +
                         std::to_string(recalled.segments.rows()) + "x" + std::to_string(recalled.segments.cols()));
  const std::size_t l = std::size_t(original.segments.cols());
  const std::size_t lag = std::min(max_lag, l - 1);

  FidelityReport rep;
  rep.n_segments = original.count();
  for (std::size_t mu = 0; mu < original.count(); ++mu) {
    std::span<const double> a(original.segments.data() + mu * l, l);
    std::span<const double> b(recalled.segments.data() + mu * l, l);
    SegmentFidelity s;
    s.mse = segment_mse(a, b);
    s.cosine = cosine_sim(a, b);
    s.snr_db = snr_db_or_sentinel(a, b);
    const XcorrPeak x = xcorr_peak(a, b, lag);
    s.xcorr_peak = x.peak;
    s.xcorr_lag = x.lag;
    rep.per_segment.push_back(s);
  }
  const std::size_t n = std::min(original.original_len, std::size_t(original.segments.size()));
  std::span<const double> a(original.segments.data(), n);
  std::span<const double> b(recalled.segments.data(), n);
  rep.clip_cosine = cosine_sim(a, b);
  rep.clip_snr_db = snr_db_or_sentinel(a, b);
  return rep;
}

inline FidelityReport fidelity_report(const SegmentedSequence& original, const RecallResult& recalled,
                                      std::size_t max_lag) {
  return fidelity_report(original, as_sequence(recalled, original.sample_rate), max_lag);
}

}  // namespace pcam
