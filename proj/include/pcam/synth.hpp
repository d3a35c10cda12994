#pragma once

// Deterministic synthetic test signals.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "pcam/audio_io.hpp"

namespace pcam::synth {

/// a * sin(2 pi freq t + phase)
inline Waveform sine(double freq_hz, double seconds, std::uint32_t rate, double amplitude = 1.0, double phase = 0.0) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * double(i) / rate + phase);
  return w;
}

/// Three partials at 440 Hz scaled by 1, sqrt(2) and pi, so no two periods
/// share a common multiple.
inline Waveform incommensurate_triad(std::size_t n_samples, std::uint32_t rate) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n_samples);
  const double base = 440.0, two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = double(i) / rate;
    w.samples[i] = 0.3 * std::sin(two_pi * base * t) + 0.2 * std::sin(two_pi * base * std::numbers::sqrt2 * t + 1.0) +
                   0.1 * std::sin(two_pi * base * std::numbers::pi * t + 2.0);
  }
  return w;
}

/// A tonal clip: three partials with log-uniform frequencies in 80-2000 Hz,
/// each under its own slow amplitude envelope, plus a faint noise floor.
/// Peak amplitude stays below 1.
inline Waveform tonal_clip(std::uint64_t seed, double seconds = 4.0, std::uint32_t rate = 16000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  struct Partial {
    double freq, amp, phase, env_rate, env_phase;
  };
  Partial partials[3];
  for (auto& p : partials) {
    p.freq = 80.0 * std::pow(2000.0 / 80.0, unit(rng));
    p.amp = 0.08 + 0.17 * unit(rng);
    p.phase = 2.0 * std::numbers::pi * unit(rng);
    p.env_rate = 0.5 + 2.5 * unit(rng);
    p.env_phase = 2.0 * std::numbers::pi * unit(rng);
  }
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.resize(n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    double s = 0.0;
    for (const auto& p : partials)
      s += p.amp * (0.6 + 0.4 * std::sin(two_pi * p.env_rate * t + p.env_phase)) * std::sin(two_pi * p.freq * t + p.phase);
    w.samples[i] = s + 0.002 * noise(rng);
  }
  return w;
}

}  // namespace pcam::synth
