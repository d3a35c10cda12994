#pragma once

// The predictive-coding memory: two weight matrices and a stored cue, plus
// the per-segment energy and its gradient-descent updates.
//
//   F = |x - W_out f(h)|^2 + |h - g(W_H h_prev)|^2
//
// f is the output nonlinearity, g the hidden-transition nonlinearity.
// The updates below step along -dF/d(.) / 2.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "pcam/activation.hpp"
#include "pcam/errors.hpp"

namespace pcam {

using HiddenState = Eigen::VectorXd;

enum class CueInit { zeros, gaussian };

inline std::string_view to_string(CueInit c) { return c == CueInit::zeros ? "zeros" : "gaussian"; }

inline CueInit parse_cue_init(std::string_view s) {
  if (s == "zeros") return CueInit::zeros;
  if (s == "gaussian") return CueInit::gaussian;
  throw ConfigError("unknown cue_init '" + std::string(s) + "' (expected zeros or gaussian)");
}

/// How the inner loops evaluate W_out^T e_x. `direct` uses W_out twice per
/// step; `gram` keeps W_out^T W_out and costs H^2 per step instead of 2 l H.
/// `automatic` picks gram when 2 l > H.
enum class Kernel { automatic, direct, gram };

inline std::string_view to_string(Kernel k) {
  switch (k) {
    case Kernel::automatic: return "auto";
    case Kernel::direct: return "direct";
    case Kernel::gram: return "gram";
  }
  return "auto";
}

inline Kernel parse_kernel(std::string_view s) {
  if (s == "auto") return Kernel::automatic;
  if (s == "direct") return Kernel::direct;
  if (s == "gram") return Kernel::gram;
  throw ConfigError("unknown kernel '" + std::string(s) + "' (expected auto, direct or gram)");
}

struct WriteConfig {
  std::size_t epochs = 100;
  std::size_t n1_iters = 100;
  double eta_h = 0.05;
  double eta_w = 1e-4;
  /// Std of the initial weight entries; unset means 1/sqrt(H).
  std::optional<double> weight_init_std;
  CueInit cue_init = CueInit::gaussian;
  double cue_std = 1.0;
  Kernel kernel = Kernel::automatic;

  void validate() const {
    if (epochs < 1) throw ConfigError("write.epochs must be >= 1");
    if (!(eta_h > 0.0) || !std::isfinite(eta_h)) throw ConfigError("write.eta_h must be > 0");
    if (!(eta_w > 0.0) || !std::isfinite(eta_w)) throw ConfigError("write.eta_w must be > 0");
    if (weight_init_std && (!(*weight_init_std >= 0.0) || !std::isfinite(*weight_init_std)))
      throw ConfigError("write.weight_init_std must be >= 0");
    if (!(cue_std >= 0.0) || !std::isfinite(cue_std)) throw ConfigError("write.cue_std must be >= 0");
  }

  bool operator==(const WriteConfig&) const = default;
};

struct MemoryModel {
  Eigen::MatrixXd w_hidden;  // H x H
  Eigen::MatrixXd w_out;     // l x H
  Eigen::VectorXd cue;       // stored initial hidden state
  Activation output_activation = Activation::tanh;  // f
  Activation hidden_activation = Activation::tanh;  // g
  std::uint64_t seed = 0;

  std::size_t hidden_dim() const { return std::size_t(w_hidden.rows()); }
  std::size_t segment_len() const { return std::size_t(w_out.rows()); }

  bool is_finite() const {
    return w_hidden.allFinite() && w_out.allFinite() && cue.allFinite();
  }

  void validate() const {
    const auto h = w_hidden.rows();
    if (h < 1 || w_hidden.cols() != h || w_out.cols() != h || w_out.rows() < 1 || cue.size() != h)
      throw DimensionError("inconsistent model dimensions");
    if (!is_finite()) throw DivergenceError("model contains non-finite values");
  }

  bool operator==(const MemoryModel& o) const {
    return output_activation == o.output_activation && hidden_activation == o.hidden_activation &&
           seed == o.seed && w_hidden.rows() == o.w_hidden.rows() && w_hidden.cols() == o.w_hidden.cols() &&
           w_out.rows() == o.w_out.rows() && w_out.cols() == o.w_out.cols() && cue.size() == o.cue.size() &&
           w_hidden == o.w_hidden && w_out == o.w_out && cue == o.cue;
  }
};

struct ErrorPair {
  Eigen::VectorXd e_x;  // x - W_out f(h)
  Eigen::VectorXd e_h;  // h - g(W_H h_prev)
};

/// Weights are i.i.d. N(0, std^2) drawn from a mt19937_64 seeded with `seed`,
/// in the order W_H, W_out (both row-major), then the cue.
inline MemoryModel init_model(std::size_t hidden_dim, std::size_t segment_len, Activation output_activation,
                              Activation hidden_activation, std::uint64_t seed, const WriteConfig& cfg) {
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (segment_len < 1) throw ConfigError("segment_len must be >= 1");
  cfg.validate();

  const double std = cfg.weight_init_std.value_or(1.0 / std::sqrt(double(hidden_dim)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto H = Eigen::Index(hidden_dim);
  const auto L = Eigen::Index(segment_len);
  MemoryModel m;
  m.output_activation = output_activation;
  m.hidden_activation = hidden_activation;
  m.seed = seed;
  m.w_hidden.resize(H, H);
  m.w_out.resize(L, H);
  m.cue.resize(H);
  for (Eigen::Index i = 0; i < H; ++i)
    for (Eigen::Index j = 0; j < H; ++j) m.w_hidden(i, j) = std * normal(rng);
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = 0; j < H; ++j) m.w_out(i, j) = std * normal(rng);
  for (Eigen::Index i = 0; i < H; ++i) {
    const double z = normal(rng);
    m.cue(i) = cfg.cue_init == CueInit::gaussian ? cfg.cue_std * z : 0.0;
  }
  return m;
}

namespace detail {

inline void check_dims(const MemoryModel& m, const Eigen::VectorXd& x, const HiddenState& h,
                       const HiddenState& h_prev) {
  if (std::size_t(x.size()) != m.segment_len())
    throw DimensionError("segment has " + std::to_string(x.size()) + " samples, model expects " +
                         std::to_string(m.segment_len()));
  if (std::size_t(h.size()) != m.hidden_dim() || std::size_t(h_prev.size()) != m.hidden_dim())
    throw DimensionError("hidden state size does not match the model");
}

/// g(W_H h_prev): the feedforward prediction of the next hidden state.
inline HiddenState predict_hidden(const MemoryModel& m, const HiddenState& h_prev) {
  return apply(m.hidden_activation, m.w_hidden * h_prev);
}

/// One inference step given the precomputed hidden prediction.
inline HiddenState hidden_step(const MemoryModel& m, const Eigen::VectorXd& x, const HiddenState& h,
                               const HiddenState& predicted, double eta_h) {
  const Eigen::VectorXd e_x = x - m.w_out * apply(m.output_activation, h);
  const Eigen::VectorXd drive = derivative(m.output_activation, h).cwiseProduct(m.w_out.transpose() * e_x);
  return h + eta_h * (drive - (h - predicted));
}

}  // namespace detail

inline ErrorPair error_pair(const MemoryModel& m, const Eigen::VectorXd& x_target, const HiddenState& h,
                            const HiddenState& h_prev) {
  detail::check_dims(m, x_target, h, h_prev);
  return {x_target - m.w_out * apply(m.output_activation, h), h - detail::predict_hidden(m, h_prev)};
}

inline double energy(const MemoryModel& m, const Eigen::VectorXd& x, const HiddenState& h,
                     const HiddenState& h_prev) {
  const ErrorPair e = error_pair(m, x, h, h_prev);
  return e.e_x.squaredNorm() + e.e_h.squaredNorm();
}

/// h + eta_h * (-e_h + f'(h) .* W_out^T e_x)
inline HiddenState infer_hidden_step(const MemoryModel& m, const Eigen::VectorXd& x_target, const HiddenState& h,
                                     const HiddenState& h_prev, double eta_h) {
  detail::check_dims(m, x_target, h, h_prev);
  return detail::hidden_step(m, x_target, h, detail::predict_hidden(m, h_prev), eta_h);
}

/// W_out += eta_w e_x f(h)^T and W_H += eta_w (e_h .* g'(W_H h_prev)) h_prev^T,
/// both evaluated at the incoming weights.
inline MemoryModel weight_update(MemoryModel m, const Eigen::VectorXd& x_target, const HiddenState& h_converged,
                                 const HiddenState& h_prev, double eta_w) {
  detail::check_dims(m, x_target, h_converged, h_prev);
  const Eigen::VectorXd pre = m.w_hidden * h_prev;
  const Eigen::VectorXd fh = apply(m.output_activation, h_converged);
  const Eigen::VectorXd e_x = x_target - m.w_out * fh;
  const Eigen::VectorXd e_h = h_converged - apply(m.hidden_activation, pre);
  m.w_out.noalias() += eta_w * e_x * fh.transpose();
  m.w_hidden.noalias() += eta_w * e_h.cwiseProduct(derivative(m.hidden_activation, pre)) * h_prev.transpose();
  return m;
}

}  // namespace pcam
