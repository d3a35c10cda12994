#pragma once

// Self-check of the hidden-state and weight updates against central finite
// differences of the energy. The updates equal -dF/d(.) / 2, so each
// analytic direction is compared with -FD / 2.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

#include "pcam/errors.hpp"
#include "pcam/model.hpp"

namespace pcam {

/// Deliberate corruptions of the update rules, used to show that the check
/// detects a wrong implementation.
enum class InjectedFault { none, hidden_sign, missing_hidden_derivative };

inline InjectedFault parse_fault(std::string_view s) {
  if (s == "none") return InjectedFault::none;
  if (s == "hidden_sign") return InjectedFault::hidden_sign;
  if (s == "missing_hidden_derivative") return InjectedFault::missing_hidden_derivative;
  throw ConfigError("unknown fault '" + std::string(s) + "'");
}

struct GradcheckTrial {
  double hidden_error = 0.0;
  double w_out_error = 0.0;
  double w_hidden_error = 0.0;
  double worst() const { return std::max({hidden_error, w_out_error, w_hidden_error}); }
};

/// |a - b| / max(|a|, |b|), 0 when both vanish.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

/// One random instance: weights and states drawn from N(0, 0.5^2) and the
/// target from N(0, 1), all from `seed`.
inline GradcheckTrial gradcheck_trial(std::uint64_t seed, std::size_t hidden_dim, std::size_t segment_len,
                                      InjectedFault fault = InjectedFault::none, double fd_step = 1e-6) {
  WriteConfig wc;
  wc.weight_init_std = 0.5;
  MemoryModel m = init_model(hidden_dim, segment_len, Activation::tanh, Activation::tanh, seed, wc);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index n, double s) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = s * normal(rng);
    return v;
  };
  const Eigen::VectorXd x = draw(Eigen::Index(segment_len), 1.0);
  const HiddenState h = draw(Eigen::Index(hidden_dim), 0.5);
  const HiddenState h_prev = draw(Eigen::Index(hidden_dim), 0.5);

  // Analytic directions with unit step sizes.
  Eigen::VectorXd dir_h = infer_hidden_step(m, x, h, h_prev, 1.0) - h;
  const MemoryModel updated = weight_update(m, x, h, h_prev, 1.0);
  const Eigen::MatrixXd dir_out = updated.w_out - m.w_out;
  Eigen::MatrixXd dir_hidden = updated.w_hidden - m.w_hidden;

  if (fault == InjectedFault::hidden_sign) {
    dir_h += 2.0 * error_pair(m, x, h, h_prev).e_h;  // +e_h instead of -e_h
  } else if (fault == InjectedFault::missing_hidden_derivative) {
    const ErrorPair e = error_pair(m, x, h, h_prev);
    dir_hidden = e.e_h * h_prev.transpose();
  }

  auto central = [&](auto&& perturb) {
    MemoryModel a = m, b = m;
    HiddenState ha = h, hb = h;
    perturb(a, ha, +fd_step);
    perturb(b, hb, -fd_step);
    return (energy(a, x, ha, h_prev) - energy(b, x, hb, h_prev)) / (2.0 * fd_step);
  };

  Eigen::VectorXd fd_h(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i)
    fd_h(i) = -0.5 * central([&](MemoryModel&, HiddenState& s, double d) { s(i) += d; });
  Eigen::MatrixXd fd_out(m.w_out.rows(), m.w_out.cols());
  for (Eigen::Index i = 0; i < fd_out.rows(); ++i)
    for (Eigen::Index j = 0; j < fd_out.cols(); ++j)
      fd_out(i, j) = -0.5 * central([&](MemoryModel& mm, HiddenState&, double d) { mm.w_out(i, j) += d; });
  Eigen::MatrixXd fd_hidden(m.w_hidden.rows(), m.w_hidden.cols());
  for (Eigen::Index i = 0; i < fd_hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < fd_hidden.cols(); ++j)
      fd_hidden(i, j) = -0.5 * central([&](MemoryModel& mm, HiddenState&, double d) { mm.w_hidden(i, j) += d; });

  return {relative_error(dir_h, fd_h), relative_error(dir_out, fd_out), relative_error(dir_hidden, fd_hidden)};
}

}  // namespace pcam
