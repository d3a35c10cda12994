#pragma once

// Writing a segmented sequence into a MemoryModel and recalling it from the
// stored cue.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pcam/audio_io.hpp"
#include "pcam/errors.hpp"
#include "pcam/model.hpp"

namespace pcam {

enum class ReadMode { open_loop, closed_loop };

inline std::string_view to_string(ReadMode m) { return m == ReadMode::open_loop ? "open_loop" : "closed_loop"; }

inline ReadMode parse_read_mode(std::string_view s) {
  if (s == "open_loop" || s == "open") return ReadMode::open_loop;
  if (s == "closed_loop" || s == "closed") return ReadMode::closed_loop;
  throw ConfigError("unknown read mode '" + std::string(s) + "' (expected open_loop or closed_loop)");
}

struct ReadConfig {
  std::size_t n2_iters = 500;
  double eta_x = 0.1;
  double eta_h = 0.05;
  ReadMode mode = ReadMode::closed_loop;
  std::size_t n_segments = 20;
  /// Segments recalled with the ground truth clamped as the output target.
  /// Requires `read_sequence(..., primer)`.
  std::size_t prime_segments = 0;
  Kernel kernel = Kernel::automatic;

  void validate() const {
    if (n_segments < 1) throw ConfigError("read.n_segments must be >= 1");
    if (!(eta_x > 0.0) || !std::isfinite(eta_x)) throw ConfigError("read.eta_x must be > 0");
    if (!(eta_h > 0.0) || !std::isfinite(eta_h)) throw ConfigError("read.eta_h must be > 0");
  }

  bool operator==(const ReadConfig&) const = default;
};

struct RecallResult {
  SegmentMatrix segments;  // n_segments x l
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> hidden_trajectory;  // n_segments x H
  std::vector<std::vector<double>> energy_trace;  // [segment][iteration]
  ReadMode mode = ReadMode::closed_loop;

  bool operator==(const RecallResult& o) const {
    return mode == o.mode && segments.rows() == o.segments.rows() && segments.cols() == o.segments.cols() &&
           segments == o.segments && hidden_trajectory.rows() == o.hidden_trajectory.rows() &&
           hidden_trajectory.cols() == o.hidden_trajectory.cols() && hidden_trajectory == o.hidden_trajectory &&
           energy_trace == o.energy_trace;
  }
};

struct WriteResult {
  MemoryModel model;
  std::vector<double> epoch_energy;  // total F over segments, per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double energy)>;

namespace detail {

inline bool use_gram(Kernel k, std::size_t segment_len, std::size_t hidden_dim) {
  if (k == Kernel::automatic) return 2 * segment_len > hidden_dim;
  return k == Kernel::gram;
}

inline void require_finite(const Eigen::VectorXd& v, const char* what, std::size_t epoch, std::size_t seg) {
  if (!v.allFinite())
    throw DivergenceError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) + ", segment " +
                          std::to_string(seg));
}

using GramMatrix = Eigen::MatrixXd;  // only the upper triangle is kept current

inline GramMatrix gram_of(const Eigen::MatrixXd& w) {
  GramMatrix g = GramMatrix::Zero(w.cols(), w.cols());
  g.selfadjointView<Eigen::Upper>().rankUpdate(w.transpose());
  return g;
}

inline Eigen::VectorXd gram_times(const GramMatrix& g, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  out.noalias() = g.selfadjointView<Eigen::Upper>() * v;
  return out;
}

}  // namespace detail

/// Writes `seq` into the weights. Each epoch restarts from the stored cue; for
/// every segment the hidden state starts at its feedforward prediction, takes
/// n1_iters inference steps against the segment, then the weights take one
/// update at the converged state.
inline WriteResult write_sequence(MemoryModel model, const SegmentedSequence& seq, const WriteConfig& cfg,
                                  const EpochCallback& on_epoch = {}) {
  cfg.validate();
  model.validate();
  if (seq.segment_len != model.segment_len() || std::size_t(seq.segments.cols()) != model.segment_len())
    throw DimensionError("sequence segment length " + std::to_string(seq.segment_len) +
                         " does not match model segment length " + std::to_string(model.segment_len()));
  if (seq.count() == 0) throw DimensionError("cannot write an empty sequence");

  const Activation f = model.output_activation;
  const Activation g = model.hidden_activation;
  const bool gram = detail::use_gram(cfg.kernel, model.segment_len(), model.hidden_dim());
  detail::GramMatrix gram_mat;
  if (gram) gram_mat = detail::gram_of(model.w_out);

  WriteResult result;
  result.epoch_energy.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    HiddenState prev = model.cue;
    double total = 0.0;
    for (std::size_t mu = 0; mu < seq.count(); ++mu) {
      const Eigen::VectorXd x = seq.segments.row(Eigen::Index(mu)).transpose();
      const Eigen::VectorXd pre = model.w_hidden * prev;
      const HiddenState predicted = apply(g, pre);
      HiddenState h = predicted;

      if (gram) {
        // W_out^T e_x = W_out^T x - G f(h)
        const Eigen::VectorXd wx = model.w_out.transpose() * x;
        Eigen::VectorXd fh(h.size()), dfh(h.size()), q(h.size());
        for (std::size_t k = 0; k < cfg.n1_iters; ++k) {
          apply_with_derivative(f, h, fh, dfh);
          q.noalias() = gram_mat.selfadjointView<Eigen::Upper>() * fh;
          h += cfg.eta_h * (dfh.cwiseProduct(wx - q) - (h - predicted));
        }
      } else {
        for (std::size_t k = 0; k < cfg.n1_iters; ++k) h = detail::hidden_step(model, x, h, predicted, cfg.eta_h);
      }
      detail::require_finite(h, "hidden state", epoch, mu + 1);

      const Eigen::VectorXd fh = apply(f, h);
      const Eigen::VectorXd e_x = x - model.w_out * fh;
      const Eigen::VectorXd e_h = h - predicted;
      total += e_x.squaredNorm() + e_h.squaredNorm();

      if (gram) {
        const Eigen::VectorXd u = model.w_out.transpose() * e_x;
        // (W + a e f^T)^T (W + a e f^T) = G + a (u f^T + f u^T) + a^2 |e|^2 f f^T
        gram_mat.selfadjointView<Eigen::Upper>().rankUpdate(u, fh, cfg.eta_w);
        gram_mat.selfadjointView<Eigen::Upper>().rankUpdate(fh, cfg.eta_w * cfg.eta_w * e_x.squaredNorm());
      }
      model.w_out.noalias() += cfg.eta_w * e_x * fh.transpose();
      model.w_hidden.noalias() += cfg.eta_w * e_h.cwiseProduct(derivative(g, pre)) * prev.transpose();
      prev = h;
    }
    if (!std::isfinite(total) || !model.is_finite())
      throw DivergenceError("non-finite weights or energy at epoch " + std::to_string(epoch));
    result.epoch_energy.push_back(total);
    if (on_epoch) on_epoch(epoch, total);
  }
  result.model = std::move(model);
  return result;
}

/// Recalls cfg.n_segments segments from the stored cue with frozen weights.
///
/// Per segment: h starts at g(W_H h_prev) and the recalled segment x at zero.
/// Each of the n2_iters iterations first relaxes x toward W_out f(h); in
/// closed-loop mode h then takes one inference step using the current x as
/// its output target. Open-loop keeps h at its feedforward value. The
/// energy trace records |h - g(W_H h_prev)|^2 + |x - W_out f(h)|^2 after
/// every iteration.
///
/// With cfg.prime_segments = k > 0 the first k segments are instead inferred
/// against the matching rows of `primer` (write-style, weights frozen) and
/// emitted as W_out f(h).
inline RecallResult read_sequence(const MemoryModel& model, const ReadConfig& cfg,
                                  const SegmentMatrix* primer = nullptr) {
  cfg.validate();
  if (!model.is_finite()) throw DivergenceError("model contains non-finite weights");
  model.validate();
  if (cfg.prime_segments > 0) {
    if (!primer) throw ConfigError("read.prime_segments > 0 requires ground-truth segments");
    if (std::size_t(primer->rows()) < cfg.prime_segments || std::size_t(primer->cols()) != model.segment_len())
      throw DimensionError("primer does not cover the requested segments");
  }

  const Activation f = model.output_activation;
  const auto H = Eigen::Index(model.hidden_dim());
  const auto L = Eigen::Index(model.segment_len());
  const bool gram = cfg.mode == ReadMode::closed_loop && detail::use_gram(cfg.kernel, model.segment_len(),
                                                                          model.hidden_dim());
  detail::GramMatrix gram_mat;
  if (gram) gram_mat = detail::gram_of(model.w_out);

  RecallResult r;
  r.mode = cfg.mode;
  r.segments.resize(Eigen::Index(cfg.n_segments), L);
  r.hidden_trajectory.resize(Eigen::Index(cfg.n_segments), H);
  r.energy_trace.resize(cfg.n_segments);

  HiddenState prev = model.cue;
  for (std::size_t mu = 0; mu < cfg.n_segments; ++mu) {
    const HiddenState predicted = detail::predict_hidden(model, prev);
    HiddenState h = predicted;
    Eigen::VectorXd x_hat = Eigen::VectorXd::Zero(L);
    auto& trace = r.energy_trace[mu];
    trace.reserve(cfg.n2_iters);

    if (mu < cfg.prime_segments) {
      const Eigen::VectorXd truth = primer->row(Eigen::Index(mu)).transpose();
      for (std::size_t k = 0; k < cfg.n2_iters; ++k) {
        h = detail::hidden_step(model, truth, h, predicted, cfg.eta_h);
        trace.push_back((truth - model.w_out * apply(f, h)).squaredNorm() + (h - predicted).squaredNorm());
      }
      x_hat = model.w_out * apply(f, h);
    } else if (cfg.mode == ReadMode::open_loop) {
      const Eigen::VectorXd target = model.w_out * apply(f, h);
      for (std::size_t k = 0; k < cfg.n2_iters; ++k) {
        x_hat += cfg.eta_x * (target - x_hat);
        trace.push_back((x_hat - target).squaredNorm());
      }
    } else if (gram) {
      // x_hat = W_out z throughout, so W_out^T (x_hat - W_out f(h)) = G (z - f(h)).
      Eigen::VectorXd z = Eigen::VectorXd::Zero(H);
      Eigen::VectorXd fh = apply(f, h);
      Eigen::VectorXd q;  // G (z - f(h)) after the x relaxation of this iteration
      for (std::size_t k = 0; k < cfg.n2_iters; ++k) {
        if (k == 0) {
          z = cfg.eta_x * fh;
          q = detail::gram_times(gram_mat, z - fh);
        } else {
          // z' - f(h) = (1 - eta_x)(z - f(h)) for the current h
          z = (1.0 - cfg.eta_x) * z + cfg.eta_x * fh;
          q *= (1.0 - cfg.eta_x);
        }
        h += cfg.eta_h * (derivative(f, h).cwiseProduct(q) - (h - predicted));
        fh = apply(f, h);
        const Eigen::VectorXd d = z - fh;
        q = detail::gram_times(gram_mat, d);
        // The quadratic form is >= 0 exactly; rounding can dip below.
        trace.push_back(std::max(0.0, d.dot(q)) + (h - predicted).squaredNorm());
      }
      x_hat = model.w_out * z;
    } else {
      Eigen::VectorXd target = model.w_out * apply(f, h);
      for (std::size_t k = 0; k < cfg.n2_iters; ++k) {
        x_hat += cfg.eta_x * (target - x_hat);
        const Eigen::VectorXd e_x = x_hat - target;
        h += cfg.eta_h * (derivative(f, h).cwiseProduct(model.w_out.transpose() * e_x) - (h - predicted));
        target = model.w_out * apply(f, h);
        trace.push_back((x_hat - target).squaredNorm() + (h - predicted).squaredNorm());
      }
    }

    if (!h.allFinite() || !x_hat.allFinite())
      throw DivergenceError("non-finite recall at segment " + std::to_string(mu + 1));
    r.segments.row(Eigen::Index(mu)) = x_hat.transpose();
    r.hidden_trajectory.row(Eigen::Index(mu)) = h.transpose();
    prev = h;
  }
  return r;
}

/// Wraps recalled segments as a SegmentedSequence (no padding).
inline SegmentedSequence as_sequence(const RecallResult& r, std::uint32_t sample_rate) {
  SegmentedSequence s;
  s.segments = r.segments;
  s.segment_len = std::size_t(r.segments.cols());
  s.sample_rate = sample_rate;
  s.original_len = std::size_t(r.segments.size());
  return s;
}

}  // namespace pcam
