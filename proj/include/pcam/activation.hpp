#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "pcam/errors.hpp"

namespace pcam {

/// Elementwise nonlinearity used on the output path (f) or the hidden
/// transition (h). The numeric values are the on-disk codes of the model file.
enum class Activation : std::uint8_t { tanh = 0, identity = 1, relu = 2 };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
  }
  return "unknown";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected tanh, identity or relu)");
}

inline bool is_valid_activation_code(std::uint8_t code) { return code <= 2; }

inline Eigen::VectorXd apply(Activation a, const Eigen::VectorXd& z) {
  switch (a) {
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
  }
  return z;
}

/// Exact derivative. relu'(0) is taken as 0.
inline Eigen::VectorXd derivative(Activation a, const Eigen::VectorXd& z) {
  switch (a) {
    case Activation::tanh: {
      Eigen::ArrayXd t = z.array().tanh();
      return (1.0 - t * t).matrix();
    }
    case Activation::identity: return Eigen::VectorXd::Ones(z.size());
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
  }
  return Eigen::VectorXd::Ones(z.size());
}

/// Value and derivative in one pass (tanh is evaluated once).
inline void apply_with_derivative(Activation a, const Eigen::VectorXd& z, Eigen::VectorXd& value,
                                  Eigen::VectorXd& deriv) {
  switch (a) {
    case Activation::tanh:
      value = z.array().tanh().matrix();
      deriv = (1.0 - value.array().square()).matrix();
      return;
    case Activation::identity:
      value = z;
      deriv.setOnes(z.size());
      return;
    case Activation::relu:
      value = z.cwiseMax(0.0);
      deriv = (z.array() > 0.0).cast<double>().matrix();
      return;
  }
}

}  // namespace pcam
