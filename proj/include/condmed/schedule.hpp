#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace condmed {

/// A tuning-parameter sequence: either c * n^{-exponent} or a constant.
/// Used for both the descent steps and the bandwidths.
class Schedule {
 public:
  enum class Mode { Decaying, Fixed };

  static Schedule decaying(double c, double exponent) {
    if (!(c > 0.0)) throw std::invalid_argument("Schedule: prefactor must be positive");
    if (!(exponent >= 0.0 && exponent <= 1.0))
      throw std::invalid_argument("Schedule: exponent must lie in [0, 1]");
    Schedule s;
    s.mode_ = Mode::Decaying;
    s.c_ = c;
    s.exponent_ = exponent;
    return s;
  }

  static Schedule fixed(double value) {
    if (!(value > 0.0)) throw std::invalid_argument("Schedule: fixed value must be positive");
    Schedule s;
    s.mode_ = Mode::Fixed;
    s.fixed_value_ = value;
    return s;
  }

  /// Value at step n >= 1.
  double at(std::int64_t n) const {
    if (n < 1) throw std::invalid_argument("Schedule: step index must be >= 1");
    if (mode_ == Mode::Fixed) return fixed_value_;
    return c_ * std::pow(static_cast<double>(n), -exponent_);
  }

  Mode mode() const { return mode_; }
  bool is_fixed() const { return mode_ == Mode::Fixed; }
  double prefactor() const { return c_; }
  double exponent() const { return exponent_; }
  double fixed_value() const { return fixed_value_; }

  /// Compact token, e.g. "0.15" or "n^-0.3" or "0.5*n^-0.3".
  std::string label() const;

  friend bool operator==(const Schedule& a, const Schedule& b) {
    if (a.mode_ != b.mode_) return false;
    if (a.mode_ == Mode::Fixed) return a.fixed_value_ == b.fixed_value_;
    return a.c_ == b.c_ && a.exponent_ == b.exponent_;
  }

 private:
  Schedule() = default;
  Mode mode_ = Mode::Fixed;
  double c_ = 1.0;
  double exponent_ = 0.0;
  double fixed_value_ = 1.0;
};

namespace detail {
inline std::string trim_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}
}  // namespace detail

inline std::string Schedule::label() const {
  if (mode_ == Mode::Fixed) return detail::trim_number(fixed_value_);
  if (c_ == 1.0) return "n^-" + detail::trim_number(exponent_);
  return detail::trim_number(c_) + "*n^-" + detail::trim_number(exponent_);
}

}  // namespace condmed
