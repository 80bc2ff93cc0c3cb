#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <string_view>

namespace condmed {

/// Kernel families for the covariate weights. Epanechnikov and uniform have
/// compact support; the Gaussian kernel does not, but it is the one the
/// reference experiments use, so it is offered alongside them.
enum class KernelFamily { Gaussian, Epanechnikov, Uniform };

inline double kernel_eval(KernelFamily k, double u) {
  switch (k) {
    case KernelFamily::Gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
    case KernelFamily::Epanechnikov:
      return (u <= -1.0 || u >= 1.0) ? 0.0 : 0.75 * (1.0 - u * u);
    case KernelFamily::Uniform:
      return (u < -0.5 || u > 0.5) ? 0.0 : 1.0;
  }
  return 0.0;
}

inline double kernel_sup(KernelFamily k) {
  switch (k) {
    case KernelFamily::Gaussian: return 1.0 / std::sqrt(2.0 * M_PI);
    case KernelFamily::Epanechnikov: return 0.75;
    case KernelFamily::Uniform: return 1.0;
  }
  return 0.0;
}

/// Integral of K^2 over the real line, in closed form per family.
inline double kernel_square_integral(KernelFamily k) {
  switch (k) {
    case KernelFamily::Gaussian: return 1.0 / (2.0 * std::sqrt(M_PI));
    case KernelFamily::Epanechnikov: return 0.6;
    case KernelFamily::Uniform: return 1.0;
  }
  return 0.0;
}

inline bool kernel_compact_support(KernelFamily k) { return k != KernelFamily::Gaussian; }

/// Effective support [lo, hi]: exact for compact kernels, [-10, 10] for the
/// Gaussian (mass outside is ~1e-23).
inline std::pair<double, double> kernel_support(KernelFamily k) {
  switch (k) {
    case KernelFamily::Gaussian: return {-10.0, 10.0};
    case KernelFamily::Epanechnikov: return {-1.0, 1.0};
    case KernelFamily::Uniform: return {-0.5, 0.5};
  }
  return {0.0, 0.0};
}

inline std::string_view kernel_name(KernelFamily k) {
  switch (k) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Epanechnikov: return "epanechnikov";
    case KernelFamily::Uniform: return "uniform";
  }
  return "?";
}

inline KernelFamily kernel_from_name(std::string_view name) {
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  if (name == "uniform") return KernelFamily::Uniform;
  throw std::invalid_argument("unknown kernel family: " + std::string(name));
}

}  // namespace condmed
