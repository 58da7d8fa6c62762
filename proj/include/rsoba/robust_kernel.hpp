/**
 * \file robust_kernel.hpp
 * \brief Huber kernel on already-squared metric values and the robustified
 *        per-metric normal-equation contribution.
 */
#pragma once

#include <cmath>
#include <limits>

#include "rsoba/derivatives.hpp"
#include "rsoba/errors.hpp"

namespace rsoba {

/// ρ and its first two derivatives with respect to the metric.
struct KernelValue {
  double rho = 0.0;
  double rho_dot = 1.0;
  double rho_ddot = 0.0;
};

/**
 * \brief Huber kernel for a squared argument s:
 *   ρ(s) = s                  for s <= delta
 *   ρ(s) = 2 sqrt(delta s) - delta  otherwise
 *
 * An infinite delta turns the kernel off.
 */
struct HuberKernel {
  double delta = std::numeric_limits<double>::infinity();

  static HuberKernel off() { return {}; }

  static HuberKernel with_threshold(double delta) {
    if (!(delta > 0.0)) throw DomainError("huber threshold must be positive");
    return {delta};
  }

  bool enabled() const { return std::isfinite(delta); }

  KernelValue evaluate(double c) const {
    if (!(c >= 0.0)) throw DomainError("robust kernel evaluated on a negative metric");
    if (c <= delta) return {c, 1.0, 0.0};
    const double root = std::sqrt(delta / c);
    return {2.0 * std::sqrt(delta * c) - delta, root, -0.5 * root / c};
  }

  double rho(double c) const { return evaluate(c).rho; }
};

/// When to drop the negative ρ̈ g gᵀ term.
enum class ClampPolicy {
  kAuto,    // keep ρ̈ unless the damped system fails to factorize
  kAlways,  // always use max(ρ̈, 0)
};

template <int Dim>
struct RobustContribution {
  typename MetricLinearization<Dim>::Matrix hessian;
  typename MetricLinearization<Dim>::Vector gradient;
  double cost = 0.0;
};

/// H_r = ρ̇H + ρ̈ggᵀ, g_r = ρ̇g. Inliers pass through untouched.
template <int Dim>
RobustContribution<Dim> robustify(const MetricLinearization<Dim>& lin, const HuberKernel& kernel,
                                  bool clamp_second_order = false) {
  if (lin.cost <= kernel.delta) return {lin.hessian, lin.gradient, lin.cost};
  const KernelValue k = kernel.evaluate(lin.cost);
  const double ddot = clamp_second_order ? std::max(k.rho_ddot, 0.0) : k.rho_ddot;
  RobustContribution<Dim> out;
  out.hessian = k.rho_dot * lin.hessian + ddot * lin.gradient * lin.gradient.transpose();
  out.gradient = k.rho_dot * lin.gradient;
  out.cost = k.rho;
  return out;
}

}  // namespace rsoba
