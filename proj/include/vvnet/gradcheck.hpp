#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vvnet/tensor.hpp"

namespace vvnet {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // Denominator floor of the relative error, so that gradients that are zero
  // analytically are compared at an absolute scale of floor * tol.
  double magnitude_floor = 1e-4;
  // 0 checks every element; otherwise a seeded sample per input.
  std::size_t max_elements_per_input = 0;
  std::uint64_t seed = 0;
};

struct ElementCheck {
  std::size_t input = 0;
  std::int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct CheckReport {
  std::vector<ElementCheck> elements;
  double max_rel_error = 0.0;
  bool passed = true;

  const ElementCheck* worst() const;
  std::string summary() const;
};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences. Failures are reported, never thrown.
CheckReport grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                       const GradCheckOptions& opt = {});

CheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                       double eps, double tol);

}  // namespace vvnet
