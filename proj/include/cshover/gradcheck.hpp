/**
 * @file gradcheck.hpp
 * @brief Central finite-difference checks of the loss gradients, used by the
 * `loss-check` diagnostic.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cshover::gradcheck {

/// Central differences of f at x with step h.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h = 1e-6);

/// |a - b|_2 / max(|a|_2, |b|_2); 0 when both are zero.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

struct CheckOutcome {
  std::string loss;
  double worst_error = 0.0;
  bool passed = true;
};

/// Checks every loss on `seeds` random fixtures (N <= 64 pixels, C = 7).
std::vector<CheckOutcome> run_loss_checks(std::uint64_t seeds, double tolerance = 1e-5);

}  // namespace cshover::gradcheck
