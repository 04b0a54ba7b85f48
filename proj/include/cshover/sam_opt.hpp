/**
 * @file sam_opt.hpp
 * @brief Sharpness-aware minimisation over a flat parameter vector.
 *
 * Each step evaluates the gradient g1 at w, moves to the worst-case
 * neighbour w + rho g1 / (|g1| + eps_guard), and updates w with the base
 * optimiser using the gradient taken there.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::sam {

class DivergenceError : public Error {
 public:
  DivergenceError() : Error("objective diverged") {}
};

struct Evaluation {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Loss and gradient at a parameter vector.
using Objective = std::function<Evaluation(std::span<const double>)>;

enum class BaseKind { Sgd, SgdMomentum };

struct BaseOptimizer {
  BaseKind kind = BaseKind::Sgd;
  double lr = 0.1;
  double momentum = 0.9;  ///< used by SgdMomentum only
};

struct SamConfig {
  double rho = 0.05;
  double eps_guard = 1e-12;
  BaseOptimizer base{};
  std::size_t steps = 100;

  void validate() const;
};

/// Stateful optimiser (holds the momentum buffer).
class SamOptimizer {
 public:
  explicit SamOptimizer(SamConfig cfg);

  /// One SAM step from w, given the gradient g1 already evaluated at w.
  std::vector<double> step(std::span<const double> w, std::span<const double> g1, const Objective& f);
  /// One SAM step from w; evaluates g1 itself.
  std::vector<double> step(std::span<const double> w, const Objective& f);

  const SamConfig& config() const noexcept { return cfg_; }

 private:
  void apply_base(std::vector<double>& w, std::span<const double> g);

  SamConfig cfg_;
  std::vector<double> velocity_;
};

/// Single step with a fresh optimiser state.
std::vector<double> sam_step(std::span<const double> w, const Objective& f, const SamConfig& cfg);

/// Plain base-optimiser step with gradient g (no perturbation).
std::vector<double> base_step(std::span<const double> w, std::span<const double> g, const BaseOptimizer& base);

/// SAM perturbation rho g / (|g| + eps_guard); zero when |g| = 0.
std::vector<double> perturbation(std::span<const double> g, double rho, double eps_guard);

struct TraceEntry {
  std::size_t step;
  double loss;
  double grad_norm;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct OptimizeResult {
  std::vector<TraceEntry> trace;  ///< steps + 1 entries, including the start point
  std::vector<double> w;
};

OptimizeResult optimize(const Objective& f, std::span<const double> w0, const SamConfig& cfg);

}  // namespace cshover::sam
