/**
 * @file losses.hpp
 * @brief Segmentation losses with analytic input gradients: Dice, asymmetric
 * focal, asymmetric focal-Tversky, Unified Focal, HoVer regression and the
 * weighted composite used for the np / tp / hv branches.
 *
 * Classification losses take raw logits and apply a softmax internally, so
 * the reported gradient is with respect to the logits.
 */
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::losses {

/// N pixels x C classes, row-major.
struct LossInput {
  int n = 0;
  int c = 0;
  std::vector<double> logits;
  std::vector<double> targets;  ///< one-hot rows
  std::vector<bool> rare;       ///< rare[c]: class c gets the rare-class treatment

  /// Targets from class indices; rare defaults to every class except 0.
  static LossInput from_indices(int n, int c, std::vector<double> logits, std::span<const int> labels);

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;  ///< dL/dlogits, N x C
};

struct UflParams {
  double lambda = 0.5;
  double delta = 0.6;
  double gamma = 0.5;
  double smooth = 1e-6;

  void validate() const;
};

/// Row-wise softmax of an N x C logit matrix.
std::vector<double> softmax(std::span<const double> logits, int n, int c);

/// mean_c (1 - (2 sum p g + smooth) / (sum p + sum g + smooth)).
LossResult dice_loss(const LossInput& in, double smooth = 1e-6);

/// Cross-entropy weighted by delta on rare classes and by
/// (1 - delta) (1 - p_t)^gamma elsewhere, averaged over pixels.
LossResult asym_focal_loss(const LossInput& in, double delta, double gamma);

/// Tversky index per class; rare classes contribute (1 - TI)^(1 - gamma),
/// the others 1 - TI. gamma = 1 makes every rare-class term the constant 1.
LossResult asym_focal_tversky_loss(const LossInput& in, double delta, double gamma, double smooth = 1e-6);

/// lambda * asym_focal + (1 - lambda) * asym_focal_tversky.
LossResult unified_focal_loss(const LossInput& in, const UflParams& params);

struct HvLossResult {
  double value = 0.0;
  PlaneF64 grad_h;
  PlaneF64 grad_v;
};

/**
 * @brief HoVer regression loss.
 *
 * Mean squared error over both maps plus the mean squared difference of
 * d/dx of h and d/dy of v (sobel_plane) over the nucleus mask.
 */
HvLossResult hv_loss(const HoVerMaps& pred, const HoVerMaps& target, const PlaneU8& nuclei_mask,
                     int aperture = 5);

struct CompositeWeights {
  double ufl = 4.0;
  double dice = 1.0;
  double hv = 1.0;
};

struct HvInput {
  HoVerMaps pred;
  HoVerMaps target;
  PlaneU8 mask;
};

struct CompositeResult {
  double value = 0.0;
  std::vector<double> grad_np;
  std::vector<double> grad_tp;
  PlaneF64 grad_h;
  PlaneF64 grad_v;
};

/// sum over np and tp of (w_ufl UFL + w_dice Dice) + w_hv hv_loss.
CompositeResult composite_loss(const LossInput& np_in, const LossInput& tp_in, const HvInput& hv_in,
                               const CompositeWeights& weights = {}, const UflParams& ufl = {},
                               double dice_smooth = 1e-6);

}  // namespace cshover::losses
