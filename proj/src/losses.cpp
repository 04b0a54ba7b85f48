#include "cshover/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cshover/hover.hpp"

namespace cshover::losses {

namespace {

struct Probs {
  std::vector<double> p;
  std::vector<double> logp;
};

// Row-wise softmax and log-softmax, one exp per entry.
Probs probabilities(std::span<const double> logits, int n, int c) {
  Probs r{std::vector<double>(logits.size()), std::vector<double>(logits.size())};
  for (int i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * c;
    const double* z = logits.data() + row;
    const double m = *std::max_element(z, z + c);
    double s = 0.0;
    for (int k = 0; k < c; ++k) {
      r.p[row + k] = std::exp(z[k] - m);
      s += r.p[row + k];
    }
    const double lse = m + std::log(s);
    const double inv = 1.0 / s;
    for (int k = 0; k < c; ++k) {
      r.p[row + k] *= inv;
      r.logp[row + k] = z[k] - lse;
    }
  }
  return r;
}

// dL/dz = p * (dL/dp - sum_k p_k dL/dp_k), row-wise.
std::vector<double> softmax_backward(const std::vector<double>& p, const std::vector<double>& dp, int n, int c) {
  std::vector<double> dz(p.size());
  for (int i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * c;
    double dot = 0.0;
    for (int k = 0; k < c; ++k) dot += p[row + k] * dp[row + k];
    for (int k = 0; k < c; ++k) dz[row + k] = p[row + k] * (dp[row + k] - dot);
  }
  return dz;
}

void check_hv_shapes(const HoVerMaps& a, const HoVerMaps& b, const PlaneU8& mask) {
  if (!a.h.same_extent(a.v) || !a.h.same_extent(b.h) || !a.h.same_extent(b.v) || !a.h.same_extent(mask)) {
    throw InvalidArgument("hv_loss inputs differ in shape");
  }
}

}  // namespace

LossInput LossInput::from_indices(int n, int c, std::vector<double> logits, std::span<const int> labels) {
  LossInput in;
  in.n = n;
  in.c = c;
  in.logits = std::move(logits);
  in.targets.assign(static_cast<std::size_t>(n) * c, 0.0);
  if (labels.size() != static_cast<std::size_t>(n)) throw InvalidArgument("label count does not match N");
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) throw InvalidArgument("label index out of range");
    in.targets[static_cast<std::size_t>(i) * c + labels[i]] = 1.0;
  }
  in.rare.assign(c, true);
  if (c > 0) in.rare[0] = false;
  in.validate();
  return in;
}

void LossInput::validate() const {
  const std::size_t size = static_cast<std::size_t>(n) * c;
  if (n < 0 || c < 1) throw InvalidArgument("loss input needs N >= 0 and C >= 1");
  if (logits.size() != size || targets.size() != size) throw InvalidArgument("loss input buffers must be N x C");
  if (rare.size() != static_cast<std::size_t>(c)) throw InvalidArgument("rare mask must have C entries");
  for (double z : logits)
    if (!std::isfinite(z)) throw InvalidArgument("logits must be finite");
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) {
      const double g = targets[static_cast<std::size_t>(i) * c + k];
      if (g != 0.0 && g != 1.0) throw InvalidArgument("targets must be one-hot");
      s += g;
    }
    if (s != 1.0) throw InvalidArgument("target rows must sum to 1");
  }
}

void UflParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("UFL lambda must be in [0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("UFL delta must be in (0, 1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("UFL gamma must be in [0, 1]");
  if (!(smooth >= 0.0)) throw InvalidArgument("UFL smooth must be >= 0");
}

std::vector<double> softmax(std::span<const double> logits, int n, int c) {
  return probabilities(logits, n, c).p;
}

namespace {

LossResult dice_from(const LossInput& in, const std::vector<double>& p, double smooth) {
  const int n = in.n, c = in.c;
  std::vector<double> spg(c, 0.0), sp(c, 0.0), sg(c, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) {
      const std::size_t j = static_cast<std::size_t>(i) * c + k;
      spg[k] += p[j] * in.targets[j];
      sp[k] += p[j];
      sg[k] += in.targets[j];
    }

  LossResult r;
  std::vector<double> dp(p.size(), 0.0);
  for (int k = 0; k < c; ++k) {
    const double num = 2.0 * spg[k] + smooth;
    const double den = sp[k] + sg[k] + smooth;
    if (den == 0.0) continue;  // 0/0: class absent everywhere with smooth = 0
    r.value += (1.0 - num / den) / c;
    for (int i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) * c + k;
      dp[j] = -(2.0 * in.targets[j] * den - num) / (den * den) / c;
    }
  }
  r.grad = softmax_backward(p, dp, n, c);
  return r;
}

LossResult focal_from(const LossInput& in, const Probs& probs, double delta, double gamma) {
  const int n = in.n, c = in.c;
  const auto& p = probs.p;
  const auto& logp = probs.logp;

  LossResult r;
  r.grad.assign(p.size(), 0.0);
  if (n == 0) return r;
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * c;
    // With one-hot targets only the true class contributes.
    int t = 0;
    while (in.targets[row + t] == 0.0) ++t;
    const double pt = p[row + t];
    const double lp = logp[row + t];
    double s = 0.0;  // p_t * d(term)/d(p_t)
    if (in.rare[t]) {
      r.value += delta * -lp * inv_n;
      s = -delta;
    } else {
      double q = 0.0;  // 1 - p_t, summed from the other classes for accuracy
      for (int k = 0; k < c; ++k)
        if (k != t) q += p[row + k];
      const double a = 1.0 - delta;
      const double qg = std::pow(q, gamma);
      r.value += a * qg * -lp * inv_n;
      const double focal_part = (gamma > 0.0 && q > 0.0) ? gamma * std::pow(q, gamma - 1.0) * pt * lp : 0.0;
      s = a * (focal_part - qg);
    }
    for (int k = 0; k < c; ++k) {
      r.grad[row + k] = s * ((k == t ? 1.0 : 0.0) - p[row + k]) * inv_n;
    }
  }
  return r;
}

LossResult tversky_from(const LossInput& in, const std::vector<double>& p, double delta, double gamma,
                        double smooth) {
  const int n = in.n, c = in.c;
  std::vector<double> tp(c, 0.0), fn(c, 0.0), fp(c, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) {
      const std::size_t j = static_cast<std::size_t>(i) * c + k;
      const double g = in.targets[j];
      tp[k] += p[j] * g;
      fn[k] += g * (1.0 - p[j]);
      fp[k] += (1.0 - g) * p[j];
    }

  LossResult r;
  std::vector<double> dp(p.size(), 0.0);
  for (int k = 0; k < c; ++k) {
    const double num = tp[k] + smooth;
    const double den = tp[k] + delta * fn[k] + (1.0 - delta) * fp[k] + smooth;
    if (den == 0.0) continue;
    const double ti = num / den;
    const double one_minus = 1.0 - ti;
    double dvalue_dti = -1.0;
    if (in.rare[k]) {
      const double e = 1.0 - gamma;
      r.value += std::pow(std::max(one_minus, 0.0), e);
      // d/dTI of (1 - TI)^e; undefined at TI = 1 for e < 1, taken as 0 there.
      dvalue_dti = (one_minus > 0.0 && e != 0.0) ? -e * std::pow(one_minus, e - 1.0) : 0.0;
    } else {
      r.value += one_minus;
    }
    for (int i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) * c + k;
      const double dti = (in.targets[j] * den - num * (1.0 - delta)) / (den * den);
      dp[j] = dvalue_dti * dti;
    }
  }
  r.grad = softmax_backward(p, dp, n, c);
  return r;
}

LossResult ufl_from(const LossInput& in, const Probs& probs, const UflParams& params) {
  const LossResult focal = focal_from(in, probs, params.delta, params.gamma);
  const LossResult tversky = tversky_from(in, probs.p, params.delta, params.gamma, params.smooth);
  LossResult r;
  r.value = params.lambda * focal.value + (1.0 - params.lambda) * tversky.value;
  r.grad.resize(focal.grad.size());
  for (std::size_t j = 0; j < r.grad.size(); ++j) {
    r.grad[j] = params.lambda * focal.grad[j] + (1.0 - params.lambda) * tversky.grad[j];
  }
  return r;
}

}  // namespace

LossResult dice_loss(const LossInput& in, double smooth) {
  in.validate();
  return dice_from(in, probabilities(in.logits, in.n, in.c).p, smooth);
}

LossResult asym_focal_loss(const LossInput& in, double delta, double gamma) {
  in.validate();
  return focal_from(in, probabilities(in.logits, in.n, in.c), delta, gamma);
}

LossResult asym_focal_tversky_loss(const LossInput& in, double delta, double gamma, double smooth) {
  in.validate();
  return tversky_from(in, probabilities(in.logits, in.n, in.c).p, delta, gamma, smooth);
}

LossResult unified_focal_loss(const LossInput& in, const UflParams& params) {
  params.validate();
  in.validate();
  return ufl_from(in, probabilities(in.logits, in.n, in.c), params);
}

HvLossResult hv_loss(const HoVerMaps& pred, const HoVerMaps& target, const PlaneU8& nuclei_mask, int aperture) {
  check_hv_shapes(pred, target, nuclei_mask);
  const int h = pred.height(), w = pred.width();
  const std::size_t n = pred.h.pixel_count();
  HvLossResult r{0.0, PlaneF64(h, w, 1), PlaneF64(h, w, 1)};
  if (n == 0) return r;

  PlaneF64 dh(h, w, 1), dv(h, w, 1);
  for (std::size_t i = 0; i < n; ++i) {
    dh[i] = pred.h[i] - target.h[i];
    dv[i] = pred.v[i] - target.v[i];
  }
  const double mse_norm = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    r.value += (dh[i] * dh[i] + dv[i] * dv[i]) * mse_norm;
    r.grad_h[i] = 2.0 * dh[i] * mse_norm;
    r.grad_v[i] = 2.0 * dv[i] * mse_norm;
  }

  std::size_t mask_px = 0;
  for (auto m : nuclei_mask.data()) mask_px += m ? 1 : 0;
  if (mask_px == 0) return r;

  // The derivative filter is linear, so grad(pred) - grad(target) = grad(pred - target).
  PlaneF64 gh = hover::sobel_plane(dh, hover::Axis::X, aperture);
  PlaneF64 gv = hover::sobel_plane(dv, hover::Axis::Y, aperture);
  const double grad_norm = 1.0 / (2.0 * static_cast<double>(mask_px));
  for (std::size_t i = 0; i < n; ++i) {
    if (!nuclei_mask[i]) {
      gh[i] = 0.0;
      gv[i] = 0.0;
      continue;
    }
    r.value += (gh[i] * gh[i] + gv[i] * gv[i]) * grad_norm;
    gh[i] *= 2.0 * grad_norm;
    gv[i] *= 2.0 * grad_norm;
  }
  const PlaneF64 bh = hover::sobel_plane_adjoint(gh, hover::Axis::X, aperture);
  const PlaneF64 bv = hover::sobel_plane_adjoint(gv, hover::Axis::Y, aperture);
  for (std::size_t i = 0; i < n; ++i) {
    r.grad_h[i] += bh[i];
    r.grad_v[i] += bv[i];
  }
  return r;
}

CompositeResult composite_loss(const LossInput& np_in, const LossInput& tp_in, const HvInput& hv_in,
                               const CompositeWeights& weights, const UflParams& ufl, double dice_smooth) {
  CompositeResult r;
  ufl.validate();
  auto branch = [&](const LossInput& in, std::vector<double>& grad) {
    in.validate();
    const Probs probs = probabilities(in.logits, in.n, in.c);
    const LossResult u = ufl_from(in, probs, ufl);
    const LossResult d = dice_from(in, probs.p, dice_smooth);
    r.value += weights.ufl * u.value + weights.dice * d.value;
    grad.resize(u.grad.size());
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = weights.ufl * u.grad[j] + weights.dice * d.grad[j];
  };
  branch(np_in, r.grad_np);
  branch(tp_in, r.grad_tp);

  const HvLossResult hv = hv_loss(hv_in.pred, hv_in.target, hv_in.mask);
  r.value += weights.hv * hv.value;
  r.grad_h = hv.grad_h;
  r.grad_v = hv.grad_v;
  for (auto& g : r.grad_h.data()) g *= weights.hv;
  for (auto& g : r.grad_v.data()) g *= weights.hv;
  return r;
}

}  // namespace cshover::losses
