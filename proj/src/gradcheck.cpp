#include "cshover/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cshover/augment.hpp"
#include "cshover/losses.hpp"

namespace cshover::gradcheck {

namespace {

using losses::LossInput;

LossInput random_input(augment::CounterRng& rng, int n, int c) {
  std::vector<double> logits(static_cast<std::size_t>(n) * c);
  for (auto& z : logits) z = 2.0 * rng.normal();
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.next() % static_cast<std::uint64_t>(c));
  return LossInput::from_indices(n, c, std::move(logits), labels);
}

losses::HvInput random_hv(augment::CounterRng& rng, int h, int w) {
  losses::HvInput in{{PlaneF64(h, w, 1), PlaneF64(h, w, 1)}, {PlaneF64(h, w, 1), PlaneF64(h, w, 1)}, PlaneU8(h, w, 1)};
  for (std::size_t i = 0; i < in.mask.pixel_count(); ++i) {
    in.pred.h[i] = rng.uniform(-1, 1);
    in.pred.v[i] = rng.uniform(-1, 1);
    in.target.h[i] = rng.uniform(-1, 1);
    in.target.v[i] = rng.uniform(-1, 1);
    in.mask[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  return in;
}

std::vector<double> concat(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

std::vector<CheckOutcome> run_loss_checks(std::uint64_t seeds, double tolerance) {
  std::vector<CheckOutcome> out = {{"dice"}, {"asym_focal"}, {"asym_focal_tversky"}, {"ufl"}, {"hv"}, {"composite"}};
  const losses::UflParams ufl;
  auto record = [&](std::size_t k, double err) {
    out[k].worst_error = std::max(out[k].worst_error, err);
    if (!(err < tolerance)) out[k].passed = false;
  };

  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    augment::CounterRng rng(seed, 0x6C6F7373);
    const int n = 8 + static_cast<int>(rng.next() % 57);
    const LossInput in = random_input(rng, n, 7);

    auto check_classification = [&](std::size_t k, auto&& loss) {
      const auto analytic = loss(in).grad;
      LossInput probe = in;
      const auto numeric = numeric_gradient(
          [&](std::span<const double> z) {
            probe.logits.assign(z.begin(), z.end());
            return loss(probe).value;
          },
          in.logits);
      record(k, relative_error(analytic, numeric));
    };
    check_classification(0, [](const LossInput& x) { return losses::dice_loss(x); });
    check_classification(1, [&](const LossInput& x) { return losses::asym_focal_loss(x, ufl.delta, ufl.gamma); });
    check_classification(
        2, [&](const LossInput& x) { return losses::asym_focal_tversky_loss(x, ufl.delta, ufl.gamma, ufl.smooth); });
    check_classification(3, [&](const LossInput& x) { return losses::unified_focal_loss(x, ufl); });

    const losses::HvInput hv = random_hv(rng, 8, 8);
    {
      const auto r = losses::hv_loss(hv.pred, hv.target, hv.mask);
      const auto analytic = concat({r.grad_h.data(), r.grad_v.data()});
      const auto x0 = concat({hv.pred.h.data(), hv.pred.v.data()});
      HoVerMaps probe = hv.pred;
      const auto numeric = numeric_gradient(
          [&](std::span<const double> x) {
            std::copy(x.begin(), x.begin() + 64, probe.h.data().begin());
            std::copy(x.begin() + 64, x.end(), probe.v.data().begin());
            return losses::hv_loss(probe, hv.target, hv.mask).value;
          },
          x0);
      record(4, relative_error(analytic, numeric));
    }
    {
      const LossInput np_in = random_input(rng, n, 2);
      const LossInput tp_in = random_input(rng, n, 7);
      const auto r = losses::composite_loss(np_in, tp_in, hv);
      const auto analytic = concat({r.grad_np, r.grad_tp, r.grad_h.data(), r.grad_v.data()});
      const auto x0 = concat({np_in.logits, tp_in.logits, hv.pred.h.data(), hv.pred.v.data()});
      LossInput np_p = np_in, tp_p = tp_in;
      losses::HvInput hv_p = hv;
      const auto numeric = numeric_gradient(
          [&](std::span<const double> x) {
            auto it = x.begin();
            std::copy(it, it + np_in.logits.size(), np_p.logits.begin());
            it += static_cast<std::ptrdiff_t>(np_in.logits.size());
            std::copy(it, it + tp_in.logits.size(), tp_p.logits.begin());
            it += static_cast<std::ptrdiff_t>(tp_in.logits.size());
            std::copy(it, it + 64, hv_p.pred.h.data().begin());
            it += 64;
            std::copy(it, it + 64, hv_p.pred.v.data().begin());
            return losses::composite_loss(np_p, tp_p, hv_p).value;
          },
          x0);
      record(5, relative_error(analytic, numeric));
    }
  }
  return out;
}

}  // namespace cshover::gradcheck
