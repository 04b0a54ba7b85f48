#include "cshover/sam_opt.hpp"

#include <cmath>

namespace cshover::sam {

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Evaluation evaluate(const Objective& f, std::span<const double> w) {
  Evaluation e = f(w);
  if (e.grad.size() != w.size()) throw InvalidArgument("objective gradient length does not match parameters");
  if (!std::isfinite(e.loss)) throw DivergenceError();
  for (double g : e.grad)
    if (!std::isfinite(g)) throw DivergenceError();
  return e;
}

}  // namespace

void SamConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw InvalidArgument("rho must be finite and >= 0");
  if (!(eps_guard >= 0.0)) throw InvalidArgument("eps_guard must be >= 0");
  if (!(base.lr > 0.0) || !std::isfinite(base.lr)) throw InvalidArgument("learning rate must be > 0");
  if (base.kind == BaseKind::SgdMomentum && !(base.momentum >= 0.0 && base.momentum < 1.0)) {
    throw InvalidArgument("momentum must be in [0, 1)");
  }
}

std::vector<double> perturbation(std::span<const double> g, double rho, double eps_guard) {
  std::vector<double> eps(g.size(), 0.0);
  const double norm = l2_norm(g);
  if (norm == 0.0) return eps;
  const double scale = rho / (norm + eps_guard);
  for (std::size_t i = 0; i < g.size(); ++i) eps[i] = scale * g[i];
  return eps;
}

std::vector<double> base_step(std::span<const double> w, std::span<const double> g, const BaseOptimizer& base) {
  std::vector<double> out(w.begin(), w.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= base.lr * g[i];
  return out;
}

SamOptimizer::SamOptimizer(SamConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SamOptimizer::apply_base(std::vector<double>& w, std::span<const double> g) {
  if (cfg_.base.kind == BaseKind::Sgd) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg_.base.lr * g[i];
    return;
  }
  if (velocity_.size() != w.size()) velocity_.assign(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    velocity_[i] = cfg_.base.momentum * velocity_[i] + g[i];
    w[i] -= cfg_.base.lr * velocity_[i];
  }
}

std::vector<double> SamOptimizer::step(std::span<const double> w, std::span<const double> g1, const Objective& f) {
  if (g1.size() != w.size()) throw InvalidArgument("gradient length does not match parameters");
  const auto eps = perturbation(g1, cfg_.rho, cfg_.eps_guard);
  std::vector<double> probe(w.begin(), w.end());
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] += eps[i];
  const Evaluation e2 = evaluate(f, probe);
  std::vector<double> out(w.begin(), w.end());
  apply_base(out, e2.grad);
  return out;
}

std::vector<double> SamOptimizer::step(std::span<const double> w, const Objective& f) {
  const Evaluation e1 = evaluate(f, w);
  return step(w, e1.grad, f);
}

std::vector<double> sam_step(std::span<const double> w, const Objective& f, const SamConfig& cfg) {
  SamOptimizer opt(cfg);
  return opt.step(w, f);
}

OptimizeResult optimize(const Objective& f, std::span<const double> w0, const SamConfig& cfg) {
  if (cfg.steps < 1) throw InvalidArgument("optimize needs at least one step");
  SamOptimizer opt(cfg);
  OptimizeResult r;
  r.w.assign(w0.begin(), w0.end());
  r.trace.reserve(cfg.steps + 1);
  for (std::size_t k = 0;; ++k) {
    const Evaluation e = evaluate(f, r.w);
    r.trace.push_back({k, e.loss, l2_norm(e.grad)});
    if (k == cfg.steps) break;
    r.w = opt.step(r.w, e.grad, f);
  }
  return r;
}

}  // namespace cshover::sam
