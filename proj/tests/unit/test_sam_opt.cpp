#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "cshover/sam_opt.hpp"

using namespace cshover;
using namespace cshover::sam;

namespace {

Evaluation quadratic(std::span<const double> w) {
  Evaluation e;
  for (double x : w) e.loss += 0.5 * x * x;
  e.grad.assign(w.begin(), w.end());
  return e;
}

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("hand-computed SAM step") {
  SamConfig cfg;
  cfg.rho = 0.1;
  cfg.base.lr = 0.1;
  const std::vector<double> w{1.0};
  const auto out = sam_step(w, quadratic, cfg);
  CHECK(out[0] == doctest::Approx(0.89).epsilon(1e-12));
}

TEST_CASE("rho = 0 is bitwise the base step") {
  SamConfig cfg;
  cfg.rho = 0.0;
  const Objective f = [](std::span<const double> w) {
    Evaluation e;
    for (double x : w) {
      e.loss += std::cosh(x);
      e.grad.push_back(std::sinh(x) + 0.3 * x * x);
    }
    return e;
  };
  const std::vector<double> w{0.3, -1.7, 2.25, 1e-3};
  const auto g = f(w).grad;
  CHECK(sam_step(w, f, cfg) == base_step(w, g, cfg.base));
}

TEST_CASE("stationary point does not move") {
  const std::vector<double> w{0.0, 0.0, 0.0};
  CHECK(sam_step(w, quadratic, {}) == w);
  CHECK(perturbation(std::vector<double>{0.0, 0.0}, 0.05, 1e-12) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("second gradient is taken at the perturbed point") {
  std::vector<std::vector<double>> calls;
  const Objective f = [&](std::span<const double> w) {
    calls.emplace_back(w.begin(), w.end());
    return quadratic(w);
  };
  SamConfig cfg;
  cfg.rho = 0.2;
  const std::vector<double> w{3.0, -4.0};
  sam_step(w, f, cfg);
  REQUIRE(calls.size() == 2);
  CHECK(calls[0] == w);
  const double n = 5.0 + cfg.eps_guard;
  CHECK(calls[1][0] == 3.0 + cfg.rho * 3.0 / n);
  CHECK(calls[1][1] == -4.0 + cfg.rho * -4.0 / n);
}

TEST_CASE("perturbation norm is bounded by rho") {
  const std::vector<double> g{1e-9, 3.0, -7.0};
  CHECK(norm(perturbation(g, 0.05, 1e-12)) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(norm(perturbation(std::vector<double>{1e-14}, 0.05, 1e-12)) <= 0.05);
}

TEST_CASE("quadratic trace follows the closed-form recurrence") {
  SamConfig cfg;
  cfg.steps = 20;
  std::vector<double> w{1.0, -2.0, 0.5};
  const auto res = optimize(quadratic, w, cfg);
  REQUIRE(res.trace.size() == 21);
  for (std::size_t k = 0; k <= cfg.steps; ++k) {
    CHECK(std::abs(res.trace[k].loss - 0.5 * norm(w) * norm(w)) < 1e-12);
    CHECK(res.trace[k].step == k);
    const double n = norm(w);
    for (auto& x : w) x = x - cfg.base.lr * (x + cfg.rho * x / (n + cfg.eps_guard));
  }
}

TEST_CASE("quadratic loss decreases strictly by four orders of magnitude") {
  SamConfig cfg;
  cfg.steps = 100;
  const std::vector<double> w0{1800.0, -1200.0, 600.0, 2400.0};
  const auto res = optimize(quadratic, w0, cfg);
  bool strict = true;
  for (std::size_t k = 1; k < res.trace.size(); ++k) strict = strict && res.trace[k].loss < res.trace[k - 1].loss;
  CHECK(strict);
  CHECK(res.trace.back().loss < 1e-4 * res.trace.front().loss);
}

TEST_CASE("single-step trace and determinism") {
  SamConfig cfg;
  cfg.steps = 1;
  const std::vector<double> w0{0.4, 0.1};
  const auto a = optimize(quadratic, w0, cfg);
  CHECK(a.trace.size() == 2);
  cfg.steps = 30;
  cfg.base.kind = BaseKind::SgdMomentum;
  const auto b = optimize(quadratic, w0, cfg), c = optimize(quadratic, w0, cfg);
  CHECK(b.trace == c.trace);
  CHECK(b.w == c.w);
}

TEST_CASE("momentum keeps a velocity buffer") {
  SamConfig cfg;
  cfg.rho = 0.0;
  cfg.base = {BaseKind::SgdMomentum, 0.1, 0.9};
  SamOptimizer opt(cfg);
  std::vector<double> w{1.0};
  w = opt.step(w, quadratic);  // v = 1, w = 0.9
  CHECK(w[0] == doctest::Approx(0.9));
  w = opt.step(w, quadratic);  // v = 0.9 + 0.9, w = 0.9 - 0.18
  CHECK(w[0] == doctest::Approx(0.72));
}

TEST_CASE("non-finite objectives raise") {
  const Objective bad = [](std::span<const double> w) {
    Evaluation e = quadratic(w);
    e.loss = std::numeric_limits<double>::quiet_NaN();
    return e;
  };
  const std::vector<double> w{1.0};
  CHECK_THROWS_AS(sam_step(w, bad, {}), DivergenceError);
  const Objective inf_grad = [](std::span<const double> w) {
    Evaluation e = quadratic(w);
    e.grad[0] = std::numeric_limits<double>::infinity();
    return e;
  };
  try {
    sam_step(w, inf_grad, {});
    FAIL("expected an exception");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()) == "objective diverged");
  }
}

TEST_CASE("config validation") {
  SamConfig cfg;
  cfg.rho = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.base.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.steps = 0;
  CHECK_THROWS_AS(optimize(quadratic, std::vector<double>{1.0}, cfg), InvalidArgument);
}
