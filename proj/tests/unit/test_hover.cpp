#include <doctest.h>

#include <cmath>
#include <random>

#include "cshover/hover.hpp"
#include "oracles/fixtures.hpp"

using namespace cshover;
using namespace cshover::hover;

namespace {

PredictionMaps perfect_predictions(const InstanceMap& gt) {
  const auto t = make_targets(gt);
  PlaneF64 np(gt.height(), gt.width(), 1);
  for (std::size_t i = 0; i < np.pixel_count(); ++i) np[i] = t.np[i];
  return {np, t.hv, std::nullopt};
}

double iou(const InstanceMap& a, std::uint32_t ia, const InstanceMap& b, std::uint32_t ib) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    const bool x = a[i] == ia, y = b[i] == ib;
    inter += x && y;
    uni += x || y;
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

}  // namespace

TEST_CASE("single-pixel instance has zero offsets") {
  InstanceMap m(5, 5, 1);
  m.at(2, 3) = 4;
  const auto t = make_targets(m);
  CHECK(t.hv.h.at(2, 3) == 0.0);
  CHECK(t.hv.v.at(2, 3) == 0.0);
  CHECK(t.np.at(2, 3) == 1);
  CHECK(t.np.at(0, 0) == 0);
}

TEST_CASE("horizontal bar spans -1..1") {
  InstanceMap m(3, 5, 1);
  fixtures::paint_rect(m, 1, 1, 1, 3, 1);
  const auto t = make_targets(m);
  CHECK(t.hv.h.at(1, 1) == -1.0);
  CHECK(t.hv.h.at(1, 2) == 0.0);
  CHECK(t.hv.h.at(1, 3) == 1.0);
  for (int x = 1; x <= 3; ++x) CHECK(t.hv.v.at(1, x) == 0.0);
}

TEST_CASE("square gives row and column ramps") {
  InstanceMap m(5, 5, 1);
  fixtures::paint_rect(m, 1, 1, 3, 3, 2);
  const auto t = make_targets(m);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) {
      CHECK(t.hv.h.at(y, x) == x - 2.0);
      CHECK(t.hv.v.at(y, x) == y - 2.0);
    }
  CHECK(t.hv.h.at(0, 0) == 0.0);
}

TEST_CASE("targets are bounded and extremes hit +-1") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = fixtures::random_instances(rng, 24, 24, 6);
    const auto t = make_targets(m);
    for (std::size_t i = 0; i < m.pixel_count(); ++i) {
      CHECK(std::abs(t.hv.h[i]) <= 1.0);
      CHECK(std::abs(t.hv.v[i]) <= 1.0);
      if (!m[i]) {
        CHECK(t.hv.h[i] == 0.0);
        CHECK(t.np[i] == 0);
      }
    }
  }
}

TEST_CASE("targets ignore label values") {
  InstanceMap a(10, 10, 1), b(10, 10, 1);
  fixtures::paint_rect(a, 1, 1, 4, 5, 1);
  fixtures::paint_rect(a, 6, 2, 3, 7, 2);
  fixtures::paint_rect(b, 1, 1, 4, 5, 900);
  fixtures::paint_rect(b, 6, 2, 3, 7, 17);
  const auto ta = make_targets(a), tb = make_targets(b);
  CHECK(ta.hv.h == tb.hv.h);
  CHECK(ta.hv.v == tb.hv.v);
}

TEST_CASE("sobel of a constant plane is zero") {
  PlaneF64 p(9, 11, 1, 3.5);
  for (int ap : {3, 5, 7}) {
    for (auto axis : {Axis::X, Axis::Y}) {
      const auto g = sobel_plane(p, axis, ap);
      for (auto v : g.data()) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("sobel of a horizontal ramp") {
  PlaneF64 p(7, 7, 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) p.at(y, x) = x;
  const auto gx = sobel_plane(p, Axis::X, 3);
  const auto gy = sobel_plane(p, Axis::Y, 3);
  for (int y = 0; y < 7; ++y)
    for (int x = 1; x < 6; ++x) CHECK(gx.at(y, x) == 8.0);
  for (auto v : gy.data()) CHECK(v == 0.0);
  CHECK(gx.at(3, 0) == 0.0);  // reflect-101 makes the border symmetric
}

TEST_CASE("sobel kernels") {
  const auto k3 = sobel_kernels(3);
  CHECK(k3.smooth == std::vector<double>{1, 2, 1});
  CHECK(k3.diff == std::vector<double>{-1, 0, 1});
  const auto k5 = sobel_kernels(5);
  CHECK(k5.smooth == std::vector<double>{1, 4, 6, 4, 1});
  CHECK(k5.diff == std::vector<double>{-1, -2, 0, 2, 1});
  CHECK_THROWS_AS(sobel_kernels(4), InvalidArgument);
}

TEST_CASE("sobel X and Y are related by transposition") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  PlaneF64 p(8, 12, 1), pt(12, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 12; ++x) pt.at(x, y) = p.at(y, x) = u(rng);
  const auto gx = sobel_plane(p, Axis::X, 5);
  const auto gyt = sobel_plane(pt, Axis::Y, 5);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 12; ++x) CHECK(gx.at(y, x) == doctest::Approx(gyt.at(x, y)));
}

TEST_CASE("sobel adjoint satisfies <Sa, b> = <a, S^T b>") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  PlaneF64 a(9, 10, 1), b(9, 10, 1);
  for (auto& v : a.data()) v = u(rng);
  for (auto& v : b.data()) v = u(rng);
  for (auto axis : {Axis::X, Axis::Y}) {
    const auto sa = sobel_plane(a, axis, 5);
    const auto stb = sobel_plane_adjoint(b, axis, 5);
    double l = 0, r = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
      l += sa[i] * b[i];
      r += a[i] * stb[i];
    }
    CHECK(l == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("label_components") {
  PlaneU8 b(6, 6, 1);
  b.at(0, 0) = 1;
  b.at(1, 1) = 1;  // diagonal neighbour joins under 8-connectivity
  b.at(0, 4) = 1;
  b.at(4, 2) = 1;
  b.at(4, 3) = 1;
  b.at(5, 3) = 1;
  const auto m = label_components(b, 0);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.at(1, 1) == 1);
  CHECK(m.at(0, 4) == 2);
  CHECK(m.at(4, 2) == 3);
  CHECK(m.at(5, 3) == 3);
  const auto filtered = label_components(b, 2);
  CHECK(filtered.at(0, 4) == 0);
  CHECK(filtered.at(0, 0) == 1);
  CHECK(filtered.at(4, 2) == 2);
  CHECK(label_components(PlaneU8(4, 4, 1), 0) == InstanceMap(4, 4, 1));
}

TEST_CASE("binary_open removes thin structures") {
  PlaneU8 b(20, 20, 1);
  for (int y = 4; y < 14; ++y)
    for (int x = 4; x < 14; ++x) b.at(y, x) = 1;
  for (int x = 14; x < 19; ++x) b.at(8, x) = 1;
  const auto o = binary_open(b, 2);
  CHECK(o.at(8, 17) == 0);
  CHECK(o.at(8, 8) == 1);
  CHECK(binary_open(b, 0) == b);
}

TEST_CASE("watershed splits a ridge between two markers") {
  PlaneF64 s(1, 7, 1, std::vector<double>{0, 1, 2, 3, 2, 1, 0});
  InstanceMap markers(1, 7, 1);
  markers[0] = 1;
  markers[6] = 2;
  const PlaneU8 mask(1, 7, 1, 1);
  const auto out = watershed(s, markers, mask);
  CHECK(out.buffer() == std::vector<std::uint32_t>{1, 1, 1, 1, 2, 2, 2});
}

TEST_CASE("vote_classes takes the majority foreground class") {
  InstanceMap inst(1, 4, 1, std::vector<std::uint32_t>{1, 1, 1, 2});
  ImageF64 tp(1, 4, 7);
  tp[0 * 7 + 3] = 1.0;
  tp[1 * 7 + 3] = 1.0;
  tp[2 * 7 + 0] = 1.0;  // background vote is ignored
  tp[3 * 7 + 0] = 1.0;
  const auto cls = vote_classes(inst, 2, tp);
  CHECK(cls == std::vector<ClassId>{3, 0});
}

TEST_CASE("postprocess of empty predictions is empty") {
  const PredictionMaps maps{PlaneF64(32, 32, 1), {PlaneF64(32, 32, 1), PlaneF64(32, 32, 1)}, std::nullopt};
  const auto r = postprocess(maps, {});
  CHECK(r.classes.empty());
  CHECK(r.instances == InstanceMap(32, 32, 1));
}

TEST_CASE("postprocess rejects mismatched maps") {
  const PredictionMaps maps{PlaneF64(32, 32, 1), {PlaneF64(32, 31, 1), PlaneF64(32, 32, 1)}, std::nullopt};
  CHECK_THROWS_AS(postprocess(maps, {}), InvalidArgument);
}

TEST_CASE("perfect maps of separated squares are recovered exactly") {
  InstanceMap gt(64, 64, 1);
  fixtures::paint_rect(gt, 5, 5, 12, 12, 1);
  fixtures::paint_rect(gt, 5, 30, 15, 10, 2);
  fixtures::paint_rect(gt, 35, 10, 20, 20, 3);
  const auto r = postprocess(perfect_predictions(gt), {});
  CHECK(fixtures::canonical(r.instances) == fixtures::canonical(gt));
}

TEST_CASE("perfect maps of separated ellipses are recovered exactly") {
  std::mt19937_64 rng(21);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = fixtures::separated_scene(rng, 96, 96, 8);
    exact += fixtures::canonical(postprocess(perfect_predictions(gt), {}).instances) == fixtures::canonical(gt);
  }
  CHECK(exact >= 19);
}

TEST_CASE("touching squares are separated") {
  InstanceMap gt(32, 32, 1);
  fixtures::paint_rect(gt, 10, 6, 9, 9, 1);
  fixtures::paint_rect(gt, 10, 15, 9, 9, 2);
  const auto r = postprocess(perfect_predictions(gt), {});
  const auto left = r.instances.at(14, 9), right = r.instances.at(14, 20);
  REQUIRE(left != 0);
  REQUIRE(right != 0);
  CHECK(left != right);
  CHECK(iou(gt, 1, r.instances, left) >= 0.9);
  CHECK(iou(gt, 2, r.instances, right) >= 0.9);
}

TEST_CASE("postprocess is idempotent on its own output") {
  std::mt19937_64 rng(8);
  const auto gt = fixtures::separated_scene(rng, 64, 64, 5);
  const auto once = postprocess(perfect_predictions(gt), {}).instances;
  const auto twice = postprocess(perfect_predictions(once), {}).instances;
  CHECK(once == twice);
}

TEST_CASE("class map follows the vote") {
  InstanceMap gt(32, 32, 1);
  fixtures::paint_rect(gt, 4, 4, 10, 10, 1);
  fixtures::paint_rect(gt, 18, 18, 10, 10, 2);
  auto maps = perfect_predictions(gt);
  ImageF64 tp(32, 32, 7);
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) tp[i * 7 + (gt[i] == 1 ? 5 : gt[i] == 2 ? 2 : 0)] = 1.0;
  maps.tp_prob = tp;
  const auto r = postprocess(maps, {});
  CHECK(r.classes == std::vector<ClassId>{5, 2});
  const auto cm = r.class_map();
  CHECK(cm.at(8, 8) == 5);
  CHECK(cm.at(20, 20) == 2);
  CHECK(cm.at(0, 0) == 0);
}
