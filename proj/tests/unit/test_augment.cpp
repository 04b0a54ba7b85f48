#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "cshover/augment.hpp"
#include "oracles/fixtures.hpp"

using namespace cshover;
using namespace cshover::augment;

namespace {

Sample make_sample(std::uint64_t seed, int h = 48, int w = 48) {
  std::mt19937_64 rng(seed);
  Sample s;
  s.image = fixtures::random_image(rng, h, w, 3);
  s.instances = fixtures::separated_scene(rng, h, w, 4);
  s.classes = fixtures::classes_for(rng, s.instances);
  return s;
}

std::set<std::uint32_t> ids(const InstanceMap& m) {
  std::set<std::uint32_t> out(m.data().begin(), m.data().end());
  out.erase(0);
  return out;
}

}  // namespace

TEST_CASE("sample_params is a pure function of seed and index") {
  const AugmentConfig cfg;
  for (std::uint64_t i = 0; i < 50; ++i) {
    CHECK(sample_params(cfg, 7, i) == sample_params(cfg, 7, i));
  }
  int differ = 0;
  for (std::uint64_t i = 0; i < 50; ++i) differ += !(sample_params(cfg, 7, i) == sample_params(cfg, 8, i));
  CHECK(differ > 40);
}

TEST_CASE("counter rng is order independent") {
  CounterRng a(3, 4);
  std::vector<std::uint64_t> seq;
  for (int i = 0; i < 10; ++i) seq.push_back(a.next());
  const CounterRng b(3, 4);
  for (int i = 9; i >= 0; --i) CHECK(b.at(i) == seq[i]);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("degenerate ranges give exact draws") {
  AugmentConfig cfg;
  cfg.shear_deg = {2.0, 2.0};
  cfg.scale = {1.1, 1.1};
  cfg.p_affine = 1.0;
  const auto p = sample_params(cfg, 1, 2);
  CHECK(p.affine);
  CHECK(p.shear_deg == 2.0);
  CHECK(p.scale == 1.1);
}

TEST_CASE("shear draws stay in range with the expected mean") {
  AugmentConfig cfg;
  cfg.p_affine = 1.0;
  const int n = 10000;
  double sum = 0.0;
  bool in_range = true;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_params(cfg, 42, i);
    in_range = in_range && p.shear_deg >= -5.0 && p.shear_deg <= 5.0;
    sum += p.shear_deg;
  }
  CHECK(in_range);
  const double sigma = 10.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / n) < 3.0 * sigma);
}

TEST_CASE("invalid configs are rejected") {
  AugmentConfig cfg;
  cfg.scale = {0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.shear_deg = {3.0, -3.0};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.median_kernels = {4};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.p_color = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("identity parameters leave the sample untouched") {
  const auto s = make_sample(1);
  const auto out = apply(AugmentParams{}, s);
  CHECK(out.image == s.image);
  CHECK(out.instances == s.instances);
  CHECK(out.classes == s.classes);

  AugmentParams p;
  p.affine = true;
  const auto same = apply(p, s);
  CHECK(same.image == s.image);
  CHECK(same.instances == s.instances);
}

TEST_CASE("affine matrix keeps the centre fixed") {
  const auto m = affine_matrix(5.0, 1.2, 31, 41);
  const double cx = 20.0, cy = 15.0;
  CHECK(m.a * cx + m.b * cy + m.tx == doctest::Approx(cx));
  CHECK(m.c * cx + m.d * cy + m.ty == doctest::Approx(cy));
}

TEST_CASE("warped labels only contain source ids") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = make_sample(seed);
    AugmentParams p;
    p.affine = true;
    p.scale = 1.2;
    p.shear_deg = -4.0;
    const auto out = apply(p, s);
    const auto src = ids(s.instances), dst = ids(out.instances);
    for (auto id : dst) CHECK(src.count(id) == 1);
    CHECK_NOTHROW(validate_label_pair(out.instances, out.classes));
  }
}

TEST_CASE("shear keeps the area of a square within 10 percent") {
  InstanceMap m(64, 64, 1);
  fixtures::paint_rect(m, 22, 22, 20, 20, 1);
  const auto out = warp_labels(m, affine_matrix(5.0, 1.0, 64, 64));
  std::size_t area = 0;
  for (auto v : out.data()) area += v == 1;
  CHECK(static_cast<double>(area) == doctest::Approx(400.0).epsilon(0.1));
}

TEST_CASE("photometric operations leave labels identical") {
  const auto s = make_sample(5);
  AugmentParams p;
  p.noise = NoiseKind::AdditiveNoise;
  p.noise_sigma = 8.0;
  p.noise_seed = 99;
  p.color = true;
  p.hue_shift_deg = 6.0;
  p.saturation_scale = 0.9;
  p.value_scale = 1.1;
  const auto out = apply(p, s);
  CHECK(out.instances == s.instances);
  CHECK(out.classes == s.classes);
  CHECK_FALSE(out.image == s.image);
  for (auto kind : {NoiseKind::GaussianBlur, NoiseKind::MedianBlur}) {
    p.noise = kind;
    p.blur_sigma = 0.8;
    p.median_kernel = 5;
    CHECK(apply(p, s).instances == s.instances);
  }
}

TEST_CASE("blur and median of a constant image are identities") {
  ImageU8 c(10, 12, 3, 77);
  CHECK(gaussian_blur(c, 1.0) == c);
  CHECK(median_blur(c, 5) == c);
  CHECK(gaussian_blur(c, 0.0) == c);
}

TEST_CASE("median removes an isolated spike") {
  ImageU8 img(9, 9, 1, 10);
  img.at(4, 4) = 250;
  CHECK(median_blur(img, 3).at(4, 4) == 10);
}

TEST_CASE("noise is reproducible from its seed") {
  ImageU8 img(16, 16, 3, 128);
  CHECK(add_gaussian_noise(img, 5.0, 1) == add_gaussian_noise(img, 5.0, 1));
  CHECK_FALSE(add_gaussian_noise(img, 5.0, 1) == add_gaussian_noise(img, 5.0, 2));
  CHECK(add_gaussian_noise(img, 0.0, 1) == img);
}

TEST_CASE("hsv jitter with neutral parameters is the identity") {
  std::mt19937_64 rng(3);
  const auto img = fixtures::random_image(rng, 12, 12, 3);
  CHECK(hsv_jitter(img, 0.0, 1.0, 1.0) == img);
  const auto grey = ImageU8(4, 4, 3, 100);
  CHECK(hsv_jitter(grey, 8.0, 1.2, 1.0) == grey);
  const auto six = fixtures::random_image(rng, 4, 4, 6);
  CHECK(hsv_jitter(six, 8.0, 1.2, 0.9) == six);
}
