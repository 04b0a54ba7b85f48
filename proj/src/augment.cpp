#include "cshover/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cshover::augment {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double to_unit(std::uint64_t bits) noexcept { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint8_t clamp_round(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

int reflect(int i, int n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw InvalidArgument(std::string("augment range '") + name + "' must satisfy lo <= hi");
  }
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument(std::string("augment probability '") + name + "' must be in [0, 1]");
  }
}

struct Inverse {
  double a, b, c, d;
  double cx, cy;
};

Inverse invert(const AffineMatrix& m, int height, int width) {
  const double det = m.a * m.d - m.b * m.c;
  if (std::abs(det) < 1e-12) throw InvalidArgument("affine transform is singular");
  return {m.d / det, -m.b / det, -m.c / det, m.a / det, (width - 1) / 2.0, (height - 1) / 2.0};
}

}  // namespace

void AugmentConfig::validate() const {
  check_range(shear_deg, "shear_deg");
  check_range(scale, "scale");
  check_range(gauss_blur_sigma, "gauss_blur_sigma");
  check_range(noise_sigma, "noise_sigma");
  if (scale.lo <= 0.0) throw InvalidArgument("augment scale must be positive");
  if (gauss_blur_sigma.lo < 0.0 || noise_sigma.lo < 0.0) throw InvalidArgument("augment sigmas must be >= 0");
  if (median_kernels.empty()) throw InvalidArgument("median_kernels must not be empty");
  for (int k : median_kernels) {
    if (k < 1 || k % 2 == 0) throw InvalidArgument("median kernel sizes must be odd and positive");
  }
  if (hue_shift_deg < 0.0 || saturation_jitter < 0.0 || value_jitter < 0.0 || saturation_jitter >= 1.0 ||
      value_jitter >= 1.0) {
    throw InvalidArgument("HSV jitter bounds must be non-negative (and < 1 for saturation/value)");
  }
  check_probability(p_affine, "p_affine");
  check_probability(p_noise, "p_noise");
  check_probability(p_color, "p_color");
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t index) noexcept
    : key_(mix64(seed ^ mix64(index + kGolden))) {}

std::uint64_t CounterRng::at(std::uint64_t counter) const noexcept {
  return mix64(key_ + (counter + 1) * kGolden);
}

std::uint64_t CounterRng::next() noexcept { return at(counter_++); }

double CounterRng::uniform() noexcept { return to_unit(next()); }

double CounterRng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double CounterRng::normal() noexcept {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

AugmentParams sample_params(const AugmentConfig& cfg, std::uint64_t seed, std::uint64_t index) {
  CounterRng rng(seed, index);
  AugmentParams p;

  // Every draw is taken unconditionally so each field has a fixed counter slot.
  const double u_affine = rng.uniform();
  const double shear = rng.uniform(cfg.shear_deg.lo, cfg.shear_deg.hi);
  const double scale = rng.uniform(cfg.scale.lo, cfg.scale.hi);
  const double u_noise = rng.uniform();
  const double u_kind = rng.uniform();
  const double blur = rng.uniform(cfg.gauss_blur_sigma.lo, cfg.gauss_blur_sigma.hi);
  const double u_median = rng.uniform();
  const double noise = rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi);
  const std::uint64_t noise_seed = rng.next();
  const double u_color = rng.uniform();
  const double hue = rng.uniform(-cfg.hue_shift_deg, cfg.hue_shift_deg);
  const double sat = rng.uniform(1.0 - cfg.saturation_jitter, 1.0 + cfg.saturation_jitter);
  const double val = rng.uniform(1.0 - cfg.value_jitter, 1.0 + cfg.value_jitter);

  if (u_affine < cfg.p_affine) {
    p.affine = true;
    p.shear_deg = shear;
    p.scale = scale;
  }
  if (u_noise < cfg.p_noise) {
    const int kind = std::min(2, static_cast<int>(u_kind * 3.0));
    p.noise = kind == 0 ? NoiseKind::GaussianBlur : kind == 1 ? NoiseKind::MedianBlur : NoiseKind::AdditiveNoise;
    p.blur_sigma = blur;
    const auto n = cfg.median_kernels.size();
    p.median_kernel = cfg.median_kernels[std::min(n - 1, static_cast<std::size_t>(u_median * n))];
    p.noise_sigma = noise;
    p.noise_seed = noise_seed;
  }
  if (u_color < cfg.p_color) {
    p.color = true;
    p.hue_shift_deg = hue;
    p.saturation_scale = sat;
    p.value_scale = val;
  }
  return p;
}

AffineMatrix affine_matrix(double shear_deg, double scale, int height, int width) {
  const double t = std::tan(shear_deg * std::numbers::pi / 180.0);
  // A = Shear * Scale = [[s, s t], [0, s]], applied about the centre.
  const double a = scale, b = scale * t, c = 0.0, d = scale;
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  return {a, b, cx - a * cx - b * cy, c, d, cy - c * cx - d * cy};
}

ImageU8 warp_image(const ImageU8& img, const AffineMatrix& m) {
  const int h = img.height(), w = img.width(), nc = img.channels();
  ImageU8 out(h, w, nc);
  if (img.empty()) return out;
  const Inverse inv = invert(m, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - inv.cx, dy = y - inv.cy;
      const double sx = inv.a * dx + inv.b * dy + inv.cx;
      const double sy = inv.c * dx + inv.d * dy + inv.cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const int xa = reflect(x0, w), xb = reflect(x0 + 1, w);
      const int ya = reflect(y0, h), yb = reflect(y0 + 1, h);
      for (int c = 0; c < nc; ++c) {
        const double top = (1.0 - fx) * img.at(ya, xa, c) + fx * img.at(ya, xb, c);
        const double bot = (1.0 - fx) * img.at(yb, xa, c) + fx * img.at(yb, xb, c);
        out.at(y, x, c) = clamp_round((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

template <typename T>
Image<T> warp_labels(const Image<T>& labels, const AffineMatrix& m) {
  const int h = labels.height(), w = labels.width(), nc = labels.channels();
  Image<T> out(h, w, nc);
  if (labels.empty()) return out;
  const Inverse inv = invert(m, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - inv.cx, dy = y - inv.cy;
      const int sx = static_cast<int>(std::floor(inv.a * dx + inv.b * dy + inv.cx + 0.5));
      const int sy = static_cast<int>(std::floor(inv.c * dx + inv.d * dy + inv.cy + 0.5));
      if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
      for (int c = 0; c < nc; ++c) out.at(y, x, c) = labels.at(sy, sx, c);
    }
  }
  return out;
}

template Image<std::uint8_t> warp_labels(const Image<std::uint8_t>&, const AffineMatrix&);
template Image<std::uint32_t> warp_labels(const Image<std::uint32_t>&, const AffineMatrix&);

ImageU8 gaussian_blur(const ImageU8& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;

  const int h = img.height(), w = img.width(), nc = img.channels();
  ImageF64 tmp(h, w, nc);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img.at(y, reflect(x + i, w), c);
        tmp.at(y, x, c) = acc;
      }
  ImageU8 out(h, w, nc);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(reflect(y + i, h), x, c);
        out.at(y, x, c) = clamp_round(acc);
      }
  return out;
}

ImageU8 median_blur(const ImageU8& img, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw InvalidArgument("median kernel must be odd and positive");
  if (kernel == 1 || img.empty()) return img;
  const int r = kernel / 2;
  const int h = img.height(), w = img.width(), nc = img.channels();
  ImageU8 out(h, w, nc);
  std::vector<std::uint8_t> window(static_cast<std::size_t>(kernel) * kernel);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) window[n++] = img.at(reflect(y + dy, h), reflect(x + dx, w), c);
        std::nth_element(window.begin(), mid, window.end());
        out.at(y, x, c) = *mid;
      }
  return out;
}

ImageU8 add_gaussian_noise(const ImageU8& img, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return img;
  const CounterRng rng(seed, 0);
  ImageU8 out = img;
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double u1 = 1.0 - to_unit(rng.at(2 * i));
    const double u2 = to_unit(rng.at(2 * i + 1));
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    data[i] = clamp_round(data[i] + sigma * z);
  }
  return out;
}

ImageU8 hsv_jitter(const ImageU8& img, double hue_shift_deg, double saturation_scale, double value_scale) {
  if (img.channels() != 3) return img;
  ImageU8 out = img;
  auto d = out.data();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    const double r = d[3 * i] / 255.0, g = d[3 * i + 1] / 255.0, b = d[3 * i + 2] / 255.0;
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double delta = mx - mn;
    double hue = 0.0;
    if (delta > 0.0) {
      if (mx == r) hue = 60.0 * std::fmod((g - b) / delta, 6.0);
      else if (mx == g) hue = 60.0 * ((b - r) / delta + 2.0);
      else hue = 60.0 * ((r - g) / delta + 4.0);
    }
    double s = mx > 0.0 ? delta / mx : 0.0;
    double v = mx;

    hue = std::fmod(hue + hue_shift_deg, 360.0);
    if (hue < 0.0) hue += 360.0;
    s = std::clamp(s * saturation_scale, 0.0, 1.0);
    v = std::clamp(v * value_scale, 0.0, 1.0);

    const double cc = v * s;
    const double hp = hue / 60.0;
    const double xx = cc * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    switch (static_cast<int>(hp) % 6) {
      case 0: r1 = cc; g1 = xx; break;
      case 1: r1 = xx; g1 = cc; break;
      case 2: g1 = cc; b1 = xx; break;
      case 3: g1 = xx; b1 = cc; break;
      case 4: r1 = xx; b1 = cc; break;
      default: r1 = cc; b1 = xx; break;
    }
    const double m = v - cc;
    d[3 * i] = clamp_round((r1 + m) * 255.0);
    d[3 * i + 1] = clamp_round((g1 + m) * 255.0);
    d[3 * i + 2] = clamp_round((b1 + m) * 255.0);
  }
  return out;
}

Sample apply(const AugmentParams& params, const Sample& sample) {
  if (!sample.image.same_extent(sample.instances) || !sample.image.same_extent(sample.classes)) {
    throw InvalidArgument("sample image and labels differ in shape");
  }
  Sample out = sample;
  if (params.affine) {
    const auto m = affine_matrix(params.shear_deg, params.scale, sample.image.height(), sample.image.width());
    out.image = warp_image(sample.image, m);
    out.instances = warp_labels(sample.instances, m);
    out.classes = warp_labels(sample.classes, m);
  }
  switch (params.noise) {
    case NoiseKind::None: break;
    case NoiseKind::GaussianBlur: out.image = gaussian_blur(out.image, params.blur_sigma); break;
    case NoiseKind::MedianBlur: out.image = median_blur(out.image, params.median_kernel); break;
    case NoiseKind::AdditiveNoise:
      out.image = add_gaussian_noise(out.image, params.noise_sigma, params.noise_seed);
      break;
  }
  if (params.color) {
    out.image = hsv_jitter(out.image, params.hue_shift_deg, params.saturation_scale, params.value_scale);
  }
  return out;
}

}  // namespace cshover::augment
