/**
 * @file augment.hpp
 * @brief Seeded, label-consistent augmentation: shear/scale warp, one of
 * Gaussian blur / median blur / additive noise, and HSV jitter.
 *
 * Parameters are a pure function of (seed, index) so workers can augment
 * samples in any order and still reproduce the same dataset.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::augment {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  Range shear_deg{-5.0, 5.0};
  Range scale{0.8, 1.2};
  Range gauss_blur_sigma{0.0, 1.0};
  std::vector<int> median_kernels{3, 5};
  /// Additive Gaussian noise standard deviation in 8-bit units.
  Range noise_sigma{0.0, 10.0};
  /// Hue shift in degrees, applied as +/- this bound.
  double hue_shift_deg = 8.0;
  /// Saturation and value scale factors are drawn from 1 +/- these bounds.
  double saturation_jitter = 0.2;
  double value_jitter = 0.2;

  double p_affine = 0.5;
  /// Probability of applying one of blur / median / noise (chosen uniformly).
  double p_noise = 0.5;
  double p_color = 0.5;

  void validate() const;
};

enum class NoiseKind { None, GaussianBlur, MedianBlur, AdditiveNoise };

struct AugmentParams {
  bool affine = false;
  double shear_deg = 0.0;
  double scale = 1.0;

  NoiseKind noise = NoiseKind::None;
  double blur_sigma = 0.0;
  int median_kernel = 3;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;

  bool color = false;
  double hue_shift_deg = 0.0;
  double saturation_scale = 1.0;
  double value_scale = 1.0;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/**
 * @brief Counter-based generator: output k is a pure function of (key, k).
 *
 * Streams derived from different (seed, index) keys are independent of the
 * order in which they are consumed.
 */
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t index) noexcept;

  std::uint64_t next() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;

  /// Value at an arbitrary counter position; does not advance the stream.
  std::uint64_t at(std::uint64_t counter) const noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

AugmentParams sample_params(const AugmentConfig& cfg, std::uint64_t seed, std::uint64_t index);

/// Forward 2x3 matrix (shear after scale) about the image centre.
struct AffineMatrix {
  double a, b, tx;
  double c, d, ty;
};
AffineMatrix affine_matrix(double shear_deg, double scale, int height, int width);

/// Applies the parameters to an image and its labels. Labels use nearest-neighbour
/// sampling with 0 outside the source; the image uses bilinear sampling with
/// reflected borders. Photometric operations touch the image only.
Sample apply(const AugmentParams& params, const Sample& sample);

// Individual operations, exposed for tests.
ImageU8 warp_image(const ImageU8& img, const AffineMatrix& m);
template <typename T>
Image<T> warp_labels(const Image<T>& labels, const AffineMatrix& m);
ImageU8 gaussian_blur(const ImageU8& img, double sigma);
ImageU8 median_blur(const ImageU8& img, int kernel);
ImageU8 add_gaussian_noise(const ImageU8& img, double sigma, std::uint64_t seed);
/// HSV jitter; only defined for 3-channel RGB images, other channel counts pass through.
ImageU8 hsv_jitter(const ImageU8& img, double hue_shift_deg, double saturation_scale, double value_scale);

}  // namespace cshover::augment
