/**
 * @file config.hpp
 * @brief Plain-text `key = value` configuration with [section] headers.
 *
 *   [stack]     channel_order, clahe, tiles_x, tiles_y, clip_limit, derive_from_enhanced
 *   [augment]   shear_deg, scale, gauss_blur_sigma, median_kernels, noise_sigma,
 *               hue_shift_deg, saturation_jitter, value_jitter, p_affine, p_noise, p_color
 *   [postproc]  np_threshold, sobel_aperture, boundary_threshold, min_object_px,
 *               marker_open_radius, smooth_kernel
 *   [metrics]   iou_threshold
 *
 * Ranges and lists are comma separated ("-5, 5"; "B,G,R,S,Cr,Cb").
 * Unknown sections or keys are rejected.
 */
#pragma once

#include <filesystem>
#include <string>

#include "cshover/augment.hpp"
#include "cshover/hover.hpp"
#include "cshover/preprocess.hpp"

namespace cshover::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CliConfig {
  preprocess::StackConfig stack;
  augment::AugmentConfig augment;
  hover::PostprocParams postproc;
  double iou_threshold = 0.5;

  void validate() const;
};

CliConfig parse_config(const std::string& text);
CliConfig load_config(const std::filesystem::path& path);
/// Serialises every field; parse_config(to_string(c)) reproduces c.
std::string to_string(const CliConfig& cfg);

}  // namespace cshover::config
