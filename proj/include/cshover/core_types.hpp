/**
 * @file core_types.hpp
 * @brief Raster and label types shared by every stage of the pipeline.
 *
 * All rasters are row-major with channels interleaved, the same layout as the
 * (H, W, C) arrays stored in the dataset NPY files.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cshover {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/**
 * @brief Dense H x W x C raster.
 *
 * Values are stored row-major with channels interleaved:
 * index(y, x, c) = (y * W + x) * C + c.
 */
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;

  Image(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    check_shape(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  Image(int height, int width, int channels, std::vector<T> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_shape(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
      throw InvalidArgument("image buffer length does not match H*W*C");
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Image& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  template <typename U>
  bool same_extent(const Image<U>& o) const noexcept {
    return height_ == o.height() && width_ == o.width();
  }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& buffer() const noexcept { return data_; }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  static void check_shape(int h, int w, int c) {
    if (h < 0 || w < 0 || c < 1) {
      throw InvalidArgument("image extents must be non-negative with at least one channel");
    }
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using ImageU8 = Image<std::uint8_t>;
using ImageF64 = Image<double>;
using PlaneU8 = Image<std::uint8_t>;
using PlaneF64 = Image<double>;

/// H x W nucleus labels; 0 is background, each positive id is one nucleus.
using InstanceMap = Image<std::uint32_t>;
/// H x W class labels in [0, kNumClasses]; 0 is background.
using ClassMap = Image<std::uint8_t>;

using ClassId = std::uint8_t;

/// Number of nucleus classes (background excluded).
inline constexpr int kNumClasses = 6;

/// Nucleus class ids in dataset order.
enum class NucleusClass : ClassId {
  Background = 0,
  Neutrophil = 1,
  Epithelial = 2,
  Lymphocyte = 3,
  Plasma = 4,
  Eosinophil = 5,
  Connective = 6,
};

/// Report column order: pla, neu, epi, lym, eos, con.
inline constexpr std::array<ClassId, kNumClasses> kReportClassOrder = {4, 1, 2, 3, 5, 6};

std::string_view class_abbreviation(ClassId id);

/// Horizontal and vertical centroid-offset maps, values in [-1, 1].
struct HoVerMaps {
  PlaneF64 h;
  PlaneF64 v;

  int height() const noexcept { return h.height(); }
  int width() const noexcept { return h.width(); }
  friend bool operator==(const HoVerMaps&, const HoVerMaps&) = default;
};

/// Image with its instance and class annotation.
struct Sample {
  ImageU8 image;
  InstanceMap instances;
  ClassMap classes;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Throws unless every class id is in [0, kNumClasses].
void validate_class_map(const ClassMap& classes);

/// Throws unless instances and classes share extents and every labelled pixel has class > 0.
void validate_label_pair(const InstanceMap& instances, const ClassMap& classes);

template <typename T>
std::vector<Image<T>> split_channels(const Image<T>& img) {
  std::vector<Image<T>> planes;
  planes.reserve(img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    planes.emplace_back(img.height(), img.width(), 1);
  }
  const std::size_t n = img.pixel_count();
  const int nc = img.channels();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < nc; ++c) {
      planes[c][i] = img[i * nc + c];
    }
  }
  return planes;
}

template <typename T>
Image<T> merge_channels(std::span<const Image<T>> planes) {
  if (planes.empty()) {
    throw InvalidArgument("merge_channels: empty plane list");
  }
  const int h = planes.front().height();
  const int w = planes.front().width();
  for (const auto& p : planes) {
    if (p.height() != h || p.width() != w || p.channels() != 1) {
      throw InvalidArgument("inconsistent plane shapes");
    }
  }
  const int nc = static_cast<int>(planes.size());
  Image<T> out(h, w, nc);
  const std::size_t n = out.pixel_count();
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i * nc + c] = planes[c][i];
    }
  }
  return out;
}

template <typename T>
Image<T> merge_channels(const std::vector<Image<T>>& planes) {
  return merge_channels(std::span<const Image<T>>(planes));
}

}  // namespace cshover
