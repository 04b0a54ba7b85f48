/**
 * @file npy_io.hpp
 * @brief NPY v1.0 reader/writer and the images/labels dataset accessor.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::npy {

class NpyError : public Error {
 public:
  using Error::Error;
};

enum class DType { U1, U2, I4, U4, I8, F4, F8 };

std::size_t dtype_size(DType t) noexcept;
/// Canonical descr string as emitted by the writer, e.g. "<f4".
std::string dtype_descr(DType t);

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return DType::U1;
  else if constexpr (std::is_same_v<T, std::uint16_t>) return DType::U2;
  else if constexpr (std::is_same_v<T, std::int32_t>) return DType::I4;
  else if constexpr (std::is_same_v<T, std::uint32_t>) return DType::U4;
  else if constexpr (std::is_same_v<T, std::int64_t>) return DType::I8;
  else if constexpr (std::is_same_v<T, float>) return DType::F4;
  else if constexpr (std::is_same_v<T, double>) return DType::F8;
  else static_assert(sizeof(T) == 0, "unsupported NPY element type");
}

/**
 * @brief C-order array with a little-endian payload.
 *
 * The payload is kept as raw bytes so a read followed by a write reproduces
 * the input stream exactly.
 */
class NpyArray {
 public:
  NpyArray() = default;
  NpyArray(DType dtype, std::vector<std::size_t> shape, std::vector<std::uint8_t> payload);

  template <typename T>
  static NpyArray from_values(std::vector<std::size_t> shape, std::span<const T> values);

  DType dtype() const noexcept { return dtype_; }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t element_count() const noexcept;
  const std::vector<std::uint8_t>& payload() const noexcept { return payload_; }

  /// Element i converted to T (no range check beyond the conversion itself).
  template <typename T>
  T value(std::size_t i) const;

  /// All elements converted to T.
  template <typename T>
  std::vector<T> values() const;

  friend bool operator==(const NpyArray&, const NpyArray&) = default;

 private:
  DType dtype_ = DType::U1;
  std::vector<std::size_t> shape_;
  std::vector<std::uint8_t> payload_;
};

NpyArray read_npy(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_npy(const NpyArray& array);

NpyArray load_npy(const std::filesystem::path& path);
void save_npy(const std::filesystem::path& path, const NpyArray& array);

/// Stacks N images of equal shape into an (N, H, W, C) array.
template <typename T>
NpyArray stack_images(std::span<const Image<T>> images);

/// Stacks (instances, classes) pairs into an (N, H, W, 2) <i4 label array.
NpyArray stack_labels(std::span<const InstanceMap> instances, std::span<const ClassMap> classes);

/**
 * @brief Read-only view over an images.npy / labels.npy pair.
 *
 * images: (N, H, W, 3) u8. labels: (N, H, W, 2) integer; plane 0 holds
 * instance ids, plane 1 class ids.
 */
class DatasetHandle {
 public:
  DatasetHandle(NpyArray images, NpyArray labels);

  std::size_t size() const noexcept { return n_; }
  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }

  ImageU8 image(std::size_t index) const;
  InstanceMap instances(std::size_t index) const;
  ClassMap classes(std::size_t index) const;
  Sample sample(std::size_t index) const;

 private:
  void check_index(std::size_t index) const;

  NpyArray images_;
  NpyArray labels_;
  std::size_t n_ = 0;
  int h_ = 0;
  int w_ = 0;
};

DatasetHandle load_dataset(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path);

/// Validates an (N, H, W, 2) label array and splits sample `index` into maps.
void split_label_sample(const NpyArray& labels, std::size_t index, InstanceMap& instances,
                        ClassMap& classes);

}  // namespace cshover::npy
