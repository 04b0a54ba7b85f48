/**
 * @file hover.hpp
 * @brief HoVer target generation and marker-controlled watershed
 * post-processing of predicted np / hv / tp maps.
 */
#pragma once

#include <optional>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::hover {

struct Targets {
  HoVerMaps hv;
  PlaneU8 np;  ///< 1 on nucleus pixels, 0 on background
};

/**
 * @brief Per-pixel offsets to the instance centroid, normalised per instance.
 *
 * Positive and negative offsets are scaled separately on each axis so the
 * extremes of every instance map to +1 and -1.
 */
Targets make_targets(const InstanceMap& instances);

enum class Axis { X, Y };

/// Separable derivative filter with symmetric-101 reflected borders.
/// Aperture 3 is the classic [-1 0 1] x [1 2 1] pair; larger apertures use
/// binomial smoothing of matching length.
PlaneF64 sobel_plane(const PlaneF64& plane, Axis axis, int aperture);

/// Adjoint (transpose) of sobel_plane viewed as a linear operator.
PlaneF64 sobel_plane_adjoint(const PlaneF64& plane, Axis axis, int aperture);

/// Smoothing and difference taps used by sobel_plane.
struct SobelKernels {
  std::vector<double> smooth;
  std::vector<double> diff;
};
SobelKernels sobel_kernels(int aperture);

/// 8-connected components of the non-zero pixels, labelled 1..K in scan order
/// of their first pixel. Components smaller than min_size are dropped before
/// numbering.
InstanceMap label_components(const PlaneU8& binary, int min_size);

struct PredictionMaps {
  PlaneF64 np_prob;
  HoVerMaps hv;
  std::optional<ImageF64> tp_prob;  ///< H x W x 7 class probabilities
};

struct PostprocParams {
  double np_threshold = 0.5;
  int sobel_aperture = 5;
  double boundary_threshold = 0.4;
  int min_object_px = 10;
  int marker_open_radius = 2;
  int smooth_kernel = 3;

  void validate() const;
};

struct PostprocResult {
  InstanceMap instances;
  /// classes[k] is the class of instance k + 1.
  std::vector<ClassId> classes;

  ClassMap class_map() const;
};

/// Marker-controlled watershed on `surface`, flooding 4-connected pixels of
/// `mask` from the labelled `markers`. Lower surface values flood first; ties
/// go to the pixel fewer flood steps from its marker, then to the lower marker
/// id, then to the earlier queued pixel.
InstanceMap watershed(const PlaneF64& surface, const InstanceMap& markers, const PlaneU8& mask);

/// Morphological opening with a disk of the given radius.
PlaneU8 binary_open(const PlaneU8& binary, int radius);

/// Majority vote of argmax(tp_prob) per instance. Background votes count only
/// when every pixel votes background; ties go to the lower class id.
std::vector<ClassId> vote_classes(const InstanceMap& instances, std::size_t instance_count, const ImageF64& tp_prob);

PostprocResult postprocess(const PredictionMaps& maps, const PostprocParams& params);

}  // namespace cshover::hover
