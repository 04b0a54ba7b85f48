/**
 * @file preprocess.hpp
 * @brief Per-channel CLAHE and multi-colour-space channel stacking.
 *
 * The default stack is [B, G, R, S, Cr, Cb]: the three RGB planes plus HSV
 * saturation and the two YCrCb chroma planes.
 */
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::preprocess {

enum class ChannelSelector { B, G, R, S, Cr, Cb };

std::string_view selector_name(ChannelSelector s);
/// Parses "B", "G", "R", "S", "Cr" or "Cb"; throws InvalidArgument otherwise.
ChannelSelector parse_selector(std::string_view name);

struct ClaheParams {
  int tiles_x = 8;
  int tiles_y = 8;
  /// Relative clip limit; <= 0 disables clipping.
  double clip_limit = 2.0;
};

struct StackConfig {
  std::vector<ChannelSelector> channel_order = {ChannelSelector::B,  ChannelSelector::G,
                                                ChannelSelector::R,  ChannelSelector::S,
                                                ChannelSelector::Cr, ChannelSelector::Cb};
  std::optional<ClaheParams> clahe = ClaheParams{};
  /// Derive S/Cr/Cb from the CLAHE-enhanced RGB instead of the raw input.
  bool derive_from_enhanced = false;

  void validate() const;
};

/**
 * @brief Extracts one 8-bit plane from an RGB image (channel order R, G, B).
 *
 * S = round(255 (max - min) / max), 0 when max = 0.
 * Y = 0.299 R + 0.587 G + 0.114 B;
 * Cr = clamp(round((R - Y) 0.713 + 128)); Cb = clamp(round((B - Y) 0.564 + 128)).
 */
PlaneU8 extract_plane(const ImageU8& rgb, ChannelSelector selector);

/// Per-pixel kernels behind extract_plane.
std::uint8_t saturation(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;
std::uint8_t chroma_red(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;
std::uint8_t chroma_blue(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;

/// 256-entry lookup tables for each tile, row-major over the tile grid.
struct ClaheTiles {
  int tiles_x = 0;
  int tiles_y = 0;
  int tile_width = 0;
  int tile_height = 0;
  std::vector<std::array<std::uint8_t, 256>> luts;
};

/// Builds the per-tile LUTs (steps 1-3 of clahe_plane).
ClaheTiles clahe_tile_luts(const PlaneU8& plane, const ClaheParams& params);

/**
 * @brief Contrast-limited adaptive histogram equalisation of one 8-bit plane.
 *
 * The plane is padded on the bottom/right by symmetric reflection up to a
 * multiple of the tile grid. Each tile gets a clipped histogram (absolute
 * limit max(1, floor(clip_limit * area / 256)), excess spread evenly with the
 * remainder going to the lowest bins) and a cdf-min normalised LUT. Pixels
 * are mapped by bilinear interpolation between the four nearest tile centres.
 */
PlaneU8 clahe_plane(const PlaneU8& plane, const ClaheParams& params);

/// CLAHE enhancement, colour-space extraction and stacking in cfg.channel_order.
ImageU8 preprocess_tile(const ImageU8& rgb, const StackConfig& cfg);

}  // namespace cshover::preprocess
