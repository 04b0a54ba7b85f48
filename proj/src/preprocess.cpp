#include "cshover/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace cshover::preprocess {

namespace {

std::uint8_t clamp_round(double v) noexcept {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

void require_rgb(const ImageU8& img) {
  if (img.channels() != 3) {
    throw InvalidArgument("expected a 3-channel RGB image, got " + std::to_string(img.channels()) +
                          " channels");
  }
}

// Symmetric reflection (abc|cba) of an index into [0, n).
int reflect(int i, int n) noexcept {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

std::string_view selector_name(ChannelSelector s) {
  switch (s) {
    case ChannelSelector::B: return "B";
    case ChannelSelector::G: return "G";
    case ChannelSelector::R: return "R";
    case ChannelSelector::S: return "S";
    case ChannelSelector::Cr: return "Cr";
    case ChannelSelector::Cb: return "Cb";
  }
  return "?";
}

ChannelSelector parse_selector(std::string_view name) {
  for (auto s : {ChannelSelector::B, ChannelSelector::G, ChannelSelector::R, ChannelSelector::S,
                 ChannelSelector::Cr, ChannelSelector::Cb}) {
    if (selector_name(s) == name) return s;
  }
  throw InvalidArgument("unknown channel selector '" + std::string(name) + "'");
}

void StackConfig::validate() const {
  if (channel_order.empty()) throw InvalidArgument("channel_order must not be empty");
  std::set<ChannelSelector> seen(channel_order.begin(), channel_order.end());
  if (seen.size() != channel_order.size()) throw InvalidArgument("channel_order selectors must be unique");
  if (clahe && (clahe->tiles_x < 1 || clahe->tiles_y < 1)) {
    throw InvalidArgument("CLAHE tile grid must be at least 1x1");
  }
  if (clahe && !std::isfinite(clahe->clip_limit)) throw InvalidArgument("CLAHE clip_limit must be finite");
}

std::uint8_t saturation(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  const int mx = std::max({r, g, b});
  const int mn = std::min({r, g, b});
  if (mx == 0) return 0;
  return clamp_round(255.0 * (mx - mn) / mx);
}

std::uint8_t chroma_red(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  return clamp_round((r - luma(r, g, b)) * 0.713 + 128.0);
}

std::uint8_t chroma_blue(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  return clamp_round((b - luma(r, g, b)) * 0.564 + 128.0);
}

PlaneU8 extract_plane(const ImageU8& rgb, ChannelSelector selector) {
  require_rgb(rgb);
  PlaneU8 out(rgb.height(), rgb.width(), 1);
  const std::size_t n = rgb.pixel_count();
  const auto src = rgb.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    std::uint8_t v = 0;
    switch (selector) {
      case ChannelSelector::R: v = r; break;
      case ChannelSelector::G: v = g; break;
      case ChannelSelector::B: v = b; break;
      case ChannelSelector::S: v = saturation(r, g, b); break;
      case ChannelSelector::Cr: v = chroma_red(r, g, b); break;
      case ChannelSelector::Cb: v = chroma_blue(r, g, b); break;
    }
    out[i] = v;
  }
  return out;
}

ClaheTiles clahe_tile_luts(const PlaneU8& plane, const ClaheParams& params) {
  if (plane.channels() != 1) throw InvalidArgument("clahe_plane expects a single-channel plane");
  if (params.tiles_x < 1 || params.tiles_y < 1) throw InvalidArgument("CLAHE tile grid must be at least 1x1");
  const int h = plane.height();
  const int w = plane.width();
  if (h < params.tiles_y || w < params.tiles_x) {
    throw InvalidArgument("plane smaller than one tile per axis");
  }

  ClaheTiles t;
  t.tiles_x = params.tiles_x;
  t.tiles_y = params.tiles_y;
  t.tile_width = (w + params.tiles_x - 1) / params.tiles_x;
  t.tile_height = (h + params.tiles_y - 1) / params.tiles_y;
  t.luts.resize(static_cast<std::size_t>(t.tiles_x) * t.tiles_y);

  const int area = t.tile_width * t.tile_height;
  int clip = 0;
  if (params.clip_limit > 0.0) {
    clip = std::max(1, static_cast<int>(params.clip_limit * area / 256.0));
  }

  std::array<int, 256> hist{};
  for (int ty = 0; ty < t.tiles_y; ++ty) {
    for (int tx = 0; tx < t.tiles_x; ++tx) {
      hist.fill(0);
      for (int y = ty * t.tile_height; y < (ty + 1) * t.tile_height; ++y) {
        const int sy = reflect(y, h);
        for (int x = tx * t.tile_width; x < (tx + 1) * t.tile_width; ++x) {
          ++hist[plane.at(sy, reflect(x, w))];
        }
      }

      // A constant tile keeps the identity map; clipping would otherwise spread it.
      const bool constant = std::find(hist.begin(), hist.end(), area) != hist.end();
      if (clip > 0) {
        int excess = 0;
        for (auto& c : hist) {
          if (c > clip) {
            excess += c - clip;
            c = clip;
          }
        }
        const int batch = excess / 256;
        const int residual = excess % 256;
        for (int i = 0; i < 256; ++i) hist[i] += batch + (i < residual ? 1 : 0);
      }

      auto& lut = t.luts[static_cast<std::size_t>(ty) * t.tiles_x + tx];
      int cdf_min = 0;
      for (int c : hist) {
        if (c > 0) {
          cdf_min = c;
          break;
        }
      }
      if (constant || cdf_min == area) {
        for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i);
        continue;
      }
      const double scale = 255.0 / (area - cdf_min);
      int cdf = 0;
      for (int i = 0; i < 256; ++i) {
        cdf += hist[i];
        lut[i] = clamp_round((cdf - cdf_min) * scale);
      }
    }
  }
  return t;
}

PlaneU8 clahe_plane(const PlaneU8& plane, const ClaheParams& params) {
  const ClaheTiles t = clahe_tile_luts(plane, params);
  const int h = plane.height();
  const int w = plane.width();

  // Horizontal interpolation coordinates depend on x only; precompute them.
  std::vector<int> x0(w), x1(w);
  std::vector<double> wx(w);
  for (int x = 0; x < w; ++x) {
    const double fx = (x + 0.5) / t.tile_width - 0.5;
    const int lo = static_cast<int>(std::floor(fx));
    wx[x] = fx - lo;
    x0[x] = std::clamp(lo, 0, t.tiles_x - 1);
    x1[x] = std::clamp(lo + 1, 0, t.tiles_x - 1);
  }

  PlaneU8 out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    const double fy = (y + 0.5) / t.tile_height - 0.5;
    const int lo = static_cast<int>(std::floor(fy));
    const double wy = fy - lo;
    const int y0 = std::clamp(lo, 0, t.tiles_y - 1);
    const int y1 = std::clamp(lo + 1, 0, t.tiles_y - 1);
    const auto* row0 = &t.luts[static_cast<std::size_t>(y0) * t.tiles_x];
    const auto* row1 = &t.luts[static_cast<std::size_t>(y1) * t.tiles_x];
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = plane.at(y, x);
      const double top = (1.0 - wx[x]) * row0[x0[x]][v] + wx[x] * row0[x1[x]][v];
      const double bottom = (1.0 - wx[x]) * row1[x0[x]][v] + wx[x] * row1[x1[x]][v];
      out.at(y, x) = clamp_round((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

ImageU8 preprocess_tile(const ImageU8& rgb, const StackConfig& cfg) {
  require_rgb(rgb);
  cfg.validate();

  ImageU8 enhanced = rgb;
  if (cfg.clahe) {
    auto planes = split_channels(rgb);
    for (auto& p : planes) p = clahe_plane(p, *cfg.clahe);
    enhanced = merge_channels(planes);
  }
  const ImageU8& colour_source = cfg.derive_from_enhanced ? enhanced : rgb;

  std::vector<PlaneU8> planes;
  planes.reserve(cfg.channel_order.size());
  for (auto sel : cfg.channel_order) {
    const bool rgb_plane = sel == ChannelSelector::R || sel == ChannelSelector::G || sel == ChannelSelector::B;
    planes.push_back(extract_plane(rgb_plane ? enhanced : colour_source, sel));
  }
  return merge_channels(planes);
}

}  // namespace cshover::preprocess
