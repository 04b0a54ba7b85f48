// Synthetic label fixtures shared by the unit and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cshover/core_types.hpp"

namespace fixtures {

using cshover::ClassMap;
using cshover::ImageU8;
using cshover::InstanceMap;

inline void paint_rect(InstanceMap& m, int y0, int x0, int hh, int ww, std::uint32_t id) {
  for (int y = y0; y < y0 + hh; ++y)
    for (int x = x0; x < x0 + ww; ++x)
      if (y >= 0 && x >= 0 && y < m.height() && x < m.width()) m.at(y, x) = id;
}

inline void paint_ellipse(InstanceMap& m, double cy, double cx, double ry, double rx, double theta,
                          std::uint32_t id) {
  const double c = std::cos(theta), s = std::sin(theta);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (c * dx + s * dy) / rx, v = (-s * dx + c * dy) / ry;
      if (u * u + v * v <= 1.0) m.at(y, x) = id;
    }
}

/// Random, possibly overlapping rectangles and ellipses with non-contiguous ids.
inline InstanceMap random_instances(std::mt19937_64& rng, int h, int w, int max_instances) {
  InstanceMap m(h, w, 1);
  std::uniform_int_distribution<int> count(0, max_instances);
  const int k = count(rng);
  std::uniform_int_distribution<std::uint32_t> id_gap(1, 5);
  std::uint32_t id = 0;
  for (int i = 0; i < k; ++i) {
    id += id_gap(rng);
    std::uniform_int_distribution<int> py(0, h - 1), px(0, w - 1), sz(1, std::max(1, std::min(h, w) / 2));
    if (rng() % 2) {
      paint_rect(m, py(rng), px(rng), sz(rng), sz(rng), id);
    } else {
      std::uniform_real_distribution<double> ang(0, 3.14159);
      paint_ellipse(m, py(rng), px(rng), 0.5 + sz(rng) / 2.0, 0.5 + sz(rng) / 2.0, ang(rng), id);
    }
  }
  return m;
}

/// One class per instance, 1..6, as the dataset stores it.
inline ClassMap classes_for(std::mt19937_64& rng, const InstanceMap& inst) {
  ClassMap cls(inst.height(), inst.width(), 1);
  std::vector<std::pair<std::uint32_t, cshover::ClassId>> table;
  std::uniform_int_distribution<int> pick(1, cshover::kNumClasses);
  for (std::size_t i = 0; i < inst.pixel_count(); ++i) {
    const auto id = inst[i];
    if (!id) continue;
    auto it = std::find_if(table.begin(), table.end(), [&](auto& p) { return p.first == id; });
    if (it == table.end()) {
      table.emplace_back(id, static_cast<cshover::ClassId>(pick(rng)));
      it = table.end() - 1;
    }
    cls[i] = it->second;
  }
  return cls;
}

/// Convex ellipses with at least `gap` background pixels between any two.
inline InstanceMap separated_scene(std::mt19937_64& rng, int h, int w, int count, int gap = 3) {
  InstanceMap m(h, w, 1);
  std::uniform_real_distribution<double> radius(5.0, 10.0), angle(0.0, 3.14159);
  std::uint32_t placed = 0;
  for (int attempt = 0; attempt < 5000 && static_cast<int>(placed) < count; ++attempt) {
    const double ry = radius(rng), rx = radius(rng), th = angle(rng);
    const double r = std::max(rx, ry);
    std::uniform_real_distribution<double> cy(r + 1, h - r - 2), cx(r + 1, w - r - 2);
    InstanceMap one(h, w, 1);
    paint_ellipse(one, cy(rng), cx(rng), ry, rx, th, placed + 1);
    bool clash = false;
    for (int y = 0; y < h && !clash; ++y)
      for (int x = 0; x < w && !clash; ++x) {
        if (!one.at(y, x)) continue;
        for (int dy = -gap; dy <= gap && !clash; ++dy)
          for (int dx = -gap; dx <= gap && !clash; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy >= 0 && xx >= 0 && yy < h && xx < w && m.at(yy, xx)) clash = true;
          }
      }
    if (clash) continue;
    ++placed;
    for (std::size_t i = 0; i < m.pixel_count(); ++i)
      if (one[i]) m[i] = placed;
  }
  return m;
}

/// Relabels ids to 1..K in scan order of first appearance.
inline InstanceMap canonical(const InstanceMap& m) {
  InstanceMap out(m.height(), m.width(), 1);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t i = 0; i < m.pixel_count(); ++i) {
    if (!m[i]) continue;
    auto it = std::find_if(seen.begin(), seen.end(), [&](auto& p) { return p.first == m[i]; });
    if (it == seen.end()) {
      seen.emplace_back(m[i], static_cast<std::uint32_t>(seen.size() + 1));
      it = seen.end() - 1;
    }
    out[i] = it->second;
  }
  return out;
}

inline ImageU8 random_image(std::mt19937_64& rng, int h, int w, int c) {
  ImageU8 img(h, w, c);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

}  // namespace fixtures
