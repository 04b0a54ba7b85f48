#include "cshover/hover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace cshover::hover {

namespace {

int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::vector<double> binomial_row(int taps) {
  std::vector<double> row{1.0};
  for (int k = 1; k < taps; ++k) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      next[i] += row[i];
      next[i + 1] += row[i];
    }
    row = std::move(next);
  }
  return row;
}

void check_aperture(const PlaneF64& plane, int aperture) {
  if (aperture < 3 || aperture % 2 == 0) throw InvalidArgument("sobel aperture must be odd and >= 3");
  if (aperture > std::min(plane.height(), plane.width())) {
    throw InvalidArgument("sobel aperture exceeds plane extent");
  }
  if (plane.channels() != 1) throw InvalidArgument("sobel_plane expects a single-channel plane");
}

// 1-D correlation along rows (dx = 1) or columns (dx = 0) with reflect-101
// borders. The adjoint scatters each output back onto its sources.
PlaneF64 filter_1d(const PlaneF64& in, const std::vector<double>& k, bool along_x, bool adjoint) {
  const int h = in.height(), w = in.width();
  const int len = along_x ? w : h;
  const int r = static_cast<int>(k.size()) / 2;
  std::vector<int> src(static_cast<std::size_t>(len) * k.size());
  for (int i = 0; i < len; ++i)
    for (std::size_t j = 0; j < k.size(); ++j) src[i * k.size() + j] = reflect101(i + static_cast<int>(j) - r, len);
  PlaneF64 out(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = along_x ? x : y;
      const std::size_t o = static_cast<std::size_t>(y) * w + x;
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (k[j] == 0.0) continue;
        const int q = src[i * k.size() + j];
        const std::size_t s = along_x ? static_cast<std::size_t>(y) * w + q : static_cast<std::size_t>(q) * w + x;
        if (adjoint) out[s] += k[j] * in[o];
        else out[o] += k[j] * in[s];
      }
    }
  return out;
}

PlaneF64 minmax_normalise(const PlaneF64& p) {
  PlaneF64 out(p.height(), p.width(), 1);
  if (p.empty()) return out;
  const auto [lo, hi] = std::minmax_element(p.data().begin(), p.data().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < p.pixel_count(); ++i) out[i] = (p[i] - *lo) / range;
  return out;
}

PlaneF64 box_smooth(const PlaneF64& p, int kernel) {
  if (kernel <= 1) return p;
  const int r = kernel / 2;
  const int h = p.height(), w = p.width();
  PlaneF64 tmp(h, w, 1), out(h, w, 1);
  const double norm = 1.0 / (2 * r + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += p.at(y, reflect101(x + d, w));
      tmp.at(y, x) = acc * norm;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += tmp.at(reflect101(y + d, h), x);
      out.at(y, x) = acc * norm;
    }
  return out;
}

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dy, dx);
  return offs;
}

}  // namespace

Targets make_targets(const InstanceMap& instances) {
  const int h = instances.height(), w = instances.width();
  Targets t{{PlaneF64(h, w, 1), PlaneF64(h, w, 1)}, PlaneU8(h, w, 1)};

  struct Acc {
    double sx = 0, sy = 0;
    std::size_t n = 0;
    double cx = 0, cy = 0;
    double hmax = 0, hmin = 0, vmax = 0, vmin = 0;
  };
  std::unordered_map<std::uint32_t, Acc> acc;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto id = instances.at(y, x);
      if (id == 0) continue;
      auto& a = acc[id];
      a.sx += x;
      a.sy += y;
      ++a.n;
    }
  for (auto& [id, a] : acc) {
    a.cx = a.sx / static_cast<double>(a.n);
    a.cy = a.sy / static_cast<double>(a.n);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto id = instances.at(y, x);
      if (id == 0) continue;
      auto& a = acc[id];
      const double dx = x - a.cx, dy = y - a.cy;
      t.hv.h.at(y, x) = dx;
      t.hv.v.at(y, x) = dy;
      a.hmax = std::max(a.hmax, dx);
      a.hmin = std::min(a.hmin, dx);
      a.vmax = std::max(a.vmax, dy);
      a.vmin = std::min(a.vmin, dy);
      t.np.at(y, x) = 1;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto id = instances.at(y, x);
      if (id == 0) continue;
      const auto& a = acc[id];
      double& hv = t.hv.h.at(y, x);
      double& vv = t.hv.v.at(y, x);
      if (hv > 0 && a.hmax > 0) hv /= a.hmax;
      else if (hv < 0 && a.hmin < 0) hv /= -a.hmin;
      if (vv > 0 && a.vmax > 0) vv /= a.vmax;
      else if (vv < 0 && a.vmin < 0) vv /= -a.vmin;
    }
  return t;
}

SobelKernels sobel_kernels(int aperture) {
  if (aperture < 3 || aperture % 2 == 0) throw InvalidArgument("sobel aperture must be odd and >= 3");
  SobelKernels k;
  k.smooth = binomial_row(aperture);
  const auto inner = binomial_row(aperture - 2);
  k.diff.assign(aperture, 0.0);
  for (std::size_t i = 0; i < inner.size(); ++i) {
    k.diff[i] -= inner[i];
    k.diff[i + 2] += inner[i];
  }
  return k;
}

PlaneF64 sobel_plane(const PlaneF64& plane, Axis axis, int aperture) {
  check_aperture(plane, aperture);
  const SobelKernels k = sobel_kernels(aperture);
  const auto& kx = axis == Axis::X ? k.diff : k.smooth;
  const auto& ky = axis == Axis::X ? k.smooth : k.diff;
  return filter_1d(filter_1d(plane, kx, true, false), ky, false, false);
}

PlaneF64 sobel_plane_adjoint(const PlaneF64& plane, Axis axis, int aperture) {
  check_aperture(plane, aperture);
  const SobelKernels k = sobel_kernels(aperture);
  const auto& kx = axis == Axis::X ? k.diff : k.smooth;
  const auto& ky = axis == Axis::X ? k.smooth : k.diff;
  return filter_1d(filter_1d(plane, ky, false, true), kx, true, true);
}

InstanceMap label_components(const PlaneU8& binary, int min_size) {
  const int h = binary.height(), w = binary.width();
  InstanceMap out(h, w, 1);
  std::vector<std::uint8_t> visited(binary.pixel_count(), 0);
  std::vector<std::size_t> component;
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t start = 0; start < binary.pixel_count(); ++start) {
    if (binary[start] == 0 || visited[start]) continue;
    component.clear();
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (binary[q] != 0 && !visited[q]) {
            visited[q] = 1;
            stack.push_back(q);
          }
        }
    }
    if (static_cast<int>(component.size()) < min_size) continue;
    ++next;
    for (auto p : component) out[p] = next;
  }
  return out;
}

void PostprocParams::validate() const {
  if (!(np_threshold > 0.0 && np_threshold < 1.0)) throw InvalidArgument("np_threshold must be in (0, 1)");
  if (!(boundary_threshold > 0.0 && boundary_threshold < 1.0)) {
    throw InvalidArgument("boundary_threshold must be in (0, 1)");
  }
  if (sobel_aperture < 3 || sobel_aperture % 2 == 0) throw InvalidArgument("sobel_aperture must be odd and >= 3");
  if (min_object_px < 0 || marker_open_radius < 0 || smooth_kernel < 1) {
    throw InvalidArgument("postprocess sizes must be non-negative");
  }
}

ClassMap PostprocResult::class_map() const {
  ClassMap out(instances.height(), instances.width(), 1);
  for (std::size_t i = 0; i < instances.pixel_count(); ++i) {
    const auto id = instances[i];
    if (id > 0 && id <= classes.size()) out[i] = classes[id - 1];
  }
  return out;
}

PlaneU8 binary_open(const PlaneU8& binary, int radius) {
  if (radius <= 0) return binary;
  const int h = binary.height(), w = binary.width();
  const auto offs = disk_offsets(radius);
  // Erosion treats out-of-image pixels as foreground, dilation as background.
  PlaneU8 eroded(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!binary.at(y, x)) continue;
      bool keep = true;
      for (auto [dy, dx] : offs) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
        if (!binary.at(ny, nx)) {
          keep = false;
          break;
        }
      }
      eroded.at(y, x) = keep ? 1 : 0;
    }
  PlaneU8 out(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!eroded.at(y, x)) continue;
      for (auto [dy, dx] : offs) {
        const int ny = y + dy, nx = x + dx;
        if (ny >= 0 && nx >= 0 && ny < h && nx < w) out.at(ny, nx) = 1;
      }
    }
  return out;
}

InstanceMap watershed(const PlaneF64& surface, const InstanceMap& markers, const PlaneU8& mask) {
  if (!surface.same_extent(markers) || !surface.same_extent(mask)) {
    throw InvalidArgument("watershed inputs differ in shape");
  }
  const int h = surface.height(), w = surface.width();
  struct Entry {
    double value;
    std::uint32_t dist;  // flood steps from the marker
    std::uint32_t label;
    std::uint64_t order;
    std::size_t pixel;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.value != b.value) return a.value > b.value;
      if (a.dist != b.dist) return a.dist > b.dist;
      if (a.label != b.label) return a.label > b.label;
      return a.order > b.order;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> queue;
  std::uint64_t order = 0;

  InstanceMap out(h, w, 1);
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (mask[i] && markers[i] > 0) out[i] = markers[i];
  }
  auto push_neighbours = [&](std::size_t p, std::uint32_t label, std::uint32_t dist) {
    const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
    const int ny[4] = {y - 1, y, y, y + 1};
    const int nx[4] = {x, x - 1, x + 1, x};
    for (int k = 0; k < 4; ++k) {
      if (ny[k] < 0 || nx[k] < 0 || ny[k] >= h || nx[k] >= w) continue;
      const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
      if (mask[q] && out[q] == 0) queue.push({surface[q], dist + 1, label, order++, q});
    }
  };
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (out[i] > 0) push_neighbours(i, out[i], 0);
  }
  while (!queue.empty()) {
    const Entry e = queue.top();
    queue.pop();
    if (out[e.pixel] != 0) continue;
    out[e.pixel] = e.label;
    push_neighbours(e.pixel, e.label, e.dist);
  }
  return out;
}

std::vector<ClassId> vote_classes(const InstanceMap& instances, std::size_t instance_count,
                                  const ImageF64& tp_prob) {
  if (!tp_prob.same_extent(instances)) throw InvalidArgument("tp_prob shape mismatch");
  const int nc = tp_prob.channels();
  std::vector<std::vector<std::size_t>> votes(instance_count + 1, std::vector<std::size_t>(nc, 0));
  for (std::size_t i = 0; i < instances.pixel_count(); ++i) {
    const auto id = instances[i];
    if (id == 0 || id > instance_count) continue;
    int best = 0;
    for (int c = 1; c < nc; ++c) {
      if (tp_prob[i * nc + c] > tp_prob[i * nc + best]) best = c;
    }
    ++votes[id][best];
  }
  std::vector<ClassId> out(instance_count, 0);
  for (std::size_t id = 1; id <= instance_count; ++id) {
    const auto& v = votes[id];
    int best = 0;
    std::size_t best_count = 0;
    for (int c = 1; c < nc; ++c) {
      if (v[c] > best_count) {
        best = c;
        best_count = v[c];
      }
    }
    out[id - 1] = static_cast<ClassId>(best);
  }
  return out;
}

PostprocResult postprocess(const PredictionMaps& maps, const PostprocParams& params) {
  params.validate();
  const int h = maps.np_prob.height(), w = maps.np_prob.width();
  if (maps.np_prob.channels() != 1 || !maps.np_prob.same_extent(maps.hv.h) || !maps.np_prob.same_extent(maps.hv.v)) {
    throw InvalidArgument("prediction map shape mismatch");
  }
  if (maps.tp_prob && (!maps.tp_prob->same_extent(maps.np_prob) || maps.tp_prob->channels() != kNumClasses + 1)) {
    throw InvalidArgument("prediction map shape mismatch");
  }
  const std::size_t n = maps.np_prob.pixel_count();

  PlaneU8 fg(h, w, 1);
  for (std::size_t i = 0; i < n; ++i) fg[i] = maps.np_prob[i] > params.np_threshold ? 1 : 0;
  const InstanceMap blobs = label_components(fg, params.min_object_px);
  PlaneU8 q(h, w, 1);
  for (std::size_t i = 0; i < n; ++i) q[i] = blobs[i] > 0 ? 1 : 0;

  PostprocResult result{InstanceMap(h, w, 1), {}};
  if (std::none_of(q.data().begin(), q.data().end(), [](std::uint8_t v) { return v != 0; })) return result;

  const PlaneF64 gx = minmax_normalise(sobel_plane(maps.hv.h, Axis::X, params.sobel_aperture));
  const PlaneF64 gy = minmax_normalise(sobel_plane(maps.hv.v, Axis::Y, params.sobel_aperture));
  PlaneF64 boundary(h, w, 1);
  PlaneF64 energy(h, w, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double b = std::max(1.0 - gx[i], 1.0 - gy[i]) - (1.0 - q[i]);
    boundary[i] = std::max(b, 0.0);
    energy[i] = (1.0 - boundary[i]) * q[i];
  }
  PlaneF64 surface = box_smooth(energy, params.smooth_kernel);
  for (auto& v : surface.data()) v = -v;

  PlaneU8 marker_px(h, w, 1);
  for (std::size_t i = 0; i < n; ++i) {
    marker_px[i] = (q[i] && boundary[i] < params.boundary_threshold) ? 1 : 0;
  }
  marker_px = binary_open(marker_px, params.marker_open_radius);
  const InstanceMap markers = label_components(marker_px, params.min_object_px);

  result.instances = watershed(surface, markers, q);
  const auto count = static_cast<std::size_t>(
      *std::max_element(result.instances.data().begin(), result.instances.data().end()));
  if (maps.tp_prob) {
    result.classes = vote_classes(result.instances, count, *maps.tp_prob);
  } else {
    result.classes.assign(count, 0);
  }
  return result;
}

}  // namespace cshover::hover
