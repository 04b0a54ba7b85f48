// O(|gt| |pred| H W) panoptic-quality oracle: full pairwise IoU by pixel scans.
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "cshover/core_types.hpp"
#include "cshover/metrics.hpp"

namespace oracle {

inline std::vector<std::uint32_t> ids_of(const cshover::InstanceMap& m) {
  std::set<std::uint32_t> s;
  for (auto v : m.data())
    if (v) s.insert(v);
  return {s.begin(), s.end()};
}

inline cshover::metrics::MatchResult brute_match(const cshover::InstanceMap& gt, const cshover::InstanceMap& pred,
                                                 double thr) {
  cshover::metrics::MatchResult r;
  const auto gids = ids_of(gt), pids = ids_of(pred);
  std::set<std::uint32_t> gm, pm;
  for (auto g : gids)
    for (auto p : pids) {
      std::uint64_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
        const bool a = gt[i] == g, b = pred[i] == p;
        inter += (a && b);
        uni += (a || b);
      }
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou > thr) {
        r.matches.push_back({g, p, iou});
        gm.insert(g);
        pm.insert(p);
      }
    }
  for (auto g : gids)
    if (!gm.count(g)) r.unmatched_gt.push_back(g);
  for (auto p : pids)
    if (!pm.count(p)) r.unmatched_pred.push_back(p);
  return r;
}

inline cshover::metrics::ClassStats stats_from(const cshover::metrics::MatchResult& m) {
  cshover::metrics::ClassStats s;
  s.tp = m.matches.size();
  s.fp = m.unmatched_pred.size();
  s.fn = m.unmatched_gt.size();
  for (const auto& x : m.matches) s.iou_sum += x.iou;
  return s;
}

/// Keeps only instances whose (constant) class is `c`.
inline cshover::InstanceMap restrict_to(const cshover::InstanceMap& inst, const cshover::ClassMap& cls,
                                        cshover::ClassId c) {
  cshover::InstanceMap out(inst.height(), inst.width(), 1);
  for (std::size_t i = 0; i < inst.pixel_count(); ++i) out[i] = cls[i] == c ? inst[i] : 0;
  return out;
}

inline cshover::metrics::PQStats brute_pq(const cshover::InstanceMap& gi, const cshover::ClassMap& gc,
                                          const cshover::InstanceMap& pi, const cshover::ClassMap& pc,
                                          double thr = 0.5) {
  cshover::metrics::PQStats s;
  s.agnostic = stats_from(brute_match(gi, pi, thr));
  for (int c = 1; c <= cshover::kNumClasses; ++c) {
    const auto id = static_cast<cshover::ClassId>(c);
    s.of_class(id) = stats_from(brute_match(restrict_to(gi, gc, id), restrict_to(pi, pc, id), thr));
  }
  return s;
}

}  // namespace oracle
