#include "cshover/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

namespace cshover::metrics {

namespace {

struct Contingency {
  std::unordered_map<std::uint32_t, std::uint64_t> gt_area;
  std::unordered_map<std::uint32_t, std::uint64_t> pred_area;
  std::unordered_map<std::uint64_t, std::uint64_t> overlap;  // key = gt << 32 | pred
};

Contingency count_overlaps(const InstanceMap& gt, const InstanceMap& pred) {
  if (!gt.same_extent(pred)) throw InvalidArgument("gt and pred maps differ in shape");
  Contingency c;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    const auto g = gt[i], p = pred[i];
    if (g) ++c.gt_area[g];
    if (p) ++c.pred_area[p];
    if (g && p) ++c.overlap[(static_cast<std::uint64_t>(g) << 32) | p];
  }
  return c;
}

MatchResult match_from(const Contingency& c, double iou_threshold) {
  MatchResult r;
  std::unordered_map<std::uint32_t, bool> gt_hit, pred_hit;
  for (const auto& [key, inter] : c.overlap) {
    const auto g = static_cast<std::uint32_t>(key >> 32);
    const auto p = static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
    const double uni = static_cast<double>(c.gt_area.at(g) + c.pred_area.at(p) - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (iou > iou_threshold) {
      r.matches.push_back({g, p, iou});
      gt_hit[g] = true;
      pred_hit[p] = true;
    }
  }
  std::sort(r.matches.begin(), r.matches.end(),
            [](const Match& a, const Match& b) { return a.gt_id < b.gt_id; });
  for (const auto& [g, area] : c.gt_area)
    if (!gt_hit.count(g)) r.unmatched_gt.push_back(g);
  for (const auto& [p, area] : c.pred_area)
    if (!pred_hit.count(p)) r.unmatched_pred.push_back(p);
  std::sort(r.unmatched_gt.begin(), r.unmatched_gt.end());
  std::sort(r.unmatched_pred.begin(), r.unmatched_pred.end());
  return r;
}

void check_threshold(double t) {
  if (!(t >= 0.5 && t < 1.0)) throw InvalidArgument("IoU threshold must be in [0.5, 1)");
}

}  // namespace

MatchResult match_instances(const InstanceMap& gt, const InstanceMap& pred, double iou_threshold) {
  check_threshold(iou_threshold);
  return match_from(count_overlaps(gt, pred), iou_threshold);
}

double ClassStats::pq() const noexcept {
  const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) + 0.5 * static_cast<double>(fn);
  return denom > 0.0 ? iou_sum / denom : 0.0;
}

ClassStats& ClassStats::operator+=(const ClassStats& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  iou_sum += o.iou_sum;
  return *this;
}

PQStats merge_stats(const PQStats& a, const PQStats& b) noexcept {
  PQStats out = a;
  out.agnostic += b.agnostic;
  for (int c = 0; c < kNumClasses; ++c) out.per_class[c] += b.per_class[c];
  return out;
}

std::vector<ClassId> instance_classes(const InstanceMap& inst, const ClassMap& cls,
                                      std::span<const std::uint32_t> ids) {
  if (!inst.same_extent(cls)) throw InvalidArgument("instance and class maps differ in shape");
  std::unordered_map<std::uint32_t, std::size_t> slot;
  for (std::size_t k = 0; k < ids.size(); ++k) slot[ids[k]] = k;
  std::vector<std::array<std::uint64_t, kNumClasses + 1>> votes(ids.size());
  for (auto& v : votes) v.fill(0);
  for (std::size_t i = 0; i < inst.pixel_count(); ++i) {
    if (inst[i] == 0) continue;
    const auto it = slot.find(inst[i]);
    if (it == slot.end()) continue;
    if (cls[i] > kNumClasses) throw InvalidArgument("class id out of range");
    ++votes[it->second][cls[i]];
  }
  std::vector<ClassId> out(ids.size(), 0);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    std::uint64_t best = 0;
    for (int c = 0; c <= kNumClasses; ++c) {
      if (votes[k][c] > best) {
        best = votes[k][c];
        out[k] = static_cast<ClassId>(c);
      }
    }
  }
  return out;
}

PQStats accumulate_pq(const InstanceMap& gt_inst, const ClassMap& gt_class, const InstanceMap& pred_inst,
                      const ClassMap& pred_class, const PQStats& stats, double iou_threshold) {
  check_threshold(iou_threshold);
  const Contingency c = count_overlaps(gt_inst, pred_inst);
  const MatchResult m = match_from(c, iou_threshold);

  PQStats out = stats;
  out.agnostic.tp += m.matches.size();
  out.agnostic.fp += m.unmatched_pred.size();
  out.agnostic.fn += m.unmatched_gt.size();
  for (const auto& mt : m.matches) out.agnostic.iou_sum += mt.iou;

  std::vector<std::uint32_t> gt_ids, pred_ids;
  for (const auto& [g, a] : c.gt_area) gt_ids.push_back(g);
  for (const auto& [p, a] : c.pred_area) pred_ids.push_back(p);
  const auto gt_cls = instance_classes(gt_inst, gt_class, gt_ids);
  const auto pred_cls = instance_classes(pred_inst, pred_class, pred_ids);
  std::unordered_map<std::uint32_t, ClassId> gt_of, pred_of;
  for (std::size_t k = 0; k < gt_ids.size(); ++k) gt_of[gt_ids[k]] = gt_cls[k];
  for (std::size_t k = 0; k < pred_ids.size(); ++k) pred_of[pred_ids[k]] = pred_cls[k];

  // A pair that matches class-agnostically also matches inside its class
  // subset (areas and overlap are unchanged); everything else is unmatched there.
  std::unordered_map<std::uint32_t, bool> gt_tp, pred_tp;
  for (const auto& mt : m.matches) {
    const ClassId cg = gt_of[mt.gt_id];
    if (cg != 0 && cg == pred_of[mt.pred_id]) {
      auto& s = out.of_class(cg);
      ++s.tp;
      s.iou_sum += mt.iou;
      gt_tp[mt.gt_id] = true;
      pred_tp[mt.pred_id] = true;
    }
  }
  for (const auto& [g, cg] : gt_of)
    if (cg != 0 && !gt_tp.count(g)) ++out.of_class(cg).fn;
  for (const auto& [p, cp] : pred_of)
    if (cp != 0 && !pred_tp.count(p)) ++out.of_class(cp).fp;
  return out;
}

EvalReport report(std::span<const ClassStats> per_image_agnostic, const PQStats& pooled) {
  if (per_image_agnostic.empty()) throw InvalidArgument("cannot report on an empty dataset");
  EvalReport r;
  double sum = 0.0;
  std::size_t scored = 0;
  for (const auto& s : per_image_agnostic) {
    if (s.empty()) continue;
    sum += s.pq();
    ++scored;
  }
  r.pq = scored ? sum / static_cast<double>(scored) : 0.0;
  r.pq_plus = pooled.agnostic.pq();
  double msum = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    r.class_pq_plus[k] = pooled.of_class(kReportClassOrder[k]).pq();
    msum += r.class_pq_plus[k];
  }
  r.mpq_plus = msum / kNumClasses;
  return r;
}

std::vector<std::pair<std::string, double>> report_fields(const EvalReport& r) {
  std::vector<std::pair<std::string, double>> f = {{"mPQ+", r.mpq_plus}, {"PQ", r.pq}, {"PQ+", r.pq_plus}};
  for (int k = 0; k < kNumClasses; ++k) {
    f.emplace_back("PQ+ - " + std::string(class_abbreviation(kReportClassOrder[k])), r.class_pq_plus[k]);
  }
  return f;
}

namespace {
std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}
}  // namespace

std::string format_report_kv(const EvalReport& r, int precision) {
  std::string out;
  for (const auto& [name, v] : report_fields(r)) out += name + "\t" + fmt(v, precision) + "\n";
  return out;
}

std::string format_report_table(const EvalReport& r, int precision) {
  std::string header, values;
  for (const auto& [name, v] : report_fields(r)) {
    if (!header.empty()) {
      header += '\t';
      values += '\t';
    }
    header += name;
    values += fmt(v, precision);
  }
  return header + "\n" + values + "\n";
}

}  // namespace cshover::metrics
