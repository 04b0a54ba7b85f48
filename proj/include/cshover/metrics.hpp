/**
 * @file metrics.hpp
 * @brief Panoptic quality: instance matching, mergeable statistics, and the
 * mPQ+ / PQ / PQ+ / per-class PQ+ report.
 */
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cshover/core_types.hpp"

namespace cshover::metrics {

struct Match {
  std::uint32_t gt_id;
  std::uint32_t pred_id;
  double iou;

  friend bool operator==(const Match&, const Match&) = default;
};

struct MatchResult {
  std::vector<Match> matches;               ///< sorted by gt_id
  std::vector<std::uint32_t> unmatched_gt;  ///< ascending
  std::vector<std::uint32_t> unmatched_pred;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Pairs with IoU > iou_threshold (threshold >= 0.5 makes the matching unique).
MatchResult match_instances(const InstanceMap& gt, const InstanceMap& pred, double iou_threshold = 0.5);

struct ClassStats {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double iou_sum = 0.0;

  bool empty() const noexcept { return tp == 0 && fp == 0 && fn == 0; }
  /// iou_sum / (tp + fp/2 + fn/2); 0 when there is nothing to score.
  double pq() const noexcept;

  ClassStats& operator+=(const ClassStats& o) noexcept;
  friend ClassStats operator+(ClassStats a, const ClassStats& b) noexcept { return a += b; }
  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

/// Class-agnostic slot plus one slot per nucleus class (index = class id - 1).
struct PQStats {
  ClassStats agnostic;
  std::array<ClassStats, kNumClasses> per_class{};

  ClassStats& of_class(ClassId id) { return per_class.at(id - 1); }
  const ClassStats& of_class(ClassId id) const { return per_class.at(id - 1); }

  friend bool operator==(const PQStats&, const PQStats&) = default;
};

PQStats merge_stats(const PQStats& a, const PQStats& b) noexcept;

/// Majority class of each instance (ties to the lower class id); index = position in ids.
std::vector<ClassId> instance_classes(const InstanceMap& inst, const ClassMap& cls,
                                      std::span<const std::uint32_t> ids);

/**
 * @brief Adds one image to the running statistics.
 *
 * The class-agnostic slot uses all instances. Slot c only sees instances of
 * class c on both sides, so a correctly shaped prediction with the wrong class
 * counts once as FP and once as FN.
 */
PQStats accumulate_pq(const InstanceMap& gt_inst, const ClassMap& gt_class, const InstanceMap& pred_inst,
                      const ClassMap& pred_class, const PQStats& stats, double iou_threshold = 0.5);

struct EvalReport {
  double mpq_plus = 0.0;
  double pq = 0.0;
  double pq_plus = 0.0;
  /// PQ+ per class in report order: pla, neu, epi, lym, eos, con.
  std::array<double, kNumClasses> class_pq_plus{};
};

/**
 * @brief Builds the report from per-image agnostic statistics and the pooled
 * statistics.
 *
 * PQ averages per-image PQ over images that contain at least one instance on
 * either side. PQ+ and the per-class values use the pooled counts.
 */
EvalReport report(std::span<const ClassStats> per_image_agnostic, const PQStats& pooled);

/// (column name, value) in the fixed report order.
std::vector<std::pair<std::string, double>> report_fields(const EvalReport& r);

/// `name<TAB>value` lines.
std::string format_report_kv(const EvalReport& r, int precision = 5);
/// Two tab-separated lines: column names, then values.
std::string format_report_table(const EvalReport& r, int precision = 5);

}  // namespace cshover::metrics
