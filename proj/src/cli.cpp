#include "cshover/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "cshover/augment.hpp"
#include "cshover/config.hpp"
#include "cshover/gradcheck.hpp"
#include "cshover/hover.hpp"
#include "cshover/metrics.hpp"
#include "cshover/npy_io.hpp"
#include "cshover/preprocess.hpp"

namespace cshover::cli {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index writes
/// only its own output slot, so results do not depend on scheduling. The
/// failure with the lowest index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::mutex m;
  std::optional<std::size_t> failed_at;
  std::exception_ptr failure;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failed_at || i < *failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw Error("sample " + std::to_string(*failed_at) + ": " + e.what());
    }
  }
}

struct Common {
  std::string config_path;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

config::CliConfig load_cli_config(const Common& c) {
  return c.config_path.empty() ? config::CliConfig{} : config::load_config(c.config_path);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Configuration file (key = value with [sections])")
      ->check(CLI::ExistingFile);
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

std::vector<std::size_t> require_shape(const npy::NpyArray& a, std::size_t rank, const std::string& what) {
  if (a.shape().size() != rank) {
    throw UsageError(what + ": expected a rank-" + std::to_string(rank) + " array");
  }
  return a.shape();
}

PlaneF64 plane_from(const npy::NpyArray& a, std::size_t sample, int h, int w, int channels, int channel) {
  PlaneF64 out(h, w, 1);
  const std::size_t base = sample * static_cast<std::size_t>(h) * w * channels;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) out[i] = a.value<double>(base + i * channels + channel);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_stack(const std::string& images_path, const std::string& out_path, const Common& common,
              std::ostream& err) {
  const auto cfg = load_cli_config(common);
  const auto images = npy::load_npy(images_path);
  const auto s = require_shape(images, 4, images_path);
  if (s[3] != 3 || images.dtype() != npy::DType::U1) throw Error(images_path + ": expected (N, H, W, 3) uint8");
  const int h = static_cast<int>(s[1]), w = static_cast<int>(s[2]);
  const std::size_t len = static_cast<std::size_t>(h) * w * 3;

  std::vector<ImageU8> out(s[0]);
  parallel_for(s[0], common.workers, [&](std::size_t i) {
    const auto first = images.payload().begin() + static_cast<std::ptrdiff_t>(i * len);
    const ImageU8 rgb(h, w, 3, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(len)));
    out[i] = preprocess::preprocess_tile(rgb, cfg.stack);
  });
  auto arr = npy::stack_images<std::uint8_t>(out);
  if (out.empty()) {
    arr = npy::NpyArray::from_values<std::uint8_t>({0, s[1], s[2], cfg.stack.channel_order.size()}, {});
  }
  npy::save_npy(out_path, arr);
  err << "stack: wrote " << s[0] << " tiles to " << out_path << "\n";
  return kExitOk;
}

int cmd_targets(const std::string& labels_path, const std::string& hv_path, const std::string& np_path,
                const Common& common, std::ostream& err) {
  const auto labels = npy::load_npy(labels_path);
  const auto s = require_shape(labels, 4, labels_path);
  const std::size_t n = s[0];
  const std::size_t plane = s[1] * s[2];

  std::vector<float> hv(n * plane * 2);
  std::vector<std::uint8_t> np(n * plane);
  parallel_for(n, common.workers, [&](std::size_t i) {
    InstanceMap inst;
    ClassMap cls;
    npy::split_label_sample(labels, i, inst, cls);
    const auto t = hover::make_targets(inst);
    for (std::size_t p = 0; p < plane; ++p) {
      hv[(i * plane + p) * 2] = static_cast<float>(t.hv.h[p]);
      hv[(i * plane + p) * 2 + 1] = static_cast<float>(t.hv.v[p]);
      np[i * plane + p] = t.np[p];
    }
  });
  npy::save_npy(hv_path, npy::NpyArray::from_values<float>({n, s[1], s[2], 2}, std::span<const float>(hv)));
  npy::save_npy(np_path, npy::NpyArray::from_values<std::uint8_t>({n, s[1], s[2]}, std::span<const std::uint8_t>(np)));
  err << "targets: wrote " << n << " samples to " << hv_path << " and " << np_path << "\n";
  return kExitOk;
}

int cmd_postproc(const std::string& np_path, const std::string& hv_path, const std::string& tp_path,
                 const std::string& out_path, const Common& common, std::ostream& err) {
  const auto cfg = load_cli_config(common);
  const auto np = npy::load_npy(np_path);
  const auto hv = npy::load_npy(hv_path);
  const auto hs = require_shape(hv, 4, hv_path);
  if (hs[3] != 2) throw Error(hv_path + ": expected (N, H, W, 2)");
  const std::size_t n = hs[0];
  const int h = static_cast<int>(hs[1]), w = static_cast<int>(hs[2]);

  const auto& ns = np.shape();
  int np_channels = 1, np_channel = 0;
  if (ns.size() == 4 && (ns[3] == 1 || ns[3] == 2)) {
    np_channels = static_cast<int>(ns[3]);
    np_channel = np_channels - 1;  // two-channel softmax: foreground is channel 1
  } else if (ns.size() != 3) {
    throw Error(np_path + ": expected (N, H, W), (N, H, W, 1) or (N, H, W, 2)");
  }
  if (ns[0] != n || ns[1] != hs[1] || ns[2] != hs[2]) throw Error(np_path + ": shape does not match " + hv_path);

  std::optional<npy::NpyArray> tp;
  if (!tp_path.empty()) {
    tp = npy::load_npy(tp_path);
    const auto& ts = tp->shape();
    if (ts.size() != 4 || ts[0] != n || ts[1] != hs[1] || ts[2] != hs[2] ||
        ts[3] != static_cast<std::size_t>(kNumClasses + 1)) {
      throw Error(tp_path + ": expected (N, H, W, 7) matching " + hv_path);
    }
  }

  std::vector<InstanceMap> instances(n);
  std::vector<ClassMap> classes(n);
  parallel_for(n, common.workers, [&](std::size_t i) {
    hover::PredictionMaps maps;
    maps.np_prob = plane_from(np, i, h, w, np_channels, np_channel);
    maps.hv.h = plane_from(hv, i, h, w, 2, 0);
    maps.hv.v = plane_from(hv, i, h, w, 2, 1);
    if (tp) {
      ImageF64 probs(h, w, kNumClasses + 1);
      const std::size_t base = i * probs.data().size();
      for (std::size_t k = 0; k < probs.data().size(); ++k) probs[k] = tp->value<double>(base + k);
      maps.tp_prob = std::move(probs);
    }
    const auto r = hover::postprocess(maps, cfg.postproc);
    instances[i] = r.instances;
    classes[i] = r.class_map();
  });
  npy::save_npy(out_path, npy::stack_labels(instances, classes));
  err << "postproc: wrote " << n << " label maps to " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& report_path,
             const Common& common, std::ostream& out, std::ostream& err) {
  const auto cfg = load_cli_config(common);
  const auto pred = npy::load_npy(pred_path);
  const auto gt = npy::load_npy(gt_path);
  const auto ps = require_shape(pred, 4, pred_path);
  const auto gs = require_shape(gt, 4, gt_path);
  if (ps != gs) throw Error("prediction and ground-truth label arrays differ in shape");
  const std::size_t n = gs[0];
  if (n == 0) throw Error("cannot evaluate an empty dataset");

  std::vector<metrics::PQStats> per_image(n);
  parallel_for(n, common.workers, [&](std::size_t i) {
    InstanceMap gi, pi;
    ClassMap gc, pc;
    npy::split_label_sample(gt, i, gi, gc);
    npy::split_label_sample(pred, i, pi, pc);
    per_image[i] = metrics::accumulate_pq(gi, gc, pi, pc, {}, cfg.iou_threshold);
  });
  metrics::PQStats pooled;
  std::vector<metrics::ClassStats> agnostic;
  agnostic.reserve(n);
  for (const auto& s : per_image) {
    pooled = metrics::merge_stats(pooled, s);
    agnostic.push_back(s.agnostic);
  }
  const auto rep = metrics::report(agnostic, pooled);
  out << metrics::format_report_kv(rep);
  if (!report_path.empty()) {
    std::ofstream f(report_path, std::ios::trunc);
    if (!f) throw Error("cannot open report file " + report_path);
    f << metrics::format_report_table(rep) << "\n" << metrics::format_report_kv(rep);
  }
  err << "eval: scored " << n << " images\n";
  return kExitOk;
}

int cmd_augment(const std::string& images_path, const std::string& labels_path, std::uint64_t seed,
                const std::string& out_images, const std::string& out_labels, const Common& common,
                std::ostream& err) {
  const auto cfg = load_cli_config(common);
  const auto ds = npy::load_dataset(images_path, labels_path);
  const std::size_t n = ds.size();
  std::vector<ImageU8> images(n);
  std::vector<InstanceMap> instances(n);
  std::vector<ClassMap> classes(n);
  parallel_for(n, common.workers, [&](std::size_t i) {
    const auto params = augment::sample_params(cfg.augment, seed, i);
    auto s = augment::apply(params, ds.sample(i));
    images[i] = std::move(s.image);
    instances[i] = std::move(s.instances);
    classes[i] = std::move(s.classes);
  });
  auto img_arr = npy::stack_images<std::uint8_t>(images);
  if (n == 0) {
    img_arr = npy::NpyArray::from_values<std::uint8_t>(
        {0, static_cast<std::size_t>(ds.height()), static_cast<std::size_t>(ds.width()), 3}, {});
  }
  npy::save_npy(out_images, img_arr);
  npy::save_npy(out_labels, npy::stack_labels(instances, classes));
  err << "augment: wrote " << n << " samples (seed " << seed << ")\n";
  return kExitOk;
}

int cmd_loss_check(std::uint64_t seeds, double tolerance, std::ostream& out) {
  bool ok = true;
  for (const auto& r : gradcheck::run_loss_checks(seeds, tolerance)) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s max_rel_err=%.3e  %s\n", r.loss.c_str(), r.worst_error,
                  r.passed ? "PASS" : "FAIL");
    out << line;
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Colour-space HoVer nuclei pipeline: stacking, targets, post-processing, evaluation"};
  app.require_subcommand(1);

  Common common;
  std::string images, labels, out_path, hv_path, np_path, tp_path, pred, gt, report_path, out_images, out_labels;
  std::uint64_t seed = 0;
  std::uint64_t seeds = 20;
  double tolerance = 1e-5;

  auto* stack = app.add_subcommand("stack", "RGB tiles -> stacked multi-channel tiles");
  stack->add_option("--images", images, "(N, H, W, 3) uint8 NPY")->required();
  stack->add_option("--out", out_path, "Output NPY")->required();
  add_common(stack, common);

  auto* targets = app.add_subcommand("targets", "Instance labels -> HoVer and nucleus-pixel targets");
  targets->add_option("--labels", labels, "(N, H, W, 2) label NPY")->required();
  targets->add_option("--out-hv", hv_path, "Output (N, H, W, 2) <f4 NPY")->required();
  targets->add_option("--out-np", np_path, "Output (N, H, W) |u1 NPY")->required();
  add_common(targets, common);

  std::string pp_hv;
  auto* postproc = app.add_subcommand("postproc", "Prediction maps -> instance/class label maps");
  postproc->add_option("--np", np_path, "Nucleus probability NPY")->required();
  postproc->add_option("--hv", pp_hv, "(N, H, W, 2) HoVer prediction NPY")->required();
  postproc->add_option("--tp", tp_path, "(N, H, W, 7) class probability NPY");
  postproc->add_option("--out", out_path, "Output (N, H, W, 2) label NPY")->required();
  add_common(postproc, common);

  auto* eval = app.add_subcommand("eval", "Panoptic quality report");
  eval->add_option("--pred", pred, "Predicted (N, H, W, 2) labels")->required();
  eval->add_option("--gt", gt, "Ground-truth (N, H, W, 2) labels")->required();
  eval->add_option("--report", report_path, "Also write the report to this file");
  add_common(eval, common);

  auto* aug = app.add_subcommand("augment", "Seeded augmentation of an images/labels pair");
  aug->add_option("--images", images, "(N, H, W, 3) uint8 NPY")->required();
  aug->add_option("--labels", labels, "(N, H, W, 2) label NPY")->required();
  aug->add_option("--seed", seed, "Augmentation seed");
  aug->add_option("--out-images", out_images, "Output images NPY")->required();
  aug->add_option("--out-labels", out_labels, "Output labels NPY")->required();
  add_common(aug, common);

  auto* check = app.add_subcommand("loss-check", "Finite-difference gradient self-test of every loss");
  check->add_option("--seeds", seeds, "Number of random fixtures per loss");
  check->add_option("--tolerance", tolerance, "Maximum relative gradient error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*stack) return cmd_stack(images, out_path, common, err);
    if (*targets) return cmd_targets(labels, hv_path, np_path, common, err);
    if (*postproc) return cmd_postproc(np_path, pp_hv, tp_path, out_path, common, err);
    if (*eval) return cmd_eval(pred, gt, report_path, common, out, err);
    if (*aug) return cmd_augment(images, labels, seed, out_images, out_labels, common, err);
    if (*check) return cmd_loss_check(seeds, tolerance, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const config::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cshover::cli
