#include "cshover/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cshover::config {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(std::string_view(v).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto t = trim(v);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

augment::Range to_range(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() == 1) {
    const double x = to_double(key, parts[0]);
    return {x, x};
  }
  if (parts.size() != 2) throw ConfigError("'" + key + "': expected 'lo, hi'");
  return {to_double(key, parts[0]), to_double(key, parts[1])};
}

using Setter = std::function<void(CliConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"stack",
       {
           {"channel_order",
            [](CliConfig& c, const std::string& v) {
              c.stack.channel_order.clear();
              for (const auto& s : split_list(v)) c.stack.channel_order.push_back(preprocess::parse_selector(s));
            }},
           {"clahe",
            [](CliConfig& c, const std::string& v) {
              if (to_bool("clahe", v)) {
                if (!c.stack.clahe) c.stack.clahe = preprocess::ClaheParams{};
              } else {
                c.stack.clahe.reset();
              }
            }},
           {"tiles_x", [](CliConfig& c, const std::string& v) {
              if (c.stack.clahe) c.stack.clahe->tiles_x = to_int("tiles_x", v);
            }},
           {"tiles_y", [](CliConfig& c, const std::string& v) {
              if (c.stack.clahe) c.stack.clahe->tiles_y = to_int("tiles_y", v);
            }},
           {"clip_limit", [](CliConfig& c, const std::string& v) {
              if (c.stack.clahe) c.stack.clahe->clip_limit = to_double("clip_limit", v);
            }},
           {"derive_from_enhanced", [](CliConfig& c, const std::string& v) {
              c.stack.derive_from_enhanced = to_bool("derive_from_enhanced", v);
            }},
       }},
      {"augment",
       {
           {"shear_deg", [](CliConfig& c, const std::string& v) { c.augment.shear_deg = to_range("shear_deg", v); }},
           {"scale", [](CliConfig& c, const std::string& v) { c.augment.scale = to_range("scale", v); }},
           {"gauss_blur_sigma",
            [](CliConfig& c, const std::string& v) { c.augment.gauss_blur_sigma = to_range("gauss_blur_sigma", v); }},
           {"median_kernels",
            [](CliConfig& c, const std::string& v) {
              c.augment.median_kernels.clear();
              for (const auto& s : split_list(v)) c.augment.median_kernels.push_back(to_int("median_kernels", s));
            }},
           {"noise_sigma", [](CliConfig& c, const std::string& v) { c.augment.noise_sigma = to_range("noise_sigma", v); }},
           {"hue_shift_deg",
            [](CliConfig& c, const std::string& v) { c.augment.hue_shift_deg = to_double("hue_shift_deg", v); }},
           {"saturation_jitter",
            [](CliConfig& c, const std::string& v) { c.augment.saturation_jitter = to_double("saturation_jitter", v); }},
           {"value_jitter",
            [](CliConfig& c, const std::string& v) { c.augment.value_jitter = to_double("value_jitter", v); }},
           {"p_affine", [](CliConfig& c, const std::string& v) { c.augment.p_affine = to_double("p_affine", v); }},
           {"p_noise", [](CliConfig& c, const std::string& v) { c.augment.p_noise = to_double("p_noise", v); }},
           {"p_color", [](CliConfig& c, const std::string& v) { c.augment.p_color = to_double("p_color", v); }},
       }},
      {"postproc",
       {
           {"np_threshold",
            [](CliConfig& c, const std::string& v) { c.postproc.np_threshold = to_double("np_threshold", v); }},
           {"sobel_aperture",
            [](CliConfig& c, const std::string& v) { c.postproc.sobel_aperture = to_int("sobel_aperture", v); }},
           {"boundary_threshold",
            [](CliConfig& c, const std::string& v) { c.postproc.boundary_threshold = to_double("boundary_threshold", v); }},
           {"min_object_px",
            [](CliConfig& c, const std::string& v) { c.postproc.min_object_px = to_int("min_object_px", v); }},
           {"marker_open_radius",
            [](CliConfig& c, const std::string& v) { c.postproc.marker_open_radius = to_int("marker_open_radius", v); }},
           {"smooth_kernel",
            [](CliConfig& c, const std::string& v) { c.postproc.smooth_kernel = to_int("smooth_kernel", v); }},
       }},
      {"metrics",
       {
           {"iou_threshold", [](CliConfig& c, const std::string& v) { c.iou_threshold = to_double("iou_threshold", v); }},
       }},
  };
  return table;
}

// The clahe switch must be applied before its parameters.
int key_rank(const std::string& key) { return key == "clahe" ? 0 : 1; }

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_range(const augment::Range& r) { return fmt_double(r.lo) + ", " + fmt_double(r.hi); }

}  // namespace

void CliConfig::validate() const {
  stack.validate();
  augment.validate();
  postproc.validate();
  if (!(iou_threshold >= 0.5 && iou_threshold < 1.0)) throw ConfigError("iou_threshold must be in [0.5, 1)");
}

CliConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }

  CliConfig cfg;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    const auto sec = table.find(section);
    if (sec == table.end()) {
      if (body.empty()) throw ConfigError("key outside any section: '" + section + "'");
      throw ConfigError("unknown config section [" + section + "]");
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [key, value] : body) entries.emplace_back(key, value.data());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return key_rank(a.first) < key_rank(b.first); });
    for (const auto& [key, value] : entries) {
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      try {
        it->second(cfg, value);
      } catch (const InvalidArgument& e) {
        throw ConfigError("[" + section + "] " + key + ": " + e.what());
      }
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_string(const CliConfig& cfg) {
  std::ostringstream o;
  o << "[stack]\nchannel_order = ";
  for (std::size_t i = 0; i < cfg.stack.channel_order.size(); ++i) {
    o << (i ? "," : "") << preprocess::selector_name(cfg.stack.channel_order[i]);
  }
  o << "\nclahe = " << (cfg.stack.clahe ? "true" : "false") << "\n";
  if (cfg.stack.clahe) {
    o << "tiles_x = " << cfg.stack.clahe->tiles_x << "\ntiles_y = " << cfg.stack.clahe->tiles_y
      << "\nclip_limit = " << fmt_double(cfg.stack.clahe->clip_limit) << "\n";
  }
  o << "derive_from_enhanced = " << (cfg.stack.derive_from_enhanced ? "true" : "false") << "\n\n";

  const auto& a = cfg.augment;
  o << "[augment]\nshear_deg = " << fmt_range(a.shear_deg) << "\nscale = " << fmt_range(a.scale)
    << "\ngauss_blur_sigma = " << fmt_range(a.gauss_blur_sigma) << "\nmedian_kernels = ";
  for (std::size_t i = 0; i < a.median_kernels.size(); ++i) o << (i ? "," : "") << a.median_kernels[i];
  o << "\nnoise_sigma = " << fmt_range(a.noise_sigma) << "\nhue_shift_deg = " << fmt_double(a.hue_shift_deg)
    << "\nsaturation_jitter = " << fmt_double(a.saturation_jitter) << "\nvalue_jitter = " << fmt_double(a.value_jitter)
    << "\np_affine = " << fmt_double(a.p_affine) << "\np_noise = " << fmt_double(a.p_noise)
    << "\np_color = " << fmt_double(a.p_color) << "\n\n";

  const auto& p = cfg.postproc;
  o << "[postproc]\nnp_threshold = " << fmt_double(p.np_threshold) << "\nsobel_aperture = " << p.sobel_aperture
    << "\nboundary_threshold = " << fmt_double(p.boundary_threshold) << "\nmin_object_px = " << p.min_object_px
    << "\nmarker_open_radius = " << p.marker_open_radius << "\nsmooth_kernel = " << p.smooth_kernel << "\n\n";

  o << "[metrics]\niou_threshold = " << fmt_double(cfg.iou_threshold) << "\n";
  return o.str();
}

}  // namespace cshover::config
