#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ghost/config.hpp"
#include "ghost/correlate.hpp"
#include "ghost/errors.hpp"
#include "ghost/mask.hpp"
#include "ghost/metrics.hpp"
#include "ghost/pgm.hpp"
#include "ghost/propagate.hpp"
#include "ghost/speckle.hpp"
#include "ghost/version.hpp"

namespace ghost {

enum class ScenarioId {
  character2d,
  order_sweep_2d,
  fourth_order_n_sweep,
  double_slit_1d,
  direct_image,
  nfactorial_check,
};

inline const char* to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::character2d: return "character2d";
    case ScenarioId::order_sweep_2d: return "order_sweep_2d";
    case ScenarioId::fourth_order_n_sweep: return "fourth_order_n_sweep";
    case ScenarioId::double_slit_1d: return "double_slit_1d";
    case ScenarioId::direct_image: return "direct_image";
    case ScenarioId::nfactorial_check: return "nfactorial_check";
  }
  return "unknown";
}

inline ScenarioId parse_scenario_id(const std::string& name) {
  for (ScenarioId id : {ScenarioId::character2d, ScenarioId::order_sweep_2d,
                        ScenarioId::fourth_order_n_sweep, ScenarioId::double_slit_1d,
                        ScenarioId::direct_image, ScenarioId::nfactorial_check})
    if (name == to_string(id)) return id;
  fail(ErrorCode::invalid_argument, "unknown scenario '" + name + "'");
}

/// Fully resolved run description: scenario, acquisition size, correlation
/// orders, optics, and object. parse_config fills unspecified fields from the
/// scenario defaults.
struct ScenarioSpec {
  ScenarioId id = ScenarioId::character2d;
  int frames = 0;
  std::vector<CorrelationOrder> orders;
  OpticalConfig config;
  std::string mask_source = "glyph";  ///< glyph|double_slit|square|pinhole|open or a PGM path
  std::string output_dir = "ghost_out";
  int block_count = 0;  ///< 0 disables the fluctuation summary column
  int glyph_scale = 8;
  double slit_width = 150e-6;
  double slit_sep = 570e-6;
  double slit_height = 30e-6;
  double square_side = 0.0;  ///< 0 means one coherence length
  double z3_near = 1.00e-3;
  double z3_far = 30.0e-3;
};

inline ScenarioSpec scenario_defaults(ScenarioId id) {
  ScenarioSpec spec;
  spec.id = id;

  OpticalConfig cfg2d;  // 532 nm, D = 3 mm, z1 = z2 = 240 mm
  cfg2d.pitch = coherence_length(cfg2d) / 4.0;

  switch (id) {
    case ScenarioId::character2d:
      spec.config = cfg2d;
      spec.frames = 50000;
      spec.orders = {{2, 1}, {10, 9}, {20, 19}};
      spec.mask_source = "glyph";
      spec.glyph_scale = 8;
      break;
    case ScenarioId::order_sweep_2d:
      spec.config = cfg2d;
      spec.config.nx = spec.config.ny = 64;
      spec.frames = 50000;
      spec.orders = {{2, 1}, {4, 3}, {6, 5}, {8, 7}, {10, 9}};
      spec.mask_source = "glyph";
      spec.glyph_scale = 2;
      break;
    case ScenarioId::fourth_order_n_sweep:
      spec.config = cfg2d;
      spec.config.nx = spec.config.ny = 64;
      spec.frames = 5000;
      spec.orders = {{4, 1}, {4, 2}, {4, 3}};
      spec.mask_source = "glyph";
      spec.glyph_scale = 2;
      spec.block_count = 5;
      break;
    case ScenarioId::double_slit_1d:
      spec.config.wavelength = 441.6e-9;
      spec.config.source_diameter = 1e-3;
      spec.config.z1 = spec.config.z2 = 354e-3;
      spec.config.pitch = 30e-6;
      spec.config.nx = 4096;
      spec.config.ny = 1;
      spec.frames = 20000;
      spec.orders = {{2, 1}, {4, 2}, {6, 3}, {8, 4}, {10, 5}};
      spec.mask_source = "double_slit";
      spec.slit_width = 150e-6;
      spec.slit_sep = 570e-6;
      spec.slit_height = 30e-6;
      break;
    case ScenarioId::direct_image:
      spec.config = cfg2d;
      spec.config.nx = spec.config.ny = 128;
      spec.frames = 20000;
      spec.orders = {{2, 1}};
      spec.mask_source = "double_slit";
      spec.slit_width = 85e-6;
      spec.slit_sep = 255e-6;
      spec.slit_height = 510e-6;
      break;
    case ScenarioId::nfactorial_check:
      spec.config = cfg2d;
      spec.frames = 100;
      spec.orders = {{2, 1}};
      spec.mask_source = "pinhole";
      spec.block_count = 5;
      break;
  }
  return spec;
}

inline ScenarioSpec validate_spec(const ScenarioSpec& spec) {
  if (spec.frames < 100)
    fail(ErrorCode::range_error,
         "frames = " + std::to_string(spec.frames) + " is below the minimum of 100");
  if (spec.orders.empty()) fail(ErrorCode::missing_required, "no correlation orders given");
  for (const CorrelationOrder& o : spec.orders) validate_order(o);
  validate_config(spec.config);
  if (spec.block_count < 0)
    fail(ErrorCode::range_error, "block_count must be >= 0");
  if (spec.block_count > 0) {
    if (spec.frames % spec.block_count != 0)
      fail(ErrorCode::range_error, "frames must divide evenly into block_count blocks");
    if (spec.frames / spec.block_count < 2)
      fail(ErrorCode::range_error, "fluctuation blocks need >= 2 frames each");
  }
  if (spec.glyph_scale < 1) fail(ErrorCode::range_error, "glyph_scale must be >= 1");
  return spec;
}

inline ObjectMask build_mask(const ScenarioSpec& spec) {
  const OpticalConfig& cfg = spec.config;
  if (spec.mask_source == "glyph") return make_builtin_glyph(cfg, spec.glyph_scale);
  if (spec.mask_source == "double_slit")
    return make_double_slit(cfg, spec.slit_width, spec.slit_sep, spec.slit_height);
  if (spec.mask_source == "square") {
    const double side = spec.square_side > 0.0 ? spec.square_side : coherence_length(cfg);
    return make_square(cfg, side);
  }
  if (spec.mask_source == "pinhole") return make_pinhole(cfg);
  if (spec.mask_source == "open") return ObjectMask(RealGrid(cfg.nx, cfg.ny, 1.0));
  return load_mask_pgm(spec.mask_source, cfg);
}

// ---------------------------------------------------------------------------
// Config text parsing: line-oriented "key = value", '#' comments, lengths
// with nm/um/mm/m suffixes.

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_length(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) fail(ErrorCode::bad_unit, key + ": empty length value");
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin)
    fail(ErrorCode::bad_unit, key + ": cannot parse number in '" + raw + "'");
  const std::string suffix = trim(std::string(end));
  if (suffix.empty() || suffix == "m") return value;
  if (suffix == "nm") return value * 1e-9;
  if (suffix == "um" || suffix == "\xc2\xb5m") return value * 1e-6;
  if (suffix == "mm") return value * 1e-3;
  fail(ErrorCode::bad_unit, key + ": unknown length unit '" + suffix + "'");
}

inline double parse_real(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    fail(ErrorCode::invalid_argument, key + ": cannot parse number '" + raw + "'");
  return value;
}

inline long long parse_int(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  const char* begin = text.c_str();
  char* end = nullptr;
  const long long value = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    fail(ErrorCode::invalid_argument, key + ": cannot parse integer '" + raw + "'");
  return value;
}

inline CorrelationOrder parse_order_token(const std::string& token) {
  const std::size_t sep = token.find_first_of(":,");
  if (sep == std::string::npos)
    fail(ErrorCode::invalid_argument, "order '" + token + "' must look like N:n");
  CorrelationOrder order;
  order.N = static_cast<int>(parse_int("order N", token.substr(0, sep)));
  order.n = static_cast<int>(parse_int("order n", token.substr(sep + 1)));
  return validate_order(order);
}

inline std::vector<CorrelationOrder> parse_orders(const std::string& raw) {
  // N:n pairs separated by whitespace, commas, or semicolons.
  std::vector<CorrelationOrder> orders;
  std::string piece;
  for (char c : raw + " ") {
    if (c == ' ' || c == '\t' || c == ',' || c == ';') {
      if (!piece.empty()) {
        orders.push_back(parse_order_token(piece));
        piece.clear();
      }
    } else {
      piece += c;
    }
  }
  if (orders.empty()) fail(ErrorCode::invalid_argument, "orders: empty list");
  return orders;
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace detail

/// Parses the text config format into a fully validated spec. The scenario id
/// selects defaults; every other key overrides one field. Unknown keys are
/// rejected so typos cannot silently fall back to defaults.
inline ScenarioSpec parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::invalid_argument, "expected 'key = value', got '" + stripped + "'");
    entries.emplace_back(detail::trim(stripped.substr(0, eq)),
                         detail::trim(stripped.substr(eq + 1)));
  }

  std::string scenario_name;
  for (const auto& [key, value] : entries)
    if (key == "scenario" || key == "scenario_id") scenario_name = value;
  if (scenario_name.empty())
    fail(ErrorCode::missing_required, "config must set 'scenario'");

  ScenarioSpec spec = scenario_defaults(parse_scenario_id(scenario_name));
  bool frames_set = false;

  for (const auto& [key, value] : entries) {
    if (key == "scenario" || key == "scenario_id") {
      continue;
    } else if (key == "frames") {
      spec.frames = static_cast<int>(detail::parse_int(key, value));
      frames_set = true;
    } else if (key == "seed") {
      spec.config.seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
    } else if (key == "wavelength") {
      spec.config.wavelength = detail::parse_length(key, value);
    } else if (key == "source_diameter") {
      spec.config.source_diameter = detail::parse_length(key, value);
    } else if (key == "z1") {
      spec.config.z1 = detail::parse_length(key, value);
    } else if (key == "z2") {
      spec.config.z2 = detail::parse_length(key, value);
    } else if (key == "z3") {
      spec.config.z3 = detail::parse_length(key, value);
    } else if (key == "pitch") {
      spec.config.pitch = detail::parse_length(key, value);
    } else if (key == "nx") {
      spec.config.nx = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "ny") {
      spec.config.ny = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "mean_intensity") {
      spec.config.mean_intensity = detail::parse_real(key, value);
    } else if (key == "orders") {
      spec.orders = detail::parse_orders(value);
    } else if (key == "mask" || key == "mask_source") {
      spec.mask_source = value;
    } else if (key == "glyph_scale") {
      spec.glyph_scale = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "slit_width") {
      spec.slit_width = detail::parse_length(key, value);
    } else if (key == "slit_sep" || key == "slit_separation") {
      spec.slit_sep = detail::parse_length(key, value);
    } else if (key == "slit_height") {
      spec.slit_height = detail::parse_length(key, value);
    } else if (key == "square_side") {
      spec.square_side = detail::parse_length(key, value);
    } else if (key == "z3_near") {
      spec.z3_near = detail::parse_length(key, value);
    } else if (key == "z3_far") {
      spec.z3_far = detail::parse_length(key, value);
    } else if (key == "block_count") {
      spec.block_count = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "output_dir" || key == "out") {
      spec.output_dir = value;
    } else {
      fail(ErrorCode::unknown_key, "unknown key '" + key + "'");
    }
  }

  if (!frames_set) fail(ErrorCode::missing_required, "config must set 'frames'");
  return validate_spec(spec);
}

/// Canonical key = value echo of a resolved spec, also re-parseable.
inline std::string serialize_spec(const ScenarioSpec& spec) {
  std::ostringstream out;
  out << "scenario = " << to_string(spec.id) << "\n";
  out << "frames = " << spec.frames << "\n";
  out << "seed = " << spec.config.seed << "\n";
  out << "orders =";
  for (const CorrelationOrder& o : spec.orders) out << " " << o.N << ":" << o.n;
  out << "\n";
  out << "wavelength = " << detail::format_double(spec.config.wavelength) << "\n";
  out << "source_diameter = " << detail::format_double(spec.config.source_diameter) << "\n";
  out << "z1 = " << detail::format_double(spec.config.z1) << "\n";
  out << "z2 = " << detail::format_double(spec.config.z2) << "\n";
  out << "pitch = " << detail::format_double(spec.config.pitch) << "\n";
  out << "nx = " << spec.config.nx << "\n";
  out << "ny = " << spec.config.ny << "\n";
  out << "mean_intensity = " << detail::format_double(spec.config.mean_intensity) << "\n";
  out << "mask = " << spec.mask_source << "\n";
  if (spec.mask_source == "glyph") out << "glyph_scale = " << spec.glyph_scale << "\n";
  if (spec.mask_source == "double_slit") {
    out << "slit_width = " << detail::format_double(spec.slit_width) << "\n";
    out << "slit_sep = " << detail::format_double(spec.slit_sep) << "\n";
    out << "slit_height = " << detail::format_double(spec.slit_height) << "\n";
  }
  if (spec.mask_source == "square")
    out << "square_side = " << detail::format_double(spec.square_side) << "\n";
  if (spec.id == ScenarioId::direct_image) {
    out << "z3_near = " << detail::format_double(spec.z3_near) << "\n";
    out << "z3_far = " << detail::format_double(spec.z3_far) << "\n";
  }
  out << "block_count = " << spec.block_count << "\n";
  out << "output_dir = " << spec.output_dir << "\n";
  return out.str();
}

struct RunManifest {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::vector<std::string> files;  ///< names relative to output_dir
  double wall_time_sec = 0.0;
  std::string version;
  std::string spec_echo;
};

namespace detail {

/// Across-block SD of gamma per order (mean over pixels), with blocks
/// re-streamed so memory stays flat in the frame count. Matches
/// estimator_fluctuation on materialized data.
inline std::vector<double> block_fluctuation(const OpticalConfig& cfg, const ObjectMask& mask,
                                             const std::vector<CorrelationOrder>& orders,
                                             int frames, int block_count, StreamOptions opt) {
  const int block = frames / block_count;
  const std::size_t px = static_cast<std::size_t>(cfg.nx) * cfg.ny;
  std::vector<std::vector<double>> sum(orders.size(), std::vector<double>(px, 0.0));
  std::vector<std::vector<double>> sum_sq(orders.size(), std::vector<double>(px, 0.0));
  for (int b = 0; b < block_count; ++b) {
    StreamOptions block_opt = opt;
    block_opt.first_frame = opt.first_frame + static_cast<std::int64_t>(b) * block;
    const auto images = gamma_streamed(cfg, {&mask}, orders, block, block_opt);
    for (std::size_t o = 0; o < orders.size(); ++o)
      for (std::size_t k = 0; k < px; ++k) {
        const double g = images[o].gamma[k];
        sum[o][k] += g;
        sum_sq[o][k] += g * g;
      }
  }
  std::vector<double> fluct(orders.size(), 0.0);
  for (std::size_t o = 0; o < orders.size(); ++o) {
    CompensatedSum sd_sum;
    for (std::size_t k = 0; k < px; ++k) {
      const double mean = sum[o][k] / block_count;
      double var = (sum_sq[o][k] - static_cast<double>(block_count) * mean * mean) /
                   (block_count - 1);
      if (var < 0.0) var = 0.0;
      sd_sum.add(std::sqrt(var));
    }
    fluct[o] = sd_sum.value() / static_cast<double>(px);
  }
  return fluct;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, path + ": cannot open for writing");
  out << content;
  if (!out) fail(ErrorCode::io_error, path + ": write failed");
}

inline std::string csv_cell(double v) { return format_double(v); }

}  // namespace detail

/// Runs one scenario end to end: streams frames through the two-pass
/// estimator for every order, writes a normalized 16-bit PGM and a
/// cross-section CSV per order, a summary CSV, scenario-specific extras
/// (direct-imaging projections, moment checks), and a manifest.
inline RunManifest run_scenario(const ScenarioSpec& spec_in, StreamOptions opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioSpec spec = validate_spec(spec_in);
  const OpticalConfig& cfg = spec.config;

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec) fail(ErrorCode::io_error, spec.output_dir + ": cannot create (" + ec.message() + ")");
  const auto out_path = [&](const std::string& name) {
    return (fs::path(spec.output_dir) / name).string();
  };

  RunManifest manifest;
  manifest.scenario = to_string(spec.id);
  manifest.seed = cfg.seed;
  manifest.output_dir = spec.output_dir;
  manifest.version = kVersion;
  manifest.spec_echo = serialize_spec(spec);

  const ObjectMask mask = build_mask(spec);
  const std::vector<GhostImage> images =
      gamma_streamed(cfg, {&mask}, spec.orders, spec.frames, opt);

  std::vector<double> fluct;
  if (spec.block_count > 0)
    fluct = detail::block_fluctuation(cfg, mask, spec.orders, spec.frames, spec.block_count, opt);

  // Per-order image and cross-section.
  const int row = cfg.ny / 2;
  for (std::size_t o = 0; o < spec.orders.size(); ++o) {
    const GhostImage norm = normalize_image(images[o]);
    const std::string tag = to_string(spec.orders[o]);

    const std::string pgm_name = "gamma_" + tag + ".pgm";
    write_pgm16(out_path(pgm_name), norm.gamma);
    manifest.files.push_back(pgm_name);

    std::ostringstream csv;
    csv << "x_index,x_m,gamma,gamma_normalized\n";
    for (int x = 0; x < cfg.nx; ++x) {
      const double x_m = (x - cfg.nx / 2) * cfg.pitch;
      csv << x << "," << detail::csv_cell(x_m) << ","
          << detail::csv_cell(images[o].gamma.at(x, row)) << ","
          << detail::csv_cell(norm.gamma.at(x, row)) << "\n";
    }
    const std::string csv_name = "cross_section_" + tag + ".csv";
    detail::write_text_file(out_path(csv_name), csv.str());
    manifest.files.push_back(csv_name);
  }

  // Summary.
  std::ostringstream summary;
  summary << "kind,N,n,frames,gamma_in,gamma_out,visibility,fluctuation,fidelity,m_obj\n";
  const double mask_cells = m_obj(mask, cfg);
  for (std::size_t o = 0; o < spec.orders.size(); ++o) {
    const VisibilityReport vis = visibility(images[o], mask, cfg);
    summary << "gamma," << spec.orders[o].N << "," << spec.orders[o].n << ","
            << images[o].frames_used << "," << detail::csv_cell(vis.gamma_in) << ","
            << detail::csv_cell(vis.gamma_out) << "," << detail::csv_cell(vis.v) << ",";
    if (!fluct.empty()) summary << detail::csv_cell(fluct[o]);
    summary << "," << detail::csv_cell(fidelity(images[o], mask)) << ","
            << detail::csv_cell(mask_cells) << "\n";
  }

  if (spec.id == ScenarioId::direct_image) {
    for (const auto& [label, z3] : {std::pair<const char*, double>{"near", spec.z3_near},
                                    std::pair<const char*, double>{"far", spec.z3_far}}) {
      RealGrid img = direct_image(cfg, mask, z3, spec.frames);
      const double peak = grid_max(img);
      if (!(peak > 0.0)) fail(ErrorCode::all_zero_image, "direct image is identically zero");
      RealGrid norm = img;
      for (auto& v : norm.data) v /= peak;
      const std::string pgm_name = std::string("direct_") + label + ".pgm";
      write_pgm16(out_path(pgm_name), norm);
      manifest.files.push_back(pgm_name);

      GhostImage wrapped;
      wrapped.gamma = std::move(img);
      wrapped.order = spec.orders.front();
      wrapped.frames_used = spec.frames;
      summary << "direct_" << label << ",,," << spec.frames << ",,,,,"
              << detail::csv_cell(fidelity(wrapped, mask)) << ","
              << detail::csv_cell(mask_cells) << "\n";
    }
  }

  detail::write_text_file(out_path("summary.csv"), summary.str());
  manifest.files.push_back("summary.csv");

  if (spec.id == ScenarioId::nfactorial_check) {
    const FrameEnsemble ensemble = generate_ensemble(cfg, opt.first_frame, spec.frames);
    const int stride = static_cast<int>(std::ceil(coherence_length(cfg) / cfg.pitch));
    std::vector<double> samples;
    for (const SpeckleFrame& f : ensemble.frames)
      for (int y = 0; y < f.intensity.ny; y += stride)
        for (int x = 0; x < f.intensity.nx; x += stride)
          samples.push_back(f.intensity.at(x, y));

    std::ostringstream moments;
    moments << "metric,value,target\n";
    double factorial = 1.0;
    for (int N = 2; N <= 4; ++N) {
      factorial *= N;
      moments << "g" << N << "," << detail::csv_cell(g_same_point(samples, N)) << ","
              << detail::csv_cell(factorial) << "\n";
    }
    moments << "ks," << detail::csv_cell(exponential_fit_test(ensemble, stride)) << ",0\n";
    detail::write_text_file(out_path("moments.csv"), moments.str());
    manifest.files.push_back("moments.csv");
  }

  manifest.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream man;
  man << "version = " << manifest.version << "\n";
  man << "scenario = " << manifest.scenario << "\n";
  man << "seed = " << manifest.seed << "\n";
  man << "wall_time_sec = " << detail::csv_cell(manifest.wall_time_sec) << "\n";
  man << "files =";
  for (const std::string& f : manifest.files) man << " " << f;
  man << "\n\n# resolved spec\n" << manifest.spec_echo;
  detail::write_text_file(out_path("manifest.txt"), man.str());
  manifest.files.push_back("manifest.txt");

  return manifest;
}

}  // namespace ghost
