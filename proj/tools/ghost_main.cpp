#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghost/ghost.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ghost::fail(ghost::ErrorCode::io_error, path + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int cmd_run(const std::string& config_path, bool seed_set, std::uint64_t seed, int frames,
            const std::string& out_dir, int threads, bool bit_exact) {
  std::string stage = "read-config";
  try {
    const std::string text = slurp(config_path);
    stage = "parse-config";
    ghost::ScenarioSpec spec = ghost::parse_config(text);
    if (seed_set) spec.config.seed = seed;
    if (frames > 0) spec.frames = frames;
    if (!out_dir.empty()) spec.output_dir = out_dir;
    ghost::validate_spec(spec);

    ghost::StreamOptions opt;
    opt.threads = threads;
    opt.bit_exact = bit_exact;

    stage = "run-scenario";
    const ghost::RunManifest manifest = ghost::run_scenario(spec, opt);

    std::cout << "scenario " << manifest.scenario << " finished in " << manifest.wall_time_sec
              << " s, seed " << manifest.seed << "\n";
    for (const std::string& f : manifest.files)
      std::cout << "  wrote " << (std::filesystem::path(manifest.output_dir) / f).string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ghost run: " << stage << ": " << e.what() << "\n";
    return 1;
  }
}

int cmd_check_nfactorial(long long samples, int max_order) {
  std::string stage = "setup";
  try {
    if (samples < 10000)
      ghost::fail(ghost::ErrorCode::insufficient_samples, "--samples must be >= 10000");
    if (max_order < 2 || max_order > 8)
      ghost::fail(ghost::ErrorCode::invalid_argument, "--max-order must be in [2, 8]");

    ghost::OpticalConfig cfg;
    cfg.pitch = ghost::coherence_length(cfg) / 4.0;
    const int stride = static_cast<int>(std::ceil(ghost::coherence_length(cfg) / cfg.pitch));

    stage = "generate";
    ghost::SpeckleSynth synth(cfg);
    std::vector<double> pool;
    pool.reserve(static_cast<std::size_t>(samples));
    for (std::int64_t frame = 0; static_cast<long long>(pool.size()) < samples; ++frame) {
      const ghost::SpeckleFrame f = synth.frame(frame);
      for (int y = 0; y < f.intensity.ny; y += stride)
        for (int x = 0; x < f.intensity.nx; x += stride)
          pool.push_back(f.intensity.at(x, y));
    }
    pool.resize(static_cast<std::size_t>(samples));

    stage = "moments";
    bool all_ok = true;
    double factorial = 1.0;
    std::cout << "same-point moments over " << samples << " decorrelated samples\n";
    for (int N = 2; N <= max_order; ++N) {
      factorial *= N;
      const double g = ghost::g_same_point(pool, N);
      // tolerance doubles with each order: 5% at N=2, 10% at N=3, ...
      const double tol = 0.05 * std::pow(2.0, N - 2);
      const double rel = (g - factorial) / factorial;
      const bool ok = std::abs(rel) <= tol;
      all_ok = all_ok && ok;
      std::cout << "  N=" << N << "  g=" << g << "  target=" << factorial << "  rel="
                << rel * 100.0 << "%  tol=" << tol * 100.0 << "%  " << (ok ? "ok" : "FAIL")
                << "\n";
    }
    return all_ok ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "ghost check-nfactorial: " << stage << ": " << e.what() << "\n";
    return 1;
  }
}

int cmd_psf(const std::string& order_text, int frames) {
  std::string stage = "setup";
  try {
    const ghost::CorrelationOrder order = ghost::detail::parse_order_token(order_text);
    ghost::OpticalConfig cfg;
    cfg.pitch = ghost::coherence_length(cfg) / 4.0;
    cfg.nx = cfg.ny = 64;

    stage = "simulate";
    const ghost::ResolutionReport report = ghost::psf_fwhm(cfg, order, frames);
    const double lc = ghost::coherence_length(cfg);
    std::cout << "point-object FWHM at N=" << order.N << ", n=" << order.n << ": "
              << report.fwhm * 1e6 << " um (" << report.fwhm / lc
              << " coherence lengths) from " << frames << " frames\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ghost psf: " << stage << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-arm lensless ghost imaging simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int frames = 0, threads = 1;
  bool bit_exact = false;
  auto* run = app.add_subcommand("run", "Run a scenario described by a config file");
  run->add_option("config", config_path, "Scenario config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the run seed");
  run->add_option("--frames", frames, "Override the frame count");
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--bit-exact", bit_exact,
                "Fixed reduction order: outputs independent of --threads");

  long long samples = 200000;
  int max_order = 4;
  auto* check = app.add_subcommand("check-nfactorial",
                                   "Verify same-point moments against N!");
  check->add_option("--samples", samples, "Decorrelated pixel samples to draw");
  check->add_option("--max-order", max_order, "Highest moment order to check");

  std::string order_text;
  int psf_frames = 20000;
  auto* psf = app.add_subcommand("psf", "Measure the point-object response width");
  psf->add_option("--order", order_text, "Correlation order as N,n")->required();
  psf->add_option("--frames", psf_frames, "Frames to average")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(config_path, run->count("--seed") > 0, seed, frames, out_dir, threads,
                   bit_exact);
  if (check->parsed()) return cmd_check_nfactorial(samples, max_order);
  if (psf->parsed()) return cmd_psf(order_text, psf_frames);
  return 1;
}
