#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ghost/frame_io.hpp"
#include "ghost/scenario.hpp"
#include "ghost/speckle.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ghost::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ghost::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ghost::ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("config text with units resolves to meters") {
  const ghost::ScenarioSpec spec = ghost::parse_config(
      "scenario = double_slit_1d\n"
      "frames = 200\n"
      "wavelength = 532nm\n"
      "z1 = 0.24 m\n"
      "z2 = 240mm\n"
      "pitch = 10um\n"
      "slit_sep = 570\xc2\xb5m\n");
  CHECK(spec.config.wavelength == Catch::Approx(5.32e-7).epsilon(1e-12));
  CHECK(spec.config.z1 == Catch::Approx(0.24).epsilon(1e-12));
  CHECK(spec.config.z2 == Catch::Approx(0.24).epsilon(1e-12));
  CHECK(spec.config.pitch == Catch::Approx(1e-5).epsilon(1e-12));
  CHECK(spec.slit_sep == Catch::Approx(5.7e-4).epsilon(1e-12));
  CHECK(spec.frames == 200);
}

TEST_CASE("scenario defaults are filled before overrides") {
  const ghost::ScenarioSpec spec = ghost::parse_config(
      "scenario = double_slit_1d\n"
      "frames = 250\n");
  const ghost::ScenarioSpec defaults = ghost::scenario_defaults(ghost::ScenarioId::double_slit_1d);
  CHECK(spec.config.wavelength == defaults.config.wavelength);
  CHECK(spec.config.nx == defaults.config.nx);
  CHECK(spec.config.ny == 1);
  CHECK(spec.orders.size() == defaults.orders.size());
  CHECK(spec.frames == 250);
}

TEST_CASE("comments, blank lines, and duplicate keys") {
  const ghost::ScenarioSpec spec = ghost::parse_config(
      "# a full-line comment\n"
      "scenario = nfactorial_check\n"
      "\n"
      "frames = 150\n"
      "frames = 300\n"
      "seed = 17\n");
  CHECK(spec.frames == 300);
  CHECK(spec.config.seed == 17);
}

TEST_CASE("order lists accept colon pairs with mixed separators") {
  const ghost::ScenarioSpec spec = ghost::parse_config(
      "scenario = character2d\n"
      "frames = 100\n"
      "orders = 2:1, 4:3; 10:9\n");
  REQUIRE(spec.orders.size() == 3);
  CHECK(spec.orders[0] == ghost::CorrelationOrder{2, 1});
  CHECK(spec.orders[1] == ghost::CorrelationOrder{4, 3});
  CHECK(spec.orders[2] == ghost::CorrelationOrder{10, 9});
}

TEST_CASE("config parsing rejects bad input with the right codes") {
  CHECK(code_of([] { ghost::parse_config("frames = 100\n"); }) ==
        ghost::ErrorCode::missing_required);
  CHECK(code_of([] { ghost::parse_config("scenario = character2d\n"); }) ==
        ghost::ErrorCode::missing_required);
  CHECK(code_of([] {
          ghost::validate_spec(ghost::parse_config("scenario = character2d\nframes = 50\n"));
        }) == ghost::ErrorCode::range_error);
  CHECK(code_of([] {
          ghost::parse_config("scenario = character2d\nframes = 100\nshutter = 1\n");
        }) == ghost::ErrorCode::unknown_key);
  CHECK(code_of([] {
          ghost::parse_config("scenario = character2d\nframes = 100\nwavelength = 532xy\n");
        }) == ghost::ErrorCode::bad_unit);
  CHECK(code_of([] {
          ghost::parse_config("scenario = character2d\nframes = 100\norders = 5\n");
        }) == ghost::ErrorCode::invalid_argument);
  CHECK(code_of([] { ghost::parse_config("scenario = warp_drive\nframes = 100\n"); }) ==
        ghost::ErrorCode::invalid_argument);
}

TEST_CASE("serialized specs parse back to the same settings") {
  ghost::ScenarioSpec spec = ghost::scenario_defaults(ghost::ScenarioId::fourth_order_n_sweep);
  spec.frames = 1250;
  spec.config.seed = 99;
  spec.glyph_scale = 3;
  const std::string text = ghost::serialize_spec(spec);
  const ghost::ScenarioSpec parsed = ghost::parse_config(text);
  CHECK(parsed.id == spec.id);
  CHECK(parsed.frames == spec.frames);
  CHECK(parsed.config.seed == spec.config.seed);
  CHECK(parsed.glyph_scale == spec.glyph_scale);
  CHECK(parsed.config.pitch == spec.config.pitch);
  CHECK(parsed.orders.size() == spec.orders.size());
  for (std::size_t k = 0; k < spec.orders.size(); ++k) CHECK(parsed.orders[k] == spec.orders[k]);
  CHECK(parsed.block_count == spec.block_count);
}

TEST_CASE("frame files round-trip through disk") {
  ghost::OpticalConfig cfg;
  cfg.nx = 24;
  cfg.ny = 16;
  cfg.pitch = ghost::coherence_length(cfg) / 4.0;
  const ghost::FrameEnsemble ensemble = ghost::generate_ensemble(cfg, 0, 5);

  const std::string path = "harness_frames.bin";
  ghost::write_frames(ensemble, path, cfg.seed);

  std::uint64_t seed = 0;
  const ghost::FrameEnsemble loaded = ghost::read_frames(path, &seed);
  CHECK(seed == cfg.seed);
  REQUIRE(loaded.count() == ensemble.count());
  for (std::size_t t = 0; t < ensemble.frames.size(); ++t) {
    const auto& a = ensemble.frames[t].intensity;
    const auto& b = loaded.frames[t].intensity;
    REQUIRE(a.nx == b.nx);
    REQUIRE(a.ny == b.ny);
    for (std::size_t k = 0; k < a.data.size(); ++k)
      REQUIRE(b.data[k] == static_cast<double>(static_cast<float>(a.data[k])));
  }

  // A second write of the loaded ensemble must be byte-identical.
  const std::string again = "harness_frames2.bin";
  ghost::write_frames(loaded, again, seed);
  CHECK(slurp(again) == slurp(path));
  std::remove(path.c_str());
  std::remove(again.c_str());
}

TEST_CASE("frame files reject corruption with located errors") {
  ghost::OpticalConfig cfg;
  cfg.nx = 8;
  cfg.ny = 8;
  const ghost::FrameEnsemble ensemble = ghost::generate_ensemble(cfg, 0, 2);
  const std::string path = "harness_corrupt.bin";
  ghost::write_frames(ensemble, path, 1);
  const std::string full = slurp(path);

  {
    std::ofstream out(path, std::ios::binary);
    out.write(full.data(), static_cast<std::streamsize>(full.size() - 37));
  }
  try {
    ghost::read_frames(path);
    FAIL("expected an error");
  } catch (const ghost::Error& e) {
    CHECK(e.code() == ghost::ErrorCode::malformed_file);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }

  {
    std::string bad_magic = full;
    bad_magic[0] = 'X';
    std::ofstream out(path, std::ios::binary);
    out.write(bad_magic.data(), static_cast<std::streamsize>(bad_magic.size()));
  }
  CHECK(code_of([&] { ghost::read_frames(path); }) == ghost::ErrorCode::malformed_file);

  {
    std::string bad_version = full;
    bad_version[4] = 9;  // version low byte
    std::ofstream out(path, std::ios::binary);
    out.write(bad_version.data(), static_cast<std::streamsize>(bad_version.size()));
  }
  CHECK(code_of([&] { ghost::read_frames(path); }) == ghost::ErrorCode::version_mismatch);

  std::remove(path.c_str());
}

TEST_CASE("empty ensembles survive the disk format") {
  ghost::FrameEnsemble empty;
  const std::string path = "harness_empty.bin";
  ghost::write_frames(empty, path, 5);
  std::uint64_t seed = 0;
  const ghost::FrameEnsemble loaded = ghost::read_frames(path, &seed);
  CHECK(loaded.count() == 0);
  CHECK(seed == 5);
  std::remove(path.c_str());
}

TEST_CASE("a small scenario run writes every advertised file") {
  ghost::ScenarioSpec spec = ghost::scenario_defaults(ghost::ScenarioId::fourth_order_n_sweep);
  spec.frames = 120;
  spec.block_count = 2;
  spec.config.nx = spec.config.ny = 32;
  spec.glyph_scale = 1;
  spec.orders = {{4, 1}, {4, 3}};
  spec.output_dir = "harness_run_a";

  ghost::StreamOptions opt;
  opt.bit_exact = true;
  const ghost::RunManifest manifest = ghost::run_scenario(spec, opt);
  CHECK(manifest.scenario == "fourth_order_n_sweep");
  CHECK(manifest.files.size() >= 5);  // 2 maps, 2 cross sections, summary
  for (const std::string& name : manifest.files) {
    const std::filesystem::path p = std::filesystem::path(spec.output_dir) / name;
    INFO(p.string());
    CHECK(std::filesystem::file_size(p) > 0);
  }
  CHECK(std::filesystem::exists(std::filesystem::path(spec.output_dir) / "manifest.txt"));

  const std::string summary = slurp(spec.output_dir + "/summary.csv");
  CHECK(summary.find("kind,N,n,frames") == 0);
  CHECK(summary.find("gamma,4,1") != std::string::npos);
  CHECK(summary.find("gamma,4,3") != std::string::npos);

  // One data row per pixel column plus the header.
  const std::string cross = slurp(spec.output_dir + "/cross_section_N4n1.csv");
  CHECK(std::count(cross.begin(), cross.end(), '\n') == spec.config.nx + 1);

  std::filesystem::remove_all(spec.output_dir);
}

TEST_CASE("scenario runs are reproducible byte for byte") {
  ghost::ScenarioSpec spec = ghost::scenario_defaults(ghost::ScenarioId::fourth_order_n_sweep);
  spec.frames = 100;
  spec.block_count = 0;
  spec.config.nx = spec.config.ny = 32;
  spec.glyph_scale = 1;
  spec.orders = {{2, 1}};

  ghost::StreamOptions opt;
  opt.bit_exact = true;

  spec.output_dir = "harness_run_b1";
  ghost::run_scenario(spec, opt);
  spec.output_dir = "harness_run_b2";
  ghost::StreamOptions threaded = opt;
  threaded.threads = 3;
  ghost::run_scenario(spec, threaded);

  CHECK(slurp("harness_run_b1/summary.csv") == slurp("harness_run_b2/summary.csv"));
  CHECK(slurp("harness_run_b1/cross_section_N2n1.csv") ==
        slurp("harness_run_b2/cross_section_N2n1.csv"));
  CHECK(slurp("harness_run_b1/gamma_N2n1.pgm") == slurp("harness_run_b2/gamma_N2n1.pgm"));

  std::filesystem::remove_all("harness_run_b1");
  std::filesystem::remove_all("harness_run_b2");
}

TEST_CASE("the projection scenario writes both defocus planes") {
  ghost::ScenarioSpec spec = ghost::scenario_defaults(ghost::ScenarioId::direct_image);
  spec.frames = 150;
  spec.config.nx = spec.config.ny = 64;
  spec.slit_width = 55e-6;
  spec.slit_sep = 160e-6;
  spec.slit_height = 320e-6;
  spec.z3_far = 8e-3;  // keep the transfer function sampled on the small grid
  spec.output_dir = "harness_run_c";

  const ghost::RunManifest manifest = ghost::run_scenario(spec);
  CHECK(std::filesystem::exists("harness_run_c/direct_near.pgm"));
  CHECK(std::filesystem::exists("harness_run_c/direct_far.pgm"));
  const std::string summary = slurp("harness_run_c/summary.csv");
  CHECK(summary.find("direct_near") != std::string::npos);
  CHECK(summary.find("direct_far") != std::string::npos);
  CHECK(manifest.wall_time_sec >= 0.0);
  std::filesystem::remove_all("harness_run_c");
}

TEST_CASE("the statistics scenario writes a moment table") {
  ghost::ScenarioSpec spec = ghost::scenario_defaults(ghost::ScenarioId::nfactorial_check);
  spec.frames = 100;
  spec.config.nx = spec.config.ny = 64;
  spec.config.pitch = ghost::coherence_length(spec.config) / 4.0;
  spec.output_dir = "harness_run_d";

  ghost::run_scenario(spec);
  const std::string moments = slurp("harness_run_d/moments.csv");
  CHECK(moments.find("g2") != std::string::npos);
  CHECK(moments.find("g3") != std::string::npos);
  CHECK(moments.find("g4") != std::string::npos);
  CHECK(moments.find("ks") != std::string::npos);
  std::filesystem::remove_all("harness_run_d");
}
