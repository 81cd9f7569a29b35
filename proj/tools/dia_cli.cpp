// dia: synthetic data, configuration search, VSDS heatmaps and quality metrics.
//
// Exit codes: 0 ok, 2 usage or bad input, 3 infeasible run (report still
// written), 4 sidecar transport failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dia/dia.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSidecar = 4;

std::pair<int, int> parse_pair(const std::string& s, char sep, const char* what) {
  const auto at = s.find(sep);
  dia::require(at != std::string::npos, dia::ErrorKind::parameter, std::string(what) + " must look like A" + sep + "B");
  try {
    std::size_t used_a = 0, used_b = 0;
    const int a = std::stoi(s.substr(0, at), &used_a);
    const int b = std::stoi(s.substr(at + 1), &used_b);
    dia::require(used_a == at && used_b == s.size() - at - 1, dia::ErrorKind::parameter, "");
    return {a, b};
  } catch (const std::exception&) {
    throw dia::Error(dia::ErrorKind::parameter, std::string("cannot parse ") + what + " '" + s + "'");
  }
}

// ---------------------------------------------------------------------------

struct GenArgs {
  int count = 4;
  std::string resolution = "64x64";
  int frames = 16;
  int channels = 3;
  std::uint64_t seed = 1;
  std::string motif = "mixed";
  std::string out = "data/synthetic";
};

int cmd_gen(const GenArgs& a) {
  const auto [w, h] = parse_pair(a.resolution, 'x', "--resolution");
  const dia::Motif cycle[] = {dia::Motif::moving_square, dia::Motif::gradient_drift, dia::Motif::noise,
                              dia::Motif::constant};
  for (int i = 0; i < a.count; ++i) {
    const dia::Motif motif = a.motif == "mixed" ? cycle[i % 4] : dia::motif_from_string(a.motif);
    auto video = dia::gen_synthetic({w, h, a.channels, a.frames, motif}, dia::mix_seed(a.seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof name, "video_%03d", i);
    video.id = std::string(name) + "_" + std::string(dia::to_string(motif));
    dia::save_video(video, fs::path(a.out) / name);
  }
  std::cout << "wrote " << a.count << " videos to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string dataset;
  std::string strategy = "opro-dia";
  std::optional<int> rounds, population, batch, jobs, encoder_dim;
  std::optional<double> rmax, tau, beta;
  std::optional<std::uint64_t> seed, encoder_seed;
  std::string proposer = "scripted";
  std::string encoder = "stub";
  std::string sidecar = "http://127.0.0.1:8765";
  std::string out = "out";
  std::string config;
  bool resample_batch = false;
};

// Run file: {"params": {...}, "base_config": {...}}. Unknown keys are errors.
void apply_run_file(const fs::path& path, dia::RunParams& p, dia::Config& base) {
  json j;
  try {
    j = json::parse(dia::read_file_bytes(path));
  } catch (const json::exception& e) {
    throw dia::Error(dia::ErrorKind::format, "config file '" + path.string() + "': " + e.what());
  }
  dia::require(j.is_object(), dia::ErrorKind::format, "config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "base_config") {
      base = dia::config_from_json(value, base);
    } else if (key == "params") {
      dia::require(value.is_object(), dia::ErrorKind::format, "\"params\" must be an object");
      try {
        for (const auto& [k, v] : value.items()) {
          if (k == "rounds") p.rounds = v.get<int>();
          else if (k == "population") p.population = v.get<int>();
          else if (k == "batch") p.batch = v.get<int>();
          else if (k == "r_max") p.r_max = v.get<double>();
          else if (k == "seed") p.seed = v.get<std::uint64_t>();
          else if (k == "tau") p.tau = v.get<double>();
          else if (k == "beta") p.beta = v.get<double>();
          else if (k == "jobs") p.jobs = v.get<int>();
          else if (k == "encoder_dim") p.encoder_dim = v.get<int>();
          else if (k == "encoder_seed") p.encoder_seed = v.get<std::uint64_t>();
          else if (k == "resample_batch") p.resample_batch = v.get<bool>();
          else if (k == "prompt_top_feasible") p.prompt_top_feasible = v.get<int>();
          else if (k == "prompt_top_infeasible") p.prompt_top_infeasible = v.get<int>();
          else throw dia::Error(dia::ErrorKind::format, "unknown params key '" + k + "'");
        }
      } catch (const json::exception& e) {
        throw dia::Error(dia::ErrorKind::format, std::string("bad params value: ") + e.what());
      }
    } else {
      throw dia::Error(dia::ErrorKind::format, "unknown config file key '" + key + "'");
    }
  }
}

int cmd_run(const RunArgs& a) {
  dia::RunParams p;
  dia::Config base;
  if (!a.config.empty()) apply_run_file(a.config, p, base);
  if (a.rounds) p.rounds = *a.rounds;
  if (a.population) p.population = *a.population;
  if (a.batch) p.batch = *a.batch;
  if (a.rmax) p.r_max = *a.rmax;
  if (a.seed) p.seed = *a.seed;
  if (a.tau) p.tau = *a.tau;
  if (a.beta) p.beta = *a.beta;
  if (a.jobs) p.jobs = *a.jobs;
  if (a.encoder_dim) p.encoder_dim = *a.encoder_dim;
  if (a.encoder_seed) p.encoder_seed = *a.encoder_seed;
  if (a.resample_batch) p.resample_batch = true;
  p.proposer = a.proposer == "remote" ? dia::ProposerKind::remote : dia::ProposerKind::scripted;
  p.sidecar_url = a.sidecar;
  const auto strategy = dia::strategy_from_string(a.strategy);
  dia::apply_strategy(strategy, p, base);
  p.validate();

  const auto dataset = dia::load_dataset(a.dataset);
  dia::require(static_cast<int>(dataset.size()) >= p.batch, dia::ErrorKind::parameter,
               "dataset '" + a.dataset + "' holds " + std::to_string(dataset.size()) + " videos, batch needs " +
                   std::to_string(p.batch));

  dia::SidecarClient client(p.sidecar_url);
  std::unique_ptr<dia::FrameEncoder> encoder;
  if (a.encoder == "remote") encoder = std::make_unique<dia::RemoteFrameEncoder>(client, p.encoder_dim);
  else encoder = dia::stub_encoder(p.encoder_dim, p.encoder_seed);

  std::unique_ptr<dia::Proposer> proposer;
  if (p.proposer == dia::ProposerKind::remote) {
    proposer = std::make_unique<dia::RemoteProposer>(client, p.seed,
                                                     [](const std::string& m) { std::cerr << "warning: " << m << "\n"; });
  } else {
    proposer = std::make_unique<dia::ScriptedProposer>(p.seed);
  }

  const auto report = dia::run(p, base, dataset, *proposer, *encoder, std::string(dia::to_string(strategy)));
  dia::write_report(report, a.out);
  for (const auto& s : report.rounds) {
    std::cout << "round " << s.round << ": best_j=" << dia::format_number(s.best_j)
              << " feasible=" << s.feasible_count << "/" << p.population << "\n";
  }
  if (report.infeasible()) {
    const auto& lv = report.history[*report.least_violating];
    std::cerr << "infeasible run: no candidate met r_max=" << dia::format_bytes(p.r_max)
              << "; least violating mean payload " << dia::format_bytes(lv.r_mean) << " bytes\n";
    return kExitInfeasible;
  }
  const auto& best = report.history[*report.best];
  std::cout << "best: j=" << dia::format_number(best.j) << " bytes=" << dia::format_bytes(best.r_mean)
            << " config=" << dia::to_json(best.config).dump() << "\n"
            << "report written to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VsdsArgs {
  std::string video;
  std::string out = "vsds";
  std::string grid = "4x4";
  double lambda = dia::kDefaultRidgeLambda;
  int window = 0;  // 0: whole clip
  int encoder_dim = 32;
  std::uint64_t encoder_seed = 0;
};

// Min-max scaled to 0..255; a flat map becomes all zeros.
dia::Frame heatmap_image(const dia::Heatmap& h) {
  const auto [lo, hi] = std::minmax_element(h.values.begin(), h.values.end());
  dia::Frame f(h.width, h.height, 1);
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    f.pixels[i] = span > 0 ? static_cast<std::uint8_t>(std::lround((h.values[i] - *lo) / span * 255.0)) : 0;
  }
  return f;
}

std::string heatmap_csv(const dia::Heatmap& h) {
  std::string out;
  char buf[40];
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", h.at(x, y));
      out += (x ? "," : "") + std::string(buf);
    }
    out += "\n";
  }
  return out;
}

json ranking_json(const dia::BlockRanking& r) { return {{"weights", r.weights}, {"ordering", r.ordering}}; }

int cmd_vsds(const VsdsArgs& a) {
  const auto video = dia::load_video_dir(a.video);
  const auto [rows, cols] = parse_pair(a.grid, 'x', "--grid");
  const auto grid = dia::partition_blocks(video.width(), video.height(), rows, cols);
  const auto encoder = dia::stub_encoder(a.encoder_dim, a.encoder_seed);
  dia::require(video.frame_count() >= 2, dia::ErrorKind::parameter, "VSDS needs a video with at least 2 frames");
  const auto stream = dia::vsds_stream(video, *encoder, a.lambda);

  fs::create_directories(a.out);
  for (const auto& h : stream.heatmaps) {
    char name[32];
    std::snprintf(name, sizeof name, "heatmap_%04d", h.t);
    dia::write_file_atomic(fs::path(a.out) / (std::string(name) + ".pgm"), dia::encode_pnm(heatmap_image(h)));
    dia::write_file_atomic(fs::path(a.out) / (std::string(name) + ".csv"), heatmap_csv(h));
  }
  json ranking = ranking_json(dia::block_ranking(stream.heatmaps, grid));
  if (a.window > 0) {
    json windows = json::array();
    for (const auto& r : dia::windowed_block_rankings(stream.heatmaps, grid, a.window)) windows.push_back(ranking_json(r));
    ranking["window"] = a.window;
    ranking["windows"] = windows;
  }
  dia::write_file_atomic(fs::path(a.out) / "ranking.json", ranking.dump(2) + "\n");
  std::cout << "wrote " << stream.heatmaps.size() << " heatmaps and ranking.json to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_metrics(const std::string& reference, const std::string& distorted) {
  const auto q = dia::ssim_video(dia::load_video_dir(reference), dia::load_video_dir(distorted));
  std::cout << json{{"ssim", q.ssim}, {"tpq", q.tpq}}.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Degree-of-information-abstraction toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a synthetic video dataset");
  g->add_option("--count", gen.count, "Number of videos")->check(CLI::PositiveNumber);
  g->add_option("--resolution", gen.resolution, "WIDTHxHEIGHT (even)");
  g->add_option("--frames", gen.frames, "Frames per video")->check(CLI::PositiveNumber);
  g->add_option("--channels", gen.channels, "1 or 3")->check(CLI::IsMember({1, 3}));
  g->add_option("--seed", gen.seed, "Dataset seed");
  g->add_option("--motif", gen.motif, "constant|moving_square|noise|gradient_drift|mixed")
      ->check(CLI::IsMember({"constant", "moving_square", "noise", "gradient_drift", "mixed"}));
  g->add_option("--out", gen.out, "Output directory");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Search configurations with one strategy");
  r->add_option("--dataset", run.dataset, "Directory of video folders")->required();
  r->add_option("--strategy", run.strategy)->check(CLI::IsMember({"pred-only", "opro-dia", "opro-ib", "vsds-opro"}));
  r->add_option("--rounds", run.rounds, "K");
  r->add_option("--population", run.population, "M");
  r->add_option("--batch", run.batch, "B");
  r->add_option("--rmax", run.rmax, "Mean payload budget in bytes");
  r->add_option("--seed", run.seed);
  r->add_option("--tau", run.tau, "Prediction SSIM threshold");
  r->add_option("--beta", run.beta, "IB surrogate weight");
  r->add_option("--jobs", run.jobs, "Parallel candidate evaluations");
  r->add_option("--proposer", run.proposer)->check(CLI::IsMember({"scripted", "remote"}));
  r->add_option("--encoder", run.encoder, "Frame encoder")->check(CLI::IsMember({"stub", "remote"}));
  r->add_option("--encoder-dim", run.encoder_dim);
  r->add_option("--encoder-seed", run.encoder_seed);
  r->add_option("--sidecar", run.sidecar, "Sidecar base URL");
  r->add_flag("--resample-batch", run.resample_batch, "Draw a new batch every round");
  r->add_option("--config", run.config, "JSON run file; flags take precedence");
  r->add_option("--out", run.out, "Report directory");

  VsdsArgs vsds;
  auto* v = app.add_subcommand("vsds", "Heatmaps and block ranking for one video");
  v->add_option("--video", vsds.video, "Video folder or manifest.json")->required();
  v->add_option("--out", vsds.out);
  v->add_option("--grid", vsds.grid, "ROWSxCOLS");
  v->add_option("--lambda", vsds.lambda)->check(CLI::PositiveNumber);
  v->add_option("--window", vsds.window, "Heatmaps per ranking window (0 = whole clip)")->check(CLI::NonNegativeNumber);
  v->add_option("--encoder-dim", vsds.encoder_dim);
  v->add_option("--encoder-seed", vsds.encoder_seed);

  std::string reference, distorted;
  auto* m = app.add_subcommand("metrics", "SSIM and tpq between two videos");
  m->add_option("--reference", reference)->required();
  m->add_option("--distorted", distorted)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (r->parsed()) return cmd_run(run);
    if (v->parsed()) return cmd_vsds(vsds);
    return cmd_metrics(reference, distorted);
  } catch (const dia::TransportError& e) {
    std::cerr << "sidecar error: " << e.what() << "\n";
    return kExitSidecar;
  } catch (const dia::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
