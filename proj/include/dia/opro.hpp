#pragma once

// Prompt-driven configuration search: candidates are scored on a fixed batch
// of videos, the best feasible one (mean payload within budget) is tracked,
// and the history is summarized into a prompt for the next proposals.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dia/config.hpp"
#include "dia/error.hpp"
#include "dia/media.hpp"
#include "dia/pipeline.hpp"
#include "dia/quality.hpp"
#include "dia/rng.hpp"
#include "dia/semspace.hpp"
#include "dia/sidecar.hpp"
#include "dia/vsds.hpp"

namespace dia {

enum class Objective { dia, ib_surrogate, prediction_ssim };
enum class ProposerKind { scripted, remote };
enum class Strategy { pred_only, opro_dia, opro_ib, vsds_opro };

inline std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::dia: return "dia";
    case Objective::ib_surrogate: return "ib_surrogate";
    case Objective::prediction_ssim: return "prediction_ssim";
  }
  return "?";
}

inline std::string_view to_string(ProposerKind p) { return p == ProposerKind::scripted ? "scripted" : "remote"; }

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::pred_only: return "pred-only";
    case Strategy::opro_dia: return "opro-dia";
    case Strategy::opro_ib: return "opro-ib";
    case Strategy::vsds_opro: return "vsds-opro";
  }
  return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
  for (auto v : {Strategy::pred_only, Strategy::opro_dia, Strategy::opro_ib, Strategy::vsds_opro}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorKind::parameter, "unknown strategy '" + std::string(s) + "'");
}

struct RunParams {
  int rounds = 5;
  int population = 4;
  int batch = 4;
  double r_max = 2048.0;
  std::uint64_t seed = 0;
  bool pred = false;
  double tau = kDefaultTau;
  double beta = kDefaultBeta;
  Objective objective = Objective::dia;
  ProposerKind proposer = ProposerKind::scripted;
  // Proposals mutate the incumbent (true) or always the base config (false).
  bool anchor_on_best = true;
  bool force_vsds = false;
  bool resample_batch = false;
  int prompt_top_feasible = 5;
  int prompt_top_infeasible = 3;
  int encoder_dim = 32;
  std::uint64_t encoder_seed = 0;
  int jobs = 1;
  std::string sidecar_url = "http://127.0.0.1:8765";

  void validate() const {
    require(rounds >= 1 && population >= 1 && batch >= 1, ErrorKind::parameter, "rounds, population, batch must be >= 1");
    require(population <= 255, ErrorKind::parameter, "population must be <= 255");
    require(r_max > 0.0, ErrorKind::parameter, "r_max must be > 0");
    require(tau >= -1.0 && tau <= 1.0, ErrorKind::parameter, "tau must lie in [-1, 1]");
    require(beta > 0.0, ErrorKind::parameter, "beta must be > 0");
    require(jobs >= 1, ErrorKind::parameter, "jobs must be >= 1");
    require(encoder_dim >= 2, ErrorKind::parameter, "encoder_dim must be >= 2");
    require(prompt_top_feasible >= 0 && prompt_top_infeasible >= 0, ErrorKind::parameter, "prompt counts must be >= 0");
  }
};

/// The four compared strategies as parameter overrides on a base setup.
inline void apply_strategy(Strategy s, RunParams& params, Config& base) {
  switch (s) {
    case Strategy::pred_only:
      params.pred = true;
      params.objective = Objective::prediction_ssim;
      params.anchor_on_best = false;
      break;
    case Strategy::opro_dia:
      params.objective = Objective::dia;
      break;
    case Strategy::opro_ib:
      params.objective = Objective::ib_surrogate;
      break;
    case Strategy::vsds_opro:
      params.objective = Objective::dia;
      params.force_vsds = true;
      base.vsds_enabled = true;
      base.top_k_blocks = std::max(base.top_k_blocks, 1);
      break;
  }
}

// ---------------------------------------------------------------------------
// Candidate evaluation

struct VideoEvaluation {
  std::string video_id;
  DiaScore dia;
  double ib_lagrangian = 0.0;
  double objective = 0.0;  // -inf when the prediction filter rejected it
  std::size_t bytes = 0;
  double ssim = 0.0;
  double tpq = 0.0;
  bool accepted = true;
  std::string reject_reason;
};

struct Evaluation {
  double j = 0.0;
  double r_mean = 0.0;
  bool feasible = false;
  std::vector<VideoEvaluation> per_video;
};

inline VideoEvaluation evaluate_video(const Video& video, const Config& config, const RunParams& params,
                                      const FrameEncoder& encoder) {
  VideoEvaluation v;
  v.video_id = video.id;
  try {
    std::optional<BlockRanking> ranking;
    if (config.vsds_enabled && config.top_k_blocks > 0) {
      ranking = vsds_ranking(video, encoder,
                             partition_blocks(video.width(), video.height(), config.grid_rows, config.grid_cols),
                             config.lambda_ridge);
    }
    const Abstraction abs = encode_abstraction(video, config, ranking);
    v.bytes = resource_cost(abs);
    // The transmitter-side prediction and the receiver run the same decoder,
    // so one reconstruction serves both.
    const Video recon = decode_reconstruction(abs);
    const QualityScore q = ssim_video(video, recon);
    v.ssim = q.ssim;
    v.tpq = q.tpq;
    const auto ex = embed_video(video, encoder);
    const auto ey = embed_video(recon, encoder);
    v.dia = dia_from_parts(config.entropy_domain == EntropyDomain::bytes ? canonical_bytes(video)
                                                                         : std::vector<std::uint8_t>{},
                           ex, abs.payload, ey, config.entropy_domain, config.epsilon, config.latent_bins);
    v.ib_lagrangian = ib_lagrangian(v.dia.kl_nats, v.dia.entropy_ratio(), params.beta);
    switch (params.objective) {
      case Objective::dia: v.objective = v.dia.gamma; break;
      case Objective::ib_surrogate: v.objective = -v.ib_lagrangian; break;
      case Objective::prediction_ssim: v.objective = v.ssim; break;
    }
    if (params.pred && v.ssim < params.tau) {
      v.accepted = false;
      v.reject_reason = "predicted SSIM " + std::to_string(v.ssim) + " below tau " + std::to_string(params.tau);
      v.objective = -std::numeric_limits<double>::infinity();
    }
  } catch (const Error& e) {
    throw Error(e.kind(), "video '" + video.id + "': " + e.what());
  }
  return v;
}

/// Batch means of the objective and payload bytes for one configuration.
inline Evaluation evaluate_candidate(const Config& config, std::span<const Video> batch, const RunParams& params,
                                     const FrameEncoder& encoder) {
  require(static_cast<int>(batch.size()) == params.batch, ErrorKind::parameter,
          "evaluation batch must hold exactly B videos");
  Evaluation e;
  double j = 0.0, r = 0.0;
  for (const auto& video : batch) {
    e.per_video.push_back(evaluate_video(video, config, params, encoder));
    j += e.per_video.back().objective;
    r += static_cast<double>(e.per_video.back().bytes);
  }
  e.j = j / static_cast<double>(batch.size());
  e.r_mean = r / static_cast<double>(batch.size());
  e.feasible = e.r_mean <= params.r_max;
  return e;
}

// ---------------------------------------------------------------------------
// History

struct HistoryEntry {
  Config config;
  double j = 0.0;
  double r_mean = 0.0;
  bool feasible = false;
  int round = 0;  // 1-based
  int index = 0;  // position within the round's population
  double violation = 0.0;
  Evaluation evaluation;
};

using History = std::vector<HistoryEntry>;

inline HistoryEntry make_entry(const Config& config, Evaluation evaluation, int round, int index, double r_max) {
  HistoryEntry h;
  h.config = config;
  h.j = evaluation.j;
  h.r_mean = evaluation.r_mean;
  h.feasible = evaluation.r_mean <= r_max;
  h.round = round;
  h.index = index;
  h.violation = std::max(0.0, evaluation.r_mean - r_max);
  h.evaluation = std::move(evaluation);
  return h;
}

namespace detail {

inline bool earlier(const HistoryEntry& a, const HistoryEntry& b) {
  return a.round != b.round ? a.round < b.round : a.index < b.index;
}

}  // namespace detail

/// Feasible entry with the largest finite j; ties go to the earliest
/// (round, index).
inline std::optional<std::size_t> update_best(const History& history, double r_max) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    if (!(h.r_mean <= r_max) || !std::isfinite(h.j)) continue;
    if (!best || h.j > history[*best].j || (h.j == history[*best].j && detail::earlier(h, history[*best]))) best = i;
  }
  return best;
}

inline std::optional<std::size_t> least_violating(const History& history) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    if (!best || h.violation < history[*best].violation ||
        (h.violation == history[*best].violation && detail::earlier(h, history[*best]))) {
      best = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Prompt

/// Up to six significant digits, no trailing zeros.
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Bytes with at most two decimals.
inline std::string format_bytes(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

struct PromptOptions {
  Objective objective = Objective::dia;
  int m = 4;
  int top_feasible = 5;
  int top_infeasible = 3;
  bool vsds_forced = false;
};

inline std::string describe_domain(const FieldDomain& f) {
  std::string s;
  switch (f.kind) {
    case FieldKind::integer: s = "integer " + format_number(f.min) + ".." + format_number(f.max); break;
    case FieldKind::real: s = "real " + format_number(f.min) + ".." + format_number(f.max); break;
    case FieldKind::boolean: s = "true|false"; break;
    case FieldKind::choice:
      s = "one of";
      for (std::size_t i = 0; i < f.choices.size(); ++i) s += (i ? ", " : " ") + std::to_string(f.choices[i]);
      break;
    case FieldKind::category:
      s = "one of";
      for (std::size_t i = 0; i < f.categories.size(); ++i) s += (i ? ", " : " ") + f.categories[i];
      break;
  }
  return s;
}

inline std::string build_prompt(const History& history, const ConfigSchema& schema, double r_max, int round,
                                const PromptOptions& opt) {
  std::string p;
  p += "You are tuning the transmitter of a semantic video link. Propose configurations that\n";
  p += "raise the objective while keeping the mean payload within the byte budget.\n\n";
  switch (opt.objective) {
    case Objective::dia:
      p += "Objective: maximize J = mean DIA (Gamma = C * Theta) over the evaluation batch\n";
      break;
    case Objective::ib_surrogate:
      p += "Objective: maximize J = -mean L, L = D_KL + beta * H(Y)/H(X) (information-bottleneck surrogate)\n";
      break;
    case Objective::prediction_ssim:
      p += "Objective: maximize J = mean SSIM of the transmitter-side prediction\n";
      break;
  }
  p += "Budget: mean payload <= " + format_bytes(r_max) + " bytes per video\n";
  p += "Round: " + std::to_string(round) + "\n\n";

  p += "Configuration fields:\n";
  std::string fixed;
  for (const auto& f : schema) {
    const bool tunable = f.tunable && !(opt.vsds_forced && f.name == "vsds_enabled");
    if (!tunable) {
      fixed += fixed.empty() ? f.name : ", " + f.name;
      continue;
    }
    const std::string name = f.name == "grid_rows" ? "block_grid[0]" : f.name == "grid_cols" ? "block_grid[1]" : f.name;
    p += "- " + name + " (" + describe_domain(f) + "): " + f.description + "\n";
  }
  if (!fixed.empty()) p += "Fixed by the evaluator: " + fixed + "\n";

  std::vector<const HistoryEntry*> feasible, infeasible;
  for (const auto& h : history) {
    if (h.feasible && std::isfinite(h.j)) feasible.push_back(&h);
    else if (!h.feasible) infeasible.push_back(&h);
  }
  std::stable_sort(feasible.begin(), feasible.end(), [](auto* a, auto* b) { return a->j > b->j; });
  std::stable_sort(infeasible.begin(), infeasible.end(), [](auto* a, auto* b) { return a->violation < b->violation; });

  auto entry_line = [](std::size_t rank, const HistoryEntry& h) {
    std::string line = std::to_string(rank) + ". round " + std::to_string(h.round) + " J=" + format_number(h.j) +
                       " bytes=" + format_bytes(h.r_mean);
    if (!h.feasible) line += " violation: " + format_bytes(h.violation);
    return line + " config=" + to_json(h.config).dump() + "\n";
  };
  if (!feasible.empty()) {
    p += "\nBest feasible configurations so far:\n";
    for (std::size_t i = 0; i < feasible.size() && i < static_cast<std::size_t>(opt.top_feasible); ++i) {
      p += entry_line(i + 1, *feasible[i]);
    }
  }
  if (!infeasible.empty() && opt.top_infeasible > 0) {
    p += "\nConfigurations over budget (violation in bytes):\n";
    for (std::size_t i = 0; i < infeasible.size() && i < static_cast<std::size_t>(opt.top_infeasible); ++i) {
      p += entry_line(i + 1, *infeasible[i]);
    }
  }
  p += "\nReply with a JSON object {\"configs\": [...]} holding exactly " + std::to_string(opt.m) +
       " configuration objects that use the tunable fields above.\n";
  return p;
}

// ---------------------------------------------------------------------------
// Proposers

struct ProposalRequest {
  const History& history;
  const Config& base;
  int round = 1;
  int m = 1;
  double r_max = 0.0;
  std::string prompt;
  bool anchor_on_best = true;
  bool force_vsds = false;
  int max_grid_rows = kMaxGridSide;
  int max_grid_cols = kMaxGridSide;
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::vector<Config> propose(const ProposalRequest& request) = 0;
};

/// Seeded single-field mutations of the incumbent (or the base config).
class ScriptedProposer final : public Proposer {
 public:
  explicit ScriptedProposer(std::uint64_t seed) : seed_(seed) {}

  std::vector<Config> propose(const ProposalRequest& request) override {
    require(request.m >= 1, ErrorKind::parameter, "proposal size m must be >= 1");
    Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(request.round)));
    const Config parent = this->parent(request);
    std::vector<Config> out;
    if (request.history.empty()) out.push_back(finish(parent, request));
    while (static_cast<int>(out.size()) < request.m) out.push_back(finish(mutate(parent, rng, request), request));
    return out;
  }

  /// `count` extra mutations, drawn from a stream disjoint from propose().
  std::vector<Config> backfill(const ProposalRequest& request, int count) const {
    Rng rng(mix_seed(seed_ ^ 0xbac0f111ULL, static_cast<std::uint64_t>(request.round)));
    const Config parent = this->parent(request);
    std::vector<Config> out;
    for (int i = 0; i < count; ++i) out.push_back(finish(mutate(parent, rng, request), request));
    return out;
  }

  Config parent(const ProposalRequest& request) const {
    if (!request.anchor_on_best) return request.base;
    if (const auto best = update_best(request.history, request.r_max)) return request.history[*best].config;
    if (const auto least = least_violating(request.history)) return request.history[*least].config;
    return request.base;
  }

  static Config mutate(const Config& parent, Rng& rng, const ProposalRequest& request) {
    static const std::vector<std::string> fields = {"keyframe_interval", "downsample",   "quant_bits",
                                                    "grid_rows",         "grid_cols",    "top_k_blocks",
                                                    "vsds_enabled",      "lambda_ridge"};
    for (int attempt = 0; attempt < 64; ++attempt) {
      const auto& field = fields[uniform_index(rng, fields.size())];
      if (field == "vsds_enabled" && request.force_vsds) continue;
      const bool up = (rng() >> 63) != 0;
      Config c = parent;
      if (!step(c, field, up, request) && !step(c, field, !up, request)) continue;
      c.top_k_blocks = std::min(c.top_k_blocks, c.grid_rows * c.grid_cols);
      if (c != parent) return c;
    }
    return parent;
  }

 private:
  static Config finish(Config c, const ProposalRequest& request) {
    if (request.force_vsds) c.vsds_enabled = true;
    c.grid_rows = std::min(c.grid_rows, request.max_grid_rows);
    c.grid_cols = std::min(c.grid_cols, request.max_grid_cols);
    c.top_k_blocks = std::min(c.top_k_blocks, c.grid_rows * c.grid_cols);
    return c;
  }

  // Moves one field a single step in its domain; false if already at the edge.
  static bool step(Config& c, const std::string& field, bool up, const ProposalRequest& request) {
    auto neighbour = [&](int& v, const std::vector<int>& choices) {
      auto it = std::find(choices.begin(), choices.end(), v);
      if (it == choices.end()) return false;
      if (up && it + 1 != choices.end()) { v = *(it + 1); return true; }
      if (!up && it != choices.begin()) { v = *(it - 1); return true; }
      return false;
    };
    auto bump = [&](int& v, int lo, int hi) {
      const int next = v + (up ? 1 : -1);
      if (next < lo || next > hi) return false;
      v = next;
      return true;
    };
    if (field == "keyframe_interval") {
      const int next = up ? std::min(64, std::max(c.keyframe_interval + 1, 2 * c.keyframe_interval))
                          : std::max(1, c.keyframe_interval / 2);
      if (next == c.keyframe_interval) return false;
      c.keyframe_interval = next;
      return true;
    }
    if (field == "downsample") return neighbour(c.downsample, {1, 2, 4, 8});
    if (field == "quant_bits") return neighbour(c.quant_bits, {2, 4, 8});
    if (field == "grid_rows") return bump(c.grid_rows, 1, std::min(kMaxGridSide, request.max_grid_rows));
    if (field == "grid_cols") return bump(c.grid_cols, 1, std::min(kMaxGridSide, request.max_grid_cols));
    if (field == "top_k_blocks") return bump(c.top_k_blocks, 0, std::min(kMaxTopK, c.grid_rows * c.grid_cols));
    if (field == "vsds_enabled") {
      c.vsds_enabled = !c.vsds_enabled;
      return true;
    }
    if (field == "lambda_ridge") {
      const double next = std::clamp(up ? c.lambda_ridge * 10.0 : c.lambda_ridge / 10.0, 1e-3, 1e3);
      if (next == c.lambda_ridge) return false;
      c.lambda_ridge = next;
      return true;
    }
    return false;
  }

  std::uint64_t seed_;
};

/// Asks the sidecar. Replies are clamped into the schema and topped up with
/// scripted mutations. If the sidecar never answered during this run a
/// transport failure propagates; once it has answered, later failures fall
/// back to scripted proposals and are logged.
class RemoteProposer final : public Proposer {
 public:
  using Logger = std::function<void(const std::string&)>;

  RemoteProposer(SidecarClient& client, std::uint64_t seed, Logger log = {})
      : client_(client), fallback_(seed), log_(std::move(log)) {}

  std::vector<Config> propose(const ProposalRequest& request) override {
    std::vector<nlohmann::json> raw;
    try {
      raw = client_.propose(request.prompt, request.m, schema_to_json(config_schema()));
      answered_ = true;
    } catch (const TransportError& e) {
      if (!answered_) throw;
      note("round " + std::to_string(request.round) + ": sidecar failed (" + e.what() +
           "), using scripted proposals");
      return fallback_.propose(request);
    }
    const Config parent = fallback_.parent(request);
    std::vector<Config> out;
    for (const auto& j : raw) {
      if (static_cast<int>(out.size()) == request.m) break;
      std::optional<Config> c;
      try {
        c = clamp_config(j, parent);
      } catch (const Error&) {
        c.reset();
      }
      if (!c) continue;
      if (request.force_vsds) c->vsds_enabled = true;
      c->grid_rows = std::min(c->grid_rows, request.max_grid_rows);
      c->grid_cols = std::min(c->grid_cols, request.max_grid_cols);
      c->top_k_blocks = std::min(c->top_k_blocks, c->grid_rows * c->grid_cols);
      out.push_back(*c);
    }
    const int missing = request.m - static_cast<int>(out.size());
    if (missing > 0) {
      note("round " + std::to_string(request.round) + ": back-filled " + std::to_string(missing) +
           " scripted proposal(s)");
      for (auto& c : fallback_.backfill(request, missing)) out.push_back(c);
    }
    return out;
  }

  const std::vector<std::string>& log() const { return messages_; }

 private:
  void note(const std::string& msg) {
    messages_.push_back(msg);
    if (log_) log_(msg);
  }

  SidecarClient& client_;
  ScriptedProposer fallback_;
  Logger log_;
  bool answered_ = false;
  std::vector<std::string> messages_;
};

// ---------------------------------------------------------------------------
// The loop

struct RoundSummary {
  int round = 0;
  double best_j = -std::numeric_limits<double>::infinity();
  std::optional<double> mean_j;  // population mean over finite j
  // Per-video statistics of the reference candidate: the incumbent if one
  // exists, otherwise the round's highest-j candidate.
  std::optional<std::size_t> reference;
  std::optional<CiSummary> j;
  std::optional<CiSummary> ssim;
  std::optional<CiSummary> quality;
  std::optional<CiSummary> gamma;
  int feasible_count = 0;
};

struct RunReport {
  std::string strategy;
  RunParams params;
  Config base_config;
  std::string encoder;
  std::vector<RoundSummary> rounds;
  History history;
  std::optional<std::size_t> best;
  std::optional<std::size_t> least_violating;
  std::vector<std::string> log;

  bool infeasible() const { return !best.has_value(); }
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> workers;
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t k = 0; k < w; ++k) {
    workers.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += w) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::optional<CiSummary> summarize_finite(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) return std::nullopt;
  return summarize(finite);
}

}  // namespace detail

inline std::vector<Video> select_batch(std::span<const Video> dataset, const RunParams& params, int round) {
  if (!params.resample_batch) return {dataset.begin(), dataset.begin() + params.batch};
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(params.seed ^ 0xba7c4ULL, static_cast<std::uint64_t>(round)));
  for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[uniform_index(rng, i + 1)]);
  std::vector<Video> batch;
  for (int i = 0; i < params.batch; ++i) batch.push_back(dataset[idx[static_cast<std::size_t>(i)]]);
  return batch;
}

inline RunReport run(const RunParams& params, const Config& base, std::span<const Video> dataset, Proposer& proposer,
                     const FrameEncoder& encoder, std::string strategy_label = "custom") {
  params.validate();
  validate(base);
  require(static_cast<int>(dataset.size()) >= params.batch, ErrorKind::parameter, "dataset holds fewer than B videos");
  for (const auto& v : dataset) v.validate();

  RunReport report;
  report.strategy = std::move(strategy_label);
  report.params = params;
  report.base_config = base;
  report.encoder = encoder.descriptor();

  int max_rows = kMaxGridSide, max_cols = kMaxGridSide;
  for (const auto& v : dataset) {
    max_rows = std::min(max_rows, v.height());
    max_cols = std::min(max_cols, v.width());
  }
  const PromptOptions prompt_opt{params.objective, params.population, params.prompt_top_feasible,
                                 params.prompt_top_infeasible, params.force_vsds};

  for (int round = 1; round <= params.rounds; ++round) {
    ProposalRequest request{report.history, base, round, params.population, params.r_max,
                            build_prompt(report.history, config_schema(), params.r_max, round, prompt_opt),
                            params.anchor_on_best, params.force_vsds, max_rows, max_cols};
    std::vector<Config> candidates = proposer.propose(request);
    require(static_cast<int>(candidates.size()) == params.population, ErrorKind::parameter,
            "proposer returned the wrong number of candidates");

    const auto batch = select_batch(dataset, params, round);
    std::vector<Evaluation> evals(candidates.size());
    detail::parallel_for(candidates.size(), params.jobs,
                         [&](std::size_t i) { evals[i] = evaluate_candidate(candidates[i], batch, params, encoder); });

    RoundSummary summary;
    summary.round = round;
    const std::size_t first = report.history.size();
    double sum_j = 0.0;
    int finite = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      report.history.push_back(make_entry(candidates[i], std::move(evals[i]), round, static_cast<int>(i), params.r_max));
      const auto& h = report.history.back();
      if (std::isfinite(h.j)) {
        sum_j += h.j;
        ++finite;
      }
      if (h.feasible) ++summary.feasible_count;
    }
    if (finite > 0) summary.mean_j = sum_j / finite;

    report.best = update_best(report.history, params.r_max);
    if (report.best) {
      summary.best_j = report.history[*report.best].j;
      summary.reference = report.best;
    } else {
      std::size_t top = first;
      for (std::size_t i = first; i < report.history.size(); ++i) {
        if (report.history[i].j > report.history[top].j) top = i;
      }
      summary.reference = top;
    }
    const auto& ref = report.history[*summary.reference].evaluation.per_video;
    std::vector<double> js, ssims, quals, gammas;
    for (const auto& v : ref) {
      js.push_back(v.objective);
      ssims.push_back(v.ssim);
      quals.push_back(v.tpq);
      gammas.push_back(v.dia.gamma);
    }
    summary.j = detail::summarize_finite(js);
    summary.ssim = detail::summarize_finite(ssims);
    summary.quality = detail::summarize_finite(quals);
    summary.gamma = detail::summarize_finite(gammas);
    report.rounds.push_back(summary);
  }
  report.least_violating = least_violating(report.history);
  if (auto* remote = dynamic_cast<RemoteProposer*>(&proposer)) report.log = remote->log();
  return report;
}

}  // namespace dia
