#pragma once

// report.json (schema_version 1) and rounds.csv for a finished run.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dia/media.hpp"
#include "dia/opro.hpp"

namespace dia {

inline constexpr int kReportSchemaVersion = 1;

inline const char* kRoundsCsvHeader =
    "round,best_j,mean_j,mean_ssim,mean_quality,ci95_j,ci95_ssim,ci95_quality";

namespace detail {

// Non-finite values become null.
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json number_or_null(const std::optional<double>& v) {
  return v ? number_or_null(*v) : nlohmann::json();
}

inline nlohmann::json ci_json(const std::optional<CiSummary>& s) {
  if (!s) return nullptr;
  return {{"mean", number_or_null(s->mean)}, {"ci95_half_width", number_or_null(s->ci95_half_width)}, {"n", s->n}};
}

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : ""; }

}  // namespace detail

inline nlohmann::json to_json(const RunParams& p) {
  return {{"rounds", p.rounds},
          {"population", p.population},
          {"batch", p.batch},
          {"r_max", p.r_max},
          {"seed", p.seed},
          {"pred", p.pred},
          {"tau", p.tau},
          {"beta", p.beta},
          {"objective", std::string(to_string(p.objective))},
          {"proposer", std::string(to_string(p.proposer))},
          {"anchor_on_best", p.anchor_on_best},
          {"force_vsds", p.force_vsds},
          {"resample_batch", p.resample_batch},
          {"prompt_top_feasible", p.prompt_top_feasible},
          {"prompt_top_infeasible", p.prompt_top_infeasible},
          {"encoder_dim", p.encoder_dim},
          {"encoder_seed", p.encoder_seed},
          {"sidecar_url", p.sidecar_url}};
}

inline nlohmann::json to_json(const VideoEvaluation& v) {
  using detail::number_or_null;
  return {{"video_id", v.video_id},
          {"bytes", v.bytes},
          {"objective", number_or_null(v.objective)},
          {"accepted", v.accepted},
          {"reject_reason", v.reject_reason},
          {"ssim", number_or_null(v.ssim)},
          {"tpq", number_or_null(v.tpq)},
          {"compression", number_or_null(v.dia.compression.value)},
          {"h_x_bits", number_or_null(v.dia.hx.total_bits)},
          {"h_y_bits", number_or_null(v.dia.hy.total_bits)},
          {"kl_nats", number_or_null(v.dia.kl_nats)},
          {"theta", number_or_null(v.dia.theta)},
          {"gamma", number_or_null(v.dia.gamma)},
          {"ib_lagrangian", number_or_null(v.ib_lagrangian)}};
}

inline nlohmann::json to_json(const HistoryEntry& h) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : h.evaluation.per_video) videos.push_back(to_json(v));
  return {{"round", h.round},
          {"index", h.index},
          {"config", to_json(h.config)},
          {"j", detail::number_or_null(h.j)},
          {"r_mean", h.r_mean},
          {"feasible", h.feasible},
          {"violation", h.violation},
          {"per_video", videos}};
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& s : r.rounds) {
    rounds.push_back({{"round", s.round},
                      {"best_j", detail::number_or_null(s.best_j)},
                      {"mean_j", detail::number_or_null(s.mean_j)},
                      {"feasible_candidates", s.feasible_count},
                      {"reference_entry", s.reference ? nlohmann::json(*s.reference) : nlohmann::json()},
                      {"j", detail::ci_json(s.j)},
                      {"ssim", detail::ci_json(s.ssim)},
                      {"quality_tpq", detail::ci_json(s.quality)},
                      {"gamma", detail::ci_json(s.gamma)}});
  }
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.history) history.push_back(to_json(h));
  auto entry_ref = [&](const std::optional<std::size_t>& i) -> nlohmann::json {
    if (!i) return nullptr;
    const auto& h = r.history[*i];
    return {{"history_index", *i}, {"round", h.round}, {"index", h.index}, {"config", to_json(h.config)},
            {"j", detail::number_or_null(h.j)}, {"r_mean", h.r_mean}, {"violation", h.violation}};
  };
  return {{"schema_version", kReportSchemaVersion},
          {"strategy", r.strategy},
          {"encoder", r.encoder},
          {"units", {{"entropy", "bits"}, {"kl", "nats"}, {"payload", "bytes"}}},
          {"quality_proxy", "tpq: temporal-pooled SSIM proxy (not VMAF)"},
          {"ib_baseline", "ib_surrogate: L = D_KL + beta * H(Y)/H(X), a declared stand-in for an IB system"},
          {"params", to_json(r.params)},
          {"base_config", to_json(r.base_config)},
          {"infeasible", r.infeasible()},
          {"best", entry_ref(r.best)},
          {"least_violating", entry_ref(r.least_violating)},
          {"rounds", rounds},
          {"history", history},
          {"log", r.log}};
}

inline std::string rounds_csv(const RunReport& r) {
  using detail::csv_number;
  std::string out = std::string(kRoundsCsvHeader) + "\n";
  for (const auto& s : r.rounds) {
    auto mean = [](const std::optional<CiSummary>& c) { return c ? std::optional<double>(c->mean) : std::nullopt; };
    auto half = [](const std::optional<CiSummary>& c) { return c ? c->ci95_half_width : std::nullopt; };
    out += std::to_string(s.round) + "," + csv_number(s.best_j) + "," + csv_number(s.mean_j) + "," +
           csv_number(mean(s.ssim)) + "," + csv_number(mean(s.quality)) + "," + csv_number(half(s.j)) + "," +
           csv_number(half(s.ssim)) + "," + csv_number(half(s.quality)) + "\n";
  }
  return out;
}

inline void write_report(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json(r).dump(2) + "\n");
  write_file_atomic(dir / "rounds.csv", rounds_csv(r));
}

}  // namespace dia
