#pragma once

// Video semantic differential stream: temporal derivatives in the latent and
// pixel domains, the ridge sensitivity of one to the other, per-frame
// heatmaps and the block importance ordering built from them.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "dia/embedding.hpp"
#include "dia/error.hpp"
#include "dia/media.hpp"
#include "dia/semspace.hpp"

namespace dia {

inline constexpr double kDefaultRidgeLambda = 1.0;

struct SemanticDerivative {
  int t = 0;  // 1-based index of the later frame, 2..T
  std::vector<double> delta;
};

struct PixelDerivative {
  int t = 0;
  std::vector<double> delta;
};

struct SensitivityMap {
  int t = 0;
  double a_norm = 0.0;
  double b_norm_sq = 0.0;
  double lambda = kDefaultRidgeLambda;
  std::vector<double> scores;
};

struct Heatmap {
  int t = 0;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct BlockRanking {
  std::vector<double> weights;
  std::vector<int> ordering;
};

inline std::vector<SemanticDerivative> semantic_derivatives(const EmbeddingSet& set) {
  require(set.count() >= 2, ErrorKind::parameter, "semantic derivatives need at least 2 frames");
  std::vector<SemanticDerivative> out;
  for (int t = 1; t < set.count(); ++t) {
    SemanticDerivative a{t + 1, std::vector<double>(static_cast<std::size_t>(set.dim))};
    for (int k = 0; k < set.dim; ++k) {
      a.delta[k] = static_cast<double>(set.embeddings[t][k]) - static_cast<double>(set.embeddings[t - 1][k]);
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<PixelDerivative> pixel_derivatives(const Video& video) {
  video.validate();
  require(video.frame_count() >= 2, ErrorKind::parameter, "pixel derivatives need at least 2 frames");
  std::vector<PixelDerivative> out;
  for (int t = 1; t < video.frame_count(); ++t) {
    const auto& cur = video.frames[t].pixels;
    const auto& prev = video.frames[t - 1].pixels;
    PixelDerivative b{t + 1, std::vector<double>(cur.size())};
    for (std::size_t n = 0; n < cur.size(); ++n) {
      b.delta[n] = static_cast<double>(cur[n]) - static_cast<double>(prev[n]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

/// Column norms of the ridge solution C = A B^T / (lambda + |B|^2) for one
/// observation pair, without forming the d x N matrix.
inline SensitivityMap sensitivity_closed_form(const SemanticDerivative& a, const PixelDerivative& b, double lambda) {
  require(lambda > 0.0, ErrorKind::parameter, "ridge lambda must be > 0");
  SensitivityMap m;
  m.t = b.t;
  m.lambda = lambda;
  double a2 = 0.0;
  for (double v : a.delta) a2 += v * v;
  m.a_norm = std::sqrt(a2);
  for (double v : b.delta) m.b_norm_sq += v * v;
  const double scale = m.a_norm / (lambda + m.b_norm_sq);
  m.scores.resize(b.delta.size());
  for (std::size_t n = 0; n < b.delta.size(); ++n) m.scores[n] = scale * std::abs(b.delta[n]);
  return m;
}

inline constexpr std::size_t kRidgeOracleMaxEntries = 10000;
inline constexpr std::size_t kRidgeOracleMaxPixels = 1024;

/// Dense ridge fit: solves C (B B^T + lambda I) = A B^T directly. Only for
/// verifying the closed form on small problems.
inline Eigen::MatrixXd ridge_oracle(const SemanticDerivative& a, const PixelDerivative& b, double lambda) {
  require(lambda > 0.0, ErrorKind::parameter, "ridge lambda must be > 0");
  const auto d = static_cast<Eigen::Index>(a.delta.size());
  const auto n = static_cast<Eigen::Index>(b.delta.size());
  require(a.delta.size() * b.delta.size() <= kRidgeOracleMaxEntries && b.delta.size() <= kRidgeOracleMaxPixels,
          ErrorKind::parameter, "ridge oracle is limited to desk-scale problems (d x N <= 1e4, N <= 1024)");
  const Eigen::Map<const Eigen::VectorXd> av(a.delta.data(), d);
  const Eigen::Map<const Eigen::VectorXd> bv(b.delta.data(), n);
  Eigen::MatrixXd gram = bv * bv.transpose();
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd rhs = bv * av.transpose();  // (A B^T)^T, N x d
  // gram is symmetric positive definite, so C^T = gram^{-1} (A B^T)^T.
  return gram.llt().solve(rhs).transpose();
}

/// Sums channels at each spatial location.
inline Heatmap heatmap(const SensitivityMap& map, int width, int height, int channels) {
  require(width > 0 && height > 0 && channels > 0, ErrorKind::parameter, "heatmap needs positive dimensions");
  require(map.scores.size() == static_cast<std::size_t>(width) * height * channels, ErrorKind::dimension,
          "sensitivity scores do not match width x height x channels");
  Heatmap h{map.t, width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
  for (std::size_t p = 0; p < h.values.size(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) sum += map.scores[p * channels + c];
    h.values[p] = sum;
  }
  return h;
}

/// Weights are heatmap mass per block summed over all heatmaps; the ordering
/// sorts them descending, ties by ascending block index.
inline BlockRanking block_ranking(const std::vector<Heatmap>& heatmaps, const BlockGrid& grid) {
  BlockRanking r;
  r.weights.assign(grid.blocks.size(), 0.0);
  for (const auto& h : heatmaps) {
    require(h.width == grid.width && h.height == grid.height, ErrorKind::dimension,
            "heatmap dimensions do not match the block grid");
    for (const auto& block : grid.blocks) {
      double w = 0.0;
      for (int y = block.rect.y; y < block.rect.y + block.rect.h; ++y)
        for (int x = block.rect.x; x < block.rect.x + block.rect.w; ++x) w += h.at(x, y);
      r.weights[block.index] += w;
    }
  }
  r.ordering.resize(grid.blocks.size());
  std::iota(r.ordering.begin(), r.ordering.end(), 0);
  std::stable_sort(r.ordering.begin(), r.ordering.end(),
                   [&](int i, int j) { return r.weights[i] > r.weights[j]; });
  return r;
}

/// One ranking per run of `window` consecutive heatmaps; the last window may
/// be shorter. window >= heatmaps.size() gives a single whole-clip ranking.
inline std::vector<BlockRanking> windowed_block_rankings(const std::vector<Heatmap>& heatmaps, const BlockGrid& grid,
                                                         int window) {
  require(window >= 1, ErrorKind::parameter, "VSDS window must be >= 1");
  std::vector<BlockRanking> out;
  for (std::size_t start = 0; start < heatmaps.size(); start += static_cast<std::size_t>(window)) {
    const auto end = std::min(heatmaps.size(), start + static_cast<std::size_t>(window));
    out.push_back(block_ranking({heatmaps.begin() + static_cast<long>(start), heatmaps.begin() + static_cast<long>(end)}, grid));
  }
  return out;
}

struct VsdsStream {
  std::vector<SensitivityMap> maps;
  std::vector<Heatmap> heatmaps;
};

/// Heatmaps H_2..H_T of a clip under `encoder`.
inline VsdsStream vsds_stream(const Video& video, const FrameEncoder& encoder, double lambda) {
  const auto a = semantic_derivatives(embed_video(video, encoder));
  const auto b = pixel_derivatives(video);
  VsdsStream s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.maps.push_back(sensitivity_closed_form(a[i], b[i], lambda));
    s.heatmaps.push_back(heatmap(s.maps.back(), video.width(), video.height(), video.channels()));
  }
  return s;
}

inline BlockRanking vsds_ranking(const Video& video, const FrameEncoder& encoder, const BlockGrid& grid,
                                 double lambda) {
  if (video.frame_count() < 2) {
    // A single frame has no temporal change: every block weighs zero.
    return block_ranking({}, grid);
  }
  return block_ranking(vsds_stream(video, encoder, lambda).heatmaps, grid);
}

}  // namespace dia
