#pragma once

// Shared latent space: frame encoders, diagonal-Gaussian summaries of
// embedding sets, KL divergence, semantic preservation and the DIA score.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dia/abstraction.hpp"
#include "dia/embedding.hpp"
#include "dia/error.hpp"
#include "dia/infotheory.hpp"
#include "dia/media.hpp"
#include "dia/rng.hpp"

namespace dia {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kDefaultEpsilon = 1e-6;

class FrameEncoder {
 public:
  virtual ~FrameEncoder() = default;
  virtual Embedding encode(const Frame& frame) const = 0;
  virtual int dim() const = 0;
  virtual std::string descriptor() const = 0;
};

/// Deterministic stand-in for an image embedding model: 16x16 grayscale box
/// thumbnail, centred to [-0.5, 0.5], seeded Gaussian projection plus bias,
/// L2-normalized.
class StubEncoder final : public FrameEncoder {
 public:
  static constexpr int kThumb = 16;
  static constexpr int kFeatures = kThumb * kThumb;

  StubEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    require(dim >= 2, ErrorKind::parameter, "stub encoder needs dim >= 2");
    Rng rng(mix_seed(seed, 0x5eed));
    const double scale = 1.0 / std::sqrt(static_cast<double>(kFeatures));
    projection_.resize(static_cast<std::size_t>(dim) * kFeatures);
    for (auto& w : projection_) w = standard_normal(rng) * scale;
    bias_.resize(static_cast<std::size_t>(dim));
    for (auto& b : bias_) b = 0.05 * standard_normal(rng);
  }

  /// Centred grayscale thumbnail. Cell (i, j) averages rows
  /// [i*H/16, max(i*H/16 + 1, (i+1)*H/16)) and the same for columns.
  std::vector<double> features(const Frame& frame) const {
    std::vector<double> out(kFeatures);
    for (int i = 0; i < kThumb; ++i) {
      const int y0 = i * frame.height / kThumb;
      const int y1 = std::max(y0 + 1, (i + 1) * frame.height / kThumb);
      for (int j = 0; j < kThumb; ++j) {
        const int x0 = j * frame.width / kThumb;
        const int x1 = std::max(x0 + 1, (j + 1) * frame.width / kThumb);
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x)
            for (int c = 0; c < frame.channels; ++c) sum += frame.at(x, y, c);
        const double n = static_cast<double>((y1 - y0) * (x1 - x0) * frame.channels);
        out[static_cast<std::size_t>(i * kThumb + j)] = sum / (n * 255.0) - 0.5;
      }
    }
    return out;
  }

  Embedding encode(const Frame& frame) const override {
    const auto f = features(frame);
    std::vector<double> y(bias_);
    for (int r = 0; r < dim_; ++r) {
      const double* row = projection_.data() + static_cast<std::size_t>(r) * kFeatures;
      double acc = 0.0;
      for (int k = 0; k < kFeatures; ++k) acc += row[k] * f[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(r)] += acc;
    }
    double norm = 0.0;
    for (double v : y) norm += v * v;
    norm = std::sqrt(norm);
    Embedding e(static_cast<std::size_t>(dim_), 0.0f);
    if (norm == 0.0) {
      e[0] = 1.0f;
      return e;
    }
    for (int r = 0; r < dim_; ++r) e[static_cast<std::size_t>(r)] = static_cast<float>(y[static_cast<std::size_t>(r)] / norm);
    return e;
  }

  int dim() const override { return dim_; }
  std::string descriptor() const override {
    return "stub(dim=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_) + ")";
  }

  /// Row-major dim x 256.
  const std::vector<double>& projection() const { return projection_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  int dim_;
  std::uint64_t seed_;
  std::vector<double> projection_;
  std::vector<double> bias_;
};

inline std::unique_ptr<FrameEncoder> stub_encoder(int dim, std::uint64_t seed) {
  return std::make_unique<StubEncoder>(dim, seed);
}

inline EmbeddingSet embed_video(const Video& video, const FrameEncoder& encoder) {
  video.validate();
  std::vector<Embedding> out;
  out.reserve(video.frames.size());
  for (const auto& f : video.frames) {
    auto e = encoder.encode(f);
    require(static_cast<int>(e.size()) == encoder.dim(), ErrorKind::dimension,
            "encoder " + encoder.descriptor() + " returned a vector of the wrong dimension");
    out.push_back(std::move(e));
  }
  return EmbeddingSet(std::move(out));
}

/// g_S: maps an abstraction into the shared space.
class AbstractionEmbedder {
 public:
  virtual ~AbstractionEmbedder() = default;
  virtual EmbeddingSet embed(const Abstraction& abstraction) const = 0;
};

// ---------------------------------------------------------------------------

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> variance;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Per-dimension mean and population (1/n) variance, each variance lifted to
/// at least `variance_floor`.
inline DiagGaussian fit_gaussian(const EmbeddingSet& set, double variance_floor = kVarianceFloor) {
  require(set.count() >= 1, ErrorKind::parameter, "cannot fit a Gaussian to an empty set");
  const auto d = static_cast<std::size_t>(set.dim);
  const double n = static_cast<double>(set.count());
  DiagGaussian g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& e : set.embeddings)
    for (std::size_t k = 0; k < d; ++k) g.mean[k] += e[k];
  for (auto& m : g.mean) m /= n;
  for (const auto& e : set.embeddings)
    for (std::size_t k = 0; k < d; ++k) {
      const double dev = e[k] - g.mean[k];
      g.variance[k] += dev * dev;
    }
  for (auto& v : g.variance) v = std::max(v / n, variance_floor);
  return g;
}

/// D_KL(p || q) in nats for diagonal Gaussians.
inline double kl_divergence(const DiagGaussian& p, const DiagGaussian& q) {
  require(p.dim() == q.dim(), ErrorKind::dimension, "KL divergence needs equal dimensions");
  double kl = 0.0;
  for (int k = 0; k < p.dim(); ++k) {
    const double vp = p.variance[k], vq = q.variance[k];
    const double dm = p.mean[k] - q.mean[k];
    kl += 0.5 * (std::log(vq / vp) + (vp + dm * dm) / vq - 1.0);
  }
  return std::max(kl, 0.0);
}

/// Theta = 1 / (D_KL + epsilon).
inline double semantic_preservation(double kl_nats, double epsilon) {
  require(kl_nats >= 0.0, ErrorKind::parameter, "KL divergence cannot be negative");
  require(epsilon > 0.0, ErrorKind::parameter, "epsilon must be positive");
  return 1.0 / (kl_nats + epsilon);
}

struct DiaScore {
  CompressionRate compression;
  EntropyEstimate hx;
  EntropyEstimate hy;
  double kl_nats = 0.0;
  double theta = 0.0;
  double gamma = 0.0;
  double epsilon = kDefaultEpsilon;

  double entropy_ratio() const { return hy.total_bits / hx.total_bits; }
};

inline DiaScore compose_dia(const EntropyEstimate& hx, const EntropyEstimate& hy, double kl_nats, double epsilon) {
  DiaScore s;
  s.hx = hx;
  s.hy = hy;
  s.compression = compression_rate(hx, hy);
  s.kl_nats = kl_nats;
  s.epsilon = epsilon;
  s.theta = semantic_preservation(kl_nats, epsilon);
  s.gamma = s.compression.value * s.theta;
  return s;
}

/// DIA from already-computed pieces: source bytes/embeddings and abstraction
/// payload/embeddings.
inline DiaScore dia_from_parts(const std::vector<std::uint8_t>& source_bytes, const EmbeddingSet& source_embeddings,
                               const std::vector<std::uint8_t>& payload, const EmbeddingSet& abstraction_embeddings,
                               EntropyDomain domain, double epsilon, int latent_bins) {
  EntropyEstimate hx, hy;
  if (domain == EntropyDomain::bytes) {
    hx = byte_entropy(source_bytes);
    hy = payload.empty() ? EntropyEstimate{0.0, 0, 0.0, EntropyDomain::bytes} : byte_entropy(payload);
  } else {
    hx = latent_entropy(source_embeddings, latent_bins);
    hy = latent_entropy(abstraction_embeddings, latent_bins);
  }
  const double kl = kl_divergence(fit_gaussian(source_embeddings), fit_gaussian(abstraction_embeddings));
  return compose_dia(hx, hy, kl, epsilon);
}

/// Video-level DIA of transmitting `y` for source `x`.
inline DiaScore video_dia(const Video& x, const Abstraction& y, const FrameEncoder& enc_x,
                          const AbstractionEmbedder& enc_y, EntropyDomain domain, double epsilon,
                          int latent_bins = 4) {
  x.validate();
  const auto ex = embed_video(x, enc_x);
  const auto ey = enc_y.embed(y);
  require(ex.dim == ey.dim, ErrorKind::dimension, "source and abstraction embeddings differ in dimension");
  return dia_from_parts(domain == EntropyDomain::bytes ? canonical_bytes(x) : std::vector<std::uint8_t>{}, ex,
                        y.payload, ey, domain, epsilon, latent_bins);
}

}  // namespace dia
