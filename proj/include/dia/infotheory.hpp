#pragma once

// Order-0 empirical entropy and the information compression rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dia/embedding.hpp"
#include "dia/error.hpp"

namespace dia {

enum class EntropyDomain { bytes, latent };

inline std::string_view to_string(EntropyDomain d) { return d == EntropyDomain::bytes ? "bytes" : "latent"; }

inline EntropyDomain entropy_domain_from_string(std::string_view s) {
  if (s == "bytes") return EntropyDomain::bytes;
  if (s == "latent") return EntropyDomain::latent;
  throw Error(ErrorKind::parameter, "unknown entropy domain '" + std::string(s) + "'");
}

struct EntropyEstimate {
  double per_symbol_bits = 0.0;
  std::size_t symbol_count = 0;
  double total_bits = 0.0;
  EntropyDomain domain = EntropyDomain::bytes;
};

struct CompressionRate {
  double value = 0.0;
};

/// -sum p log2 p over occupied cells, with 0 log 0 = 0.
template <typename Counts>
double entropy_from_counts(const Counts& counts, std::size_t total) {
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (const auto& c : counts) {
    const auto k = [&] {
      if constexpr (requires { c.second; }) return c.second;
      else return c;
    }();
    if (k == 0) continue;
    const double p = static_cast<double>(k) / n;
    h -= p * std::log2(p);
  }
  return h;
}

inline EntropyEstimate byte_entropy(std::span<const std::uint8_t> data) {
  require(!data.empty(), ErrorKind::parameter, "entropy of an empty byte sequence is undefined");
  std::array<std::size_t, 256> counts{};
  for (auto b : data) ++counts[b];
  EntropyEstimate e;
  e.per_symbol_bits = entropy_from_counts(counts, data.size());
  e.symbol_count = data.size();
  e.total_bits = e.per_symbol_bits * static_cast<double>(data.size());
  e.domain = EntropyDomain::bytes;
  return e;
}

/// Bin index of x in `bins` uniform cells over [-1, 1]. Components a hair
/// outside the range from float rounding of unit vectors are accepted.
inline int latent_bin(double x, int bins) {
  constexpr double slack = 1e-6;
  require(std::isfinite(x) && x >= -1.0 - slack && x <= 1.0 + slack, ErrorKind::range,
          "embedding component " + std::to_string(x) + " outside [-1, 1]");
  const int b = static_cast<int>(std::floor((x + 1.0) * 0.5 * bins));
  return std::clamp(b, 0, bins - 1);
}

/// Entropy of the joint histogram of per-dimension quantized embeddings.
inline EntropyEstimate latent_entropy(const EmbeddingSet& set, int bins_per_dim) {
  require(set.count() >= 1, ErrorKind::parameter, "latent entropy needs at least one embedding");
  require(bins_per_dim >= 2, ErrorKind::parameter, "latent entropy needs bins_per_dim >= 2");
  std::map<std::vector<int>, std::size_t> cells;
  std::vector<int> key(static_cast<std::size_t>(set.dim));
  for (const auto& e : set.embeddings) {
    for (int d = 0; d < set.dim; ++d) key[d] = latent_bin(e[d], bins_per_dim);
    ++cells[key];
  }
  EntropyEstimate est;
  est.per_symbol_bits = entropy_from_counts(cells, set.embeddings.size());
  est.symbol_count = set.embeddings.size();
  est.total_bits = est.per_symbol_bits * static_cast<double>(est.symbol_count);
  est.domain = EntropyDomain::latent;
  return est;
}

/// C = 1 - H(Y)/H(X) over total information content. Not clamped: an
/// abstraction carrying more information than its source yields C < 0.
inline CompressionRate compression_rate(const EntropyEstimate& hx, const EntropyEstimate& hy) {
  require(hx.domain == hy.domain, ErrorKind::parameter,
          "compression rate needs both entropies in the same domain");
  require(hx.total_bits > 0.0, ErrorKind::undefined,
          "compression rate undefined: source entropy is zero");
  return {1.0 - hy.total_bits / hx.total_bits};
}

}  // namespace dia
