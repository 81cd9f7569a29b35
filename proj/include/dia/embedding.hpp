#pragma once

#include <vector>

#include "dia/error.hpp"

namespace dia {

using Embedding = std::vector<float>;

/// Per-frame latent vectors in the shared space, in frame order.
struct EmbeddingSet {
  std::vector<Embedding> embeddings;
  int dim = 0;

  EmbeddingSet() = default;

  explicit EmbeddingSet(std::vector<Embedding> items) : embeddings(std::move(items)) {
    require(!embeddings.empty(), ErrorKind::parameter, "embedding set must hold at least one vector");
    dim = static_cast<int>(embeddings.front().size());
    for (const auto& e : embeddings) {
      require(static_cast<int>(e.size()) == dim, ErrorKind::dimension,
              "embeddings in a set must share one dimension");
    }
  }

  int count() const { return static_cast<int>(embeddings.size()); }
};

}  // namespace dia
