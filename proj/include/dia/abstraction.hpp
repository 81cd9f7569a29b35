#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dia/config.hpp"
#include "dia/media.hpp"

namespace dia {

struct AbstractionMeta {
  Config config;
  std::string source_id;
  std::vector<int> keyframes;
  std::vector<Block> blocks;  // patches carried by the payload, in payload order
  std::string caption;        // only set by text-producing transmitters
};

/// The transmitted representation Y: the payload bytes are what crosses the
/// channel, `meta` is transmitter-side bookkeeping.
struct Abstraction {
  std::vector<std::uint8_t> payload;
  AbstractionMeta meta;
};

}  // namespace dia
