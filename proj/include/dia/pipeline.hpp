#pragma once

// Reference transmitter/receiver chain.
//
// Payload layout, little-endian:
//
//   "DIA1" | version u8 | width u16 | height u16 | channels u8 | T u16 |
//   interval u16 | downsample u8 | quant_bits u8 | keyframe_count u16 |
//   keyframes: packed samples, each keyframe padded to a whole byte |
//   top_k u8 | grid_rows u8 | grid_cols u8 |
//   top_k x (block_index u16 | packed samples padded to a whole byte)
//
// Samples are packed MSB-first, row-major, channel-interleaved. Keyframes are
// box-downsampled to ceil(W/ds) x ceil(H/ds); patches are full-resolution
// blocks of the final frame.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dia/abstraction.hpp"
#include "dia/config.hpp"
#include "dia/error.hpp"
#include "dia/media.hpp"
#include "dia/quality.hpp"
#include "dia/semspace.hpp"
#include "dia/vsds.hpp"

namespace dia {

inline constexpr std::uint8_t kPayloadVersion = 1;
inline constexpr std::size_t kPayloadHeaderBytes = 18;
inline constexpr std::size_t kPatchSectionHeaderBytes = 3;

// ---------------------------------------------------------------------------
// Quantization

/// Mid-rise: keeps the top `bits` bits of the sample.
inline std::uint8_t quantize(std::uint8_t v, int bits) { return static_cast<std::uint8_t>(v >> (8 - bits)); }

inline std::uint8_t dequantize(std::uint8_t q, int bits) {
  const int levels = (1 << bits) - 1;
  return static_cast<std::uint8_t>(std::lround(q * 255.0 / levels));
}

inline std::size_t packed_bytes(std::size_t samples, int bits) {
  return (samples * static_cast<std::size_t>(bits) + 7) / 8;
}

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(unsigned v) {
    require(v <= 0xFFFF, ErrorKind::parameter, "value does not fit the payload's u16 field");
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  // Packs `bits`-wide samples MSB-first and pads the run to a byte.
  void packed(const std::vector<std::uint8_t>& samples, int bits) {
    unsigned acc = 0;
    int filled = 0;
    for (auto s : samples) {
      acc = (acc << bits) | s;
      filled += bits;
      while (filled >= 8) {
        out_.push_back(static_cast<std::uint8_t>((acc >> (filled - 8)) & 0xFF));
        filled -= 8;
      }
    }
    if (filled > 0) out_.push_back(static_cast<std::uint8_t>((acc << (8 - filled)) & 0xFF));
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  unsigned u16() {
    need(2);
    const unsigned v = data_[pos_] | (static_cast<unsigned>(data_[pos_ + 1]) << 8);
    pos_ += 2;
    return v;
  }
  std::vector<std::uint8_t> packed(std::size_t count, int bits) {
    const std::size_t n = packed_bytes(count, bits);
    need(n);
    std::vector<std::uint8_t> out;
    out.reserve(count);
    const unsigned mask = (1u << bits) - 1;
    std::size_t bit = 0;
    for (std::size_t i = 0; i < count; ++i, bit += static_cast<std::size_t>(bits)) {
      const std::uint8_t byte = data_[pos_ + bit / 8];
      const int shift = 8 - bits - static_cast<int>(bit % 8);
      out.push_back(static_cast<std::uint8_t>((byte >> shift) & mask));
    }
    pos_ += n;
    return out;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    require(pos_ + n <= data_.size(), ErrorKind::format, "truncated payload");
  }
  const std::vector<std::uint8_t>& data_;
  std::size_t pos_ = 0;
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Box average over ds x ds cells (edge cells are smaller), rounded half up.
inline Frame box_downsample(const Frame& f, int ds) {
  if (ds == 1) return f;
  const int w = ceil_div(f.width, ds), h = ceil_div(f.height, ds);
  Frame out(w, h, f.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < f.channels; ++c) {
        unsigned sum = 0, n = 0;
        for (int yy = y * ds; yy < std::min(f.height, (y + 1) * ds); ++yy)
          for (int xx = x * ds; xx < std::min(f.width, (x + 1) * ds); ++xx) {
            sum += f.at(xx, yy, c);
            ++n;
          }
        out.at(x, y, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
  return out;
}

inline Frame nearest_upsample(const Frame& small, int ds, int width, int height) {
  Frame out(width, height, small.channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < small.channels; ++c) out.at(x, y, c) = small.at(x / ds, y / ds, c);
  return out;
}

inline std::vector<std::uint8_t> quantize_all(const std::vector<std::uint8_t>& samples, int bits) {
  std::vector<std::uint8_t> q(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) q[i] = quantize(samples[i], bits);
  return q;
}

inline std::vector<std::uint8_t> block_samples(const Frame& f, const Rect& r) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(r.area()) * f.channels);
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x)
      for (int c = 0; c < f.channels; ++c) out.push_back(f.at(x, y, c));
  return out;
}

}  // namespace detail

inline std::vector<int> keyframe_indices(int frame_count, int interval) {
  std::vector<int> out;
  for (int t = 0; t < frame_count; t += interval) out.push_back(t);
  return out;
}

/// Y = header | keyframes | patches. Patches come from the final frame, chosen
/// by `ranking` when VSDS is enabled and by block index otherwise.
inline Abstraction encode_abstraction(const Video& video, const Config& config,
                                      const std::optional<BlockRanking>& ranking = std::nullopt) {
  video.validate();
  validate(config);
  const int W = video.width(), H = video.height(), C = video.channels(), T = video.frame_count();
  require(W <= 0xFFFF && H <= 0xFFFF && T <= 0xFFFF, ErrorKind::parameter, "video too large for the payload format");
  const BlockGrid grid = [&] {
    try {
      return partition_blocks(W, H, config.grid_rows, config.grid_cols);
    } catch (const Error& e) {
      throw Error(ErrorKind::parameter, std::string("grid incompatible with resolution: ") + e.what());
    }
  }();
  const bool use_ranking = config.vsds_enabled && config.top_k_blocks > 0;
  if (use_ranking) {
    require(ranking.has_value(), ErrorKind::parameter, "VSDS-enabled config needs a block ranking");
    require(ranking->ordering.size() == grid.blocks.size(), ErrorKind::dimension,
            "block ranking does not match the config's grid");
  }

  Abstraction abs;
  abs.meta.config = config;
  abs.meta.source_id = video.id;
  abs.meta.keyframes = keyframe_indices(T, config.keyframe_interval);

  detail::ByteWriter out;
  out.bytes("DIA1");
  out.u8(kPayloadVersion);
  out.u16(static_cast<unsigned>(W));
  out.u16(static_cast<unsigned>(H));
  out.u8(static_cast<std::uint8_t>(C));
  out.u16(static_cast<unsigned>(T));
  out.u16(static_cast<unsigned>(config.keyframe_interval));
  out.u8(static_cast<std::uint8_t>(config.downsample));
  out.u8(static_cast<std::uint8_t>(config.quant_bits));
  out.u16(static_cast<unsigned>(abs.meta.keyframes.size()));
  for (int t : abs.meta.keyframes) {
    const Frame small = detail::box_downsample(video.frames[t], config.downsample);
    out.packed(detail::quantize_all(small.pixels, config.quant_bits), config.quant_bits);
  }

  out.u8(static_cast<std::uint8_t>(config.top_k_blocks));
  out.u8(static_cast<std::uint8_t>(config.grid_rows));
  out.u8(static_cast<std::uint8_t>(config.grid_cols));
  const Frame& last = video.frames.back();
  for (int i = 0; i < config.top_k_blocks; ++i) {
    const int index = use_ranking ? ranking->ordering[i] : i;
    const Block& block = grid.blocks[index];
    out.u16(static_cast<unsigned>(index));
    out.packed(detail::quantize_all(detail::block_samples(last, block.rect), config.quant_bits), config.quant_bits);
    abs.meta.blocks.push_back(block);
  }
  abs.payload = out.take();
  return abs;
}

/// Bytes on the wire.
inline std::size_t resource_cost(const Abstraction& abs) { return abs.payload.size(); }

/// Exact payload size implied by the layout, for a W x H x C clip of T frames.
inline std::size_t expected_payload_size(int width, int height, int channels, int frame_count, const Config& config) {
  const int dw = detail::ceil_div(width, config.downsample), dh = detail::ceil_div(height, config.downsample);
  std::size_t n = kPayloadHeaderBytes;
  n += keyframe_indices(frame_count, config.keyframe_interval).size() *
       packed_bytes(static_cast<std::size_t>(dw) * dh * channels, config.quant_bits);
  n += kPatchSectionHeaderBytes;
  const auto grid = partition_blocks(width, height, config.grid_rows, config.grid_cols);
  for (int i = 0; i < config.top_k_blocks; ++i) {
    n += 2 + packed_bytes(static_cast<std::size_t>(grid.blocks[i].rect.area()) * channels, config.quant_bits);
  }
  return n;
}

/// Receiver: keyframes dequantized and nearest-upsampled, other frames hold
/// the previous keyframe, patches overwrite the final frame.
inline Video decode_reconstruction(const Abstraction& abs) {
  const auto& p = abs.payload;
  require(p.size() >= 4 && p[0] == 'D' && p[1] == 'I' && p[2] == 'A' && p[3] == '1', ErrorKind::format,
          "bad payload magic");
  detail::ByteReader in(p);
  for (int i = 0; i < 4; ++i) in.u8();
  const auto version = in.u8();
  require(version == kPayloadVersion, ErrorKind::format,
          "unsupported payload version " + std::to_string(version));
  const int W = static_cast<int>(in.u16()), H = static_cast<int>(in.u16());
  const int C = in.u8();
  const int T = static_cast<int>(in.u16());
  const int interval = static_cast<int>(in.u16());
  const int ds = in.u8();
  const int bits = in.u8();
  const int keyframe_count = static_cast<int>(in.u16());
  require(W > 0 && H > 0 && (C == 1 || C == 3) && T > 0 && interval > 0, ErrorKind::format, "bad payload header");
  require(ds == 1 || ds == 2 || ds == 4 || ds == 8, ErrorKind::format, "bad payload downsample factor");
  require(bits == 2 || bits == 4 || bits == 8, ErrorKind::format, "bad payload quantization");
  require(keyframe_count == detail::ceil_div(T, interval), ErrorKind::format, "keyframe count disagrees with T/interval");

  const int dw = detail::ceil_div(W, ds), dh = detail::ceil_div(H, ds);
  std::vector<Frame> keyframes;
  for (int k = 0; k < keyframe_count; ++k) {
    auto q = in.packed(static_cast<std::size_t>(dw) * dh * C, bits);
    for (auto& s : q) s = dequantize(s, bits);
    keyframes.push_back(detail::nearest_upsample(Frame(dw, dh, C, std::move(q)), ds, W, H));
  }

  Video out;
  out.id = abs.meta.source_id;
  for (int t = 0; t < T; ++t) out.frames.push_back(keyframes[static_cast<std::size_t>(t / interval)]);

  const int top_k = in.u8();
  const int rows = in.u8(), cols = in.u8();
  if (top_k > 0) {
    require(rows > 0 && cols > 0 && rows <= H && cols <= W, ErrorKind::format, "bad payload block grid");
    const auto grid = partition_blocks(W, H, rows, cols);
    Frame& last = out.frames.back();
    for (int i = 0; i < top_k; ++i) {
      const int index = static_cast<int>(in.u16());
      require(index < grid.block_count(), ErrorKind::format, "payload block index out of range");
      const Rect& r = grid.blocks[index].rect;
      const auto q = in.packed(static_cast<std::size_t>(r.area()) * C, bits);
      std::size_t s = 0;
      for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x)
          for (int c = 0; c < C; ++c) last.at(x, y, c) = dequantize(q[s++], bits);
    }
  }
  require(in.at_end(), ErrorKind::format, "trailing bytes after payload");
  return out;
}

/// Reconstruct-then-embed g_S: decode the abstraction and embed the frames.
class ReconstructEmbedder final : public AbstractionEmbedder {
 public:
  explicit ReconstructEmbedder(const FrameEncoder& encoder) : encoder_(encoder) {}

  EmbeddingSet embed(const Abstraction& abstraction) const override {
    return embed_video(decode_reconstruction(abstraction), encoder_);
  }

 private:
  const FrameEncoder& encoder_;
};

// ---------------------------------------------------------------------------

inline constexpr double kDefaultTau = 0.3;
inline constexpr double kDefaultBeta = 1.0;

struct PredictionVerdict {
  bool accepted = false;
  double ssim = 0.0;
  std::string reason;
};

/// Transmitter-side self check: decode locally and accept iff SSIM >= tau.
inline PredictionVerdict predict_and_filter(const Video& video, const Abstraction& abs, double tau) {
  PredictionVerdict v;
  Video prediction;
  try {
    prediction = decode_reconstruction(abs);
  } catch (const Error& e) {
    v.reason = std::string("decode failed: ") + e.what();
    return v;
  }
  try {
    v.ssim = ssim_video(video, prediction).ssim;
  } catch (const Error& e) {
    v.reason = std::string("prediction does not match source shape: ") + e.what();
    return v;
  }
  v.accepted = v.ssim >= tau;
  if (!v.accepted) v.reason = "predicted SSIM " + std::to_string(v.ssim) + " below tau " + std::to_string(tau);
  return v;
}

/// Surrogate of the IB Lagrangian: L = D_KL + beta * H(Y)/H(X). Lower is better.
inline double ib_lagrangian(double kl_nats, double entropy_ratio, double beta) {
  require(beta > 0.0, ErrorKind::parameter, "beta must be positive");
  return kl_nats + beta * entropy_ratio;
}

struct IbScore {
  double lagrangian = 0.0;
  DiaScore terms;
};

inline IbScore ib_surrogate_score(const Video& x, const Abstraction& abs, double beta, const FrameEncoder& enc_x,
                                  const AbstractionEmbedder& enc_y, EntropyDomain domain, double epsilon,
                                  int latent_bins = 4) {
  IbScore s;
  s.terms = video_dia(x, abs, enc_x, enc_y, domain, epsilon, latent_bins);
  s.lagrangian = ib_lagrangian(s.terms.kl_nats, s.terms.entropy_ratio(), beta);
  return s;
}

}  // namespace dia
