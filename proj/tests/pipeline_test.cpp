#include <gtest/gtest.h>

#include <set>

#include "dia/pipeline.hpp"
#include "test_util.hpp"

namespace dia {
namespace {

Config cfg(int interval, int ds, int bits, int rows, int cols, int top_k) {
  Config c;
  c.keyframe_interval = interval;
  c.downsample = ds;
  c.quant_bits = bits;
  c.grid_rows = rows;
  c.grid_cols = cols;
  c.top_k_blocks = top_k;
  return c;
}

TEST(Quantization, TwoBitLawExhaustive) {
  const std::set<int> levels = {0, 85, 170, 255};
  for (int v = 0; v < 256; ++v) {
    const int q = quantize(static_cast<std::uint8_t>(v), 2);
    EXPECT_EQ(q, v / 64);
    EXPECT_TRUE(levels.count(dequantize(static_cast<std::uint8_t>(q), 2)));
  }
  for (int v = 0; v < 256; ++v) EXPECT_EQ(dequantize(quantize(static_cast<std::uint8_t>(v), 8), 8), v);
  EXPECT_EQ(dequantize(15, 4), 255);
  EXPECT_EQ(dequantize(7, 4), 119);
}

// Hand-assembled payload for a 2x2 grayscale clip, independent of the
// encoder's writer: header, two 4-bit keyframes, one whole-frame patch.
TEST(EncodeAbstraction, ByteExactLayout) {
  Video v;
  v.id = "tiny";
  v.frames = {Frame(2, 2, 1, {0x10, 0x20, 0x30, 0x40}), Frame(2, 2, 1, {0xF0, 0xE0, 0xD0, 0xC0})};
  const auto abs = encode_abstraction(v, cfg(1, 1, 4, 1, 1, 1));
  const std::vector<std::uint8_t> expected = {
      'D', 'I', 'A', '1', 1,  // magic, version
      2, 0, 2, 0, 1,          // width, height, channels
      2, 0, 1, 0,             // T, interval
      1, 4, 2, 0,             // downsample, quant_bits, keyframe_count
      0x12, 0x34,             // keyframe 0
      0xFE, 0xDC,             // keyframe 1
      1, 1, 1,                // top_k, grid rows, grid cols
      0, 0, 0xFE, 0xDC,       // patch: block 0, final frame samples
  };
  EXPECT_EQ(abs.payload, expected);
  EXPECT_EQ(resource_cost(abs), expected.size());
}

TEST(EncodeAbstraction, OddSampleCountPadsEachFrame) {
  Video v;
  v.frames = {Frame(3, 1, 1, {0xFF, 0x00, 0xFF}), Frame(3, 1, 1, {0x00, 0xFF, 0x00})};
  const auto abs = encode_abstraction(v, cfg(1, 1, 2, 1, 1, 0));
  // 3 samples x 2 bits = 6 bits, padded to one byte per keyframe.
  ASSERT_EQ(abs.payload.size(), 18u + 2u + 3u);
  EXPECT_EQ(abs.payload[18], 0b11001100);
  EXPECT_EQ(abs.payload[19], 0b00110000);
}

TEST(EncodeAbstraction, KeyframePayloadSize) {
  const auto v = gen_synthetic({64, 64, 3, 16, Motif::moving_square}, 1);
  const auto abs = encode_abstraction(v, cfg(16, 8, 4, 4, 4, 0));
  EXPECT_EQ(abs.payload.size(), kPayloadHeaderBytes + 96 + kPatchSectionHeaderBytes);
  EXPECT_EQ(abs.meta.keyframes, (std::vector<int>{0}));
}

TEST(EncodeAbstraction, OnePatchRecordDifference) {
  const auto v = gen_synthetic({64, 64, 3, 16, Motif::gradient_drift}, 1);
  const auto none = encode_abstraction(v, cfg(16, 8, 4, 8, 8, 0));
  const auto one = encode_abstraction(v, cfg(16, 8, 4, 8, 8, 1));
  EXPECT_EQ(resource_cost(one) - resource_cost(none), 2u + packed_bytes(8 * 8 * 3, 4));
}

TEST(EncodeAbstraction, HeadlineReduction) {
  const Config headline = cfg(16, 8, 4, 8, 8, 2);
  const std::size_t raw = 64 * 64 * 3 * 16;
  for (auto motif : {Motif::constant, Motif::moving_square, Motif::noise, Motif::gradient_drift}) {
    const auto v = gen_synthetic({64, 64, 3, 16, motif}, 3);
    const auto abs = encode_abstraction(v, headline);
    EXPECT_EQ(resource_cost(abs), 313u);
    EXPECT_EQ(resource_cost(abs), expected_payload_size(64, 64, 3, 16, headline));
    EXPECT_GE(1.0 - static_cast<double>(resource_cost(abs)) / raw, 0.9975);
  }
}

TEST(EncodeAbstraction, Deterministic) {
  const auto v = gen_synthetic({32, 32, 3, 8, Motif::noise}, 5);
  EXPECT_EQ(encode_abstraction(v, Config{}).payload, encode_abstraction(v, Config{}).payload);
}

TEST(EncodeAbstraction, Errors) {
  const auto v = gen_synthetic({8, 8, 1, 2, Motif::noise}, 1);
  try {
    encode_abstraction(v, cfg(1, 1, 8, 9, 2, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("grid incompatible"), std::string::npos);
  }
  Config vsds = cfg(1, 1, 8, 2, 2, 1);
  vsds.vsds_enabled = true;
  EXPECT_THROW(encode_abstraction(v, vsds), Error);
  EXPECT_THROW(encode_abstraction(v, vsds, BlockRanking{{0, 0, 0}, {0, 1, 2}}), Error);
}

TEST(EncodeAbstraction, RankingSelectsPatches) {
  const auto v = gen_synthetic({16, 16, 1, 2, Motif::noise}, 1);
  Config c = cfg(2, 2, 8, 2, 2, 2);
  c.vsds_enabled = true;
  const auto abs = encode_abstraction(v, c, BlockRanking{{0, 3, 0, 9}, {3, 1, 0, 2}});
  ASSERT_EQ(abs.meta.blocks.size(), 2u);
  EXPECT_EQ(abs.meta.blocks[0].index, 3);
  EXPECT_EQ(abs.meta.blocks[1].index, 1);
  const auto recon = decode_reconstruction(abs);
  for (int y = 8; y < 16; ++y)
    for (int x = 8; x < 16; ++x) EXPECT_EQ(recon.frames[1].at(x, y, 0), v.frames[1].at(x, y, 0));
}

TEST(DecodeReconstruction, IdentityKeyframePath) {
  const auto v = gen_synthetic({20, 12, 3, 6, Motif::noise}, 2);
  const auto recon = decode_reconstruction(encode_abstraction(v, cfg(6, 1, 8, 4, 4, 0)));
  ASSERT_EQ(recon.frame_count(), 6);
  for (const auto& f : recon.frames) EXPECT_EQ(f, v.frames[0]);
}

TEST(DecodeReconstruction, LosslessOnConstantVideo) {
  const auto v = gen_synthetic({24, 24, 3, 4, Motif::constant}, 1);
  const auto recon = decode_reconstruction(encode_abstraction(v, cfg(1, 1, 8, 2, 2, 0)));
  EXPECT_EQ(recon.frames, v.frames);
  EXPECT_NEAR(ssim_video(v, recon).ssim, 1.0, 1e-9);
}

TEST(DecodeReconstruction, TwoBitValuesOnGrid) {
  const auto v = gen_synthetic({16, 16, 3, 3, Motif::noise}, 4);
  const auto recon = decode_reconstruction(encode_abstraction(v, cfg(1, 1, 2, 2, 2, 1)));
  for (const auto& f : recon.frames)
    for (auto p : f.pixels) EXPECT_TRUE(p == 0 || p == 85 || p == 170 || p == 255);
}

// Round-trip totality and shape over the full config grid on odd shapes.
TEST(DecodeReconstruction, RoundTripShapeForEveryConfig) {
  const auto v = gen_synthetic({18, 10, 3, 5, Motif::gradient_drift}, 7);
  for (int interval : {1, 2, 5, 9})
    for (int ds : {1, 2, 4, 8})
      for (int bits : {2, 4, 8})
        for (int top_k : {0, 1, 4}) {
          const Config c = cfg(interval, ds, bits, 3, 2, top_k);
          const auto abs = encode_abstraction(v, c);
          ASSERT_EQ(resource_cost(abs), expected_payload_size(18, 10, 3, 5, c));
          const auto recon = decode_reconstruction(abs);
          ASSERT_EQ(recon.frame_count(), 5);
          ASSERT_TRUE(recon.frames[0].same_shape(v.frames[0]));
        }
}

TEST(DecodeReconstruction, MalformedPayloads) {
  const auto v = gen_synthetic({8, 8, 1, 2, Motif::noise}, 1);
  const auto good = encode_abstraction(v, cfg(1, 1, 4, 2, 2, 1));
  auto expect_format = [](Abstraction a, const char* what) {
    try {
      decode_reconstruction(a);
      ADD_FAILURE() << what;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::format) << what;
    }
  };
  auto bad = good;
  bad.payload[0] = 'X';
  expect_format(bad, "magic");
  bad = good;
  bad.payload[4] = 2;
  expect_format(bad, "version");
  bad = good;
  bad.payload.pop_back();
  expect_format(bad, "truncated");
  bad = good;
  bad.payload.push_back(0);
  expect_format(bad, "trailing");
  bad = good;
  bad.payload.resize(10);
  expect_format(bad, "header cut");
}

TEST(PredictAndFilter, Examples) {
  const auto v = gen_synthetic({32, 32, 3, 4, Motif::gradient_drift}, 2);
  const auto lossless = encode_abstraction(v, cfg(1, 1, 8, 2, 2, 0));
  EXPECT_TRUE(predict_and_filter(v, lossless, 1.0).accepted);

  const auto noise = gen_synthetic({32, 32, 3, 4, Motif::noise}, 3);
  const auto heavy = encode_abstraction(noise, cfg(4, 8, 2, 2, 2, 0));
  const auto verdict = predict_and_filter(noise, heavy, 0.9);
  EXPECT_LT(verdict.ssim, 0.9);
  EXPECT_FALSE(verdict.accepted);
  EXPECT_FALSE(verdict.reason.empty());
  EXPECT_TRUE(predict_and_filter(noise, heavy, 0.0).accepted || verdict.ssim < 0.0);

  auto broken = heavy;
  broken.payload.resize(5);
  const auto rejected = predict_and_filter(noise, broken, 0.0);
  EXPECT_FALSE(rejected.accepted);
  EXPECT_NE(rejected.reason.find("decode failed"), std::string::npos);
}

TEST(IbSurrogate, Arithmetic) {
  EXPECT_DOUBLE_EQ(ib_lagrangian(0.5, 0.25, 1.0), 0.75);
  EXPECT_LT(ib_lagrangian(0.4, 0.2, 2.0), ib_lagrangian(0.5, 0.25, 2.0));
  EXPECT_THROW(ib_lagrangian(0.5, 0.25, 0.0), Error);
}

TEST(IbSurrogate, LosslessPathNearBeta) {
  const StubEncoder enc(16, 0);
  const ReconstructEmbedder recon(enc);
  const auto v = gen_synthetic({32, 32, 3, 4, Motif::noise}, 8);
  const auto abs = encode_abstraction(v, cfg(1, 1, 8, 1, 1, 0));
  const auto s = ib_surrogate_score(v, abs, 1.5, enc, recon, EntropyDomain::bytes, 1e-6);
  EXPECT_EQ(s.terms.kl_nats, 0.0);
  EXPECT_NEAR(s.lagrangian, 1.5, 0.01);
  EXPECT_DOUBLE_EQ(s.lagrangian, ib_lagrangian(s.terms.kl_nats, s.terms.entropy_ratio(), 1.5));
}

// Committed payload bytes; DIA_REGEN_GOLDEN=1 rewrites them.
TEST(GoldenPayloads, MatchCommittedBytes) {
  struct Case {
    const char* name;
    SyntheticSpec spec;
    Config config;
  };
  const std::vector<Case> cases = {
      {"headline_moving_square", {64, 64, 3, 16, Motif::moving_square}, cfg(16, 8, 4, 8, 8, 2)},
      {"gray_gradient_q2", {20, 14, 1, 5, Motif::gradient_drift}, cfg(2, 4, 2, 3, 3, 3)},
      {"rgb_noise_q8", {12, 12, 3, 3, Motif::noise}, cfg(1, 2, 8, 2, 2, 1)},
  };
  for (const auto& c : cases) {
    const auto payload = encode_abstraction(gen_synthetic(c.spec, 1), c.config).payload;
    const auto path = testing::fixture(std::string("payloads/") + c.name + ".bin");
    if (testing::regenerate_golden()) {
      std::filesystem::create_directories(path.parent_path());
      write_file_atomic(path, payload);
      continue;
    }
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    EXPECT_EQ(payload, read_file_bytes(path)) << c.name;
  }
}

}  // namespace
}  // namespace dia
