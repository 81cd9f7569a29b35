#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "dia/pipeline.hpp"
#include "dia/quality.hpp"
#include "test_util.hpp"

namespace dia {
namespace {

TEST(Ssim, SelfSimilarityIsOne) {
  for (auto motif : {Motif::noise, Motif::gradient_drift, Motif::moving_square}) {
    const auto f = gen_synthetic({40, 30, 3, 1, motif}, 2).frames[0];
    EXPECT_NEAR(ssim_frame(f, f), 1.0, 1e-9);
  }
}

// Constant frames: zero variance, so SSIM = C1 / (255^2 + C1).
TEST(Ssim, ConstantImagesAnalytic) {
  EXPECT_NEAR(ssim_frame(Frame(16, 16, 1, 0), Frame(16, 16, 1, 255)), 9.999000099990002e-05, 1e-6);
}

TEST(Ssim, MatchesReferenceFixtures) {
  const auto expected = nlohmann::json::parse(testing::read_text(testing::fixture("ssim/expected.json")));
  ASSERT_EQ(expected.at("cases").size(), 5u);
  for (const auto& c : expected.at("cases")) {
    const auto a = decode_pnm(read_file_bytes(testing::fixture("ssim/" + c.at("a").get<std::string>())));
    const auto b = decode_pnm(read_file_bytes(testing::fixture("ssim/" + c.at("b").get<std::string>())));
    EXPECT_NEAR(ssim_frame(a, b), c.at("ssim").get<double>(), 1e-4) << c.at("name");
  }
}

TEST(Ssim, SmallFramesShrinkTheWindow) {
  Frame f(6, 6, 1), g(6, 6, 1);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    f.pixels[i] = static_cast<std::uint8_t>(i * 7);
    g.pixels[i] = static_cast<std::uint8_t>(i * 7 + (i % 3) * 20);
  }
  EXPECT_NEAR(ssim_frame(f, f), 1.0, 1e-9);
  EXPECT_LT(ssim_frame(f, g), 1.0);
  EXPECT_THROW(ssim_frame(f, Frame(6, 7, 1)), Error);
}

TEST(SsimVideo, IdenticalAndSingleDifferingFrame) {
  const auto v = gen_synthetic({24, 24, 3, 5, Motif::gradient_drift}, 1);
  const auto same = ssim_video(v, v);
  EXPECT_NEAR(same.ssim, 1.0, 1e-9);
  EXPECT_NEAR(same.tpq, 1.0, 1e-9);

  auto w = v;
  w.frames[2] = gen_synthetic({24, 24, 3, 1, Motif::noise}, 9).frames[0];
  const double s2 = ssim_frame(v.frames[2], w.frames[2]);
  const auto q = ssim_video(v, w);
  EXPECT_NEAR(1.0 - q.ssim, (1.0 - s2) / 5.0, 1e-9);
}

TEST(Tpq, PenalizesFluctuation) {
  const std::vector<double> steady = {0.8, 0.8, 0.8, 0.8};
  const std::vector<double> jumpy = {0.9, 0.7, 0.9, 0.7};
  EXPECT_DOUBLE_EQ(tpq_from_per_frame(steady), 0.8);
  EXPECT_NEAR(tpq_from_per_frame(jumpy), 0.8 - 0.5 * 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(tpq_from_per_frame(std::vector<double>{0.4}), 0.4);
  EXPECT_THROW(tpq_from_per_frame(std::vector<double>{}), Error);
}

TEST(Summarize, StudentTInterval) {
  const std::vector<double> xs = {1, 2, 3, 4, 5};
  const auto s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  ASSERT_TRUE(s.ci95_half_width.has_value());
  EXPECT_NEAR(*s.ci95_half_width, 1.9632431614775607, 1e-9);
  EXPECT_NEAR(student_t_975(4), 2.7764451051977987, 1e-9);

  const auto one = summarize(std::vector<double>{2.5});
  EXPECT_FALSE(one.ci95_half_width.has_value());
  EXPECT_EQ(summarize(std::vector<double>{7, 7, 7}).ci95_half_width, 0.0);
  EXPECT_THROW(summarize(std::vector<double>{}), Error);
}

}  // namespace
}  // namespace dia
