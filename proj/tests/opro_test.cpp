#include <gtest/gtest.h>

#include <limits>

#include "dia/opro.hpp"
#include "dia/report.hpp"
#include "mock_sidecar.hpp"
#include "test_util.hpp"

namespace dia {
namespace {

using Json = nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

HistoryEntry entry(double j, double r_mean, int round, int index, double r_max = 100.0) {
  Evaluation e;
  e.j = j;
  e.r_mean = r_mean;
  return make_entry(Config{}, e, round, index, r_max);
}

std::vector<Video> small_dataset(int n = 4) {
  const Motif motifs[] = {Motif::moving_square, Motif::gradient_drift, Motif::noise, Motif::constant};
  std::vector<Video> out;
  for (int i = 0; i < n; ++i) {
    auto v = gen_synthetic({32, 32, 3, 8, motifs[i % 4]}, static_cast<std::uint64_t>(i));
    v.id = "v" + std::to_string(i);
    out.push_back(v);
  }
  return out;
}

TEST(HistoryEntry, ViolationIffInfeasible) {
  const auto ok = entry(1, 100, 1, 0);
  EXPECT_TRUE(ok.feasible);
  EXPECT_EQ(ok.violation, 0.0);
  const auto over = entry(1, 130, 1, 1);
  EXPECT_FALSE(over.feasible);
  EXPECT_EQ(over.violation, 30.0);
}

TEST(UpdateBest, Examples) {
  EXPECT_EQ(update_best({entry(1.0, 150, 1, 0), entry(0.5, 50, 1, 1)}, 100), 1u);
  EXPECT_FALSE(update_best({entry(1.0, 150, 1, 0), entry(2.0, 101, 1, 1)}, 100).has_value());
  EXPECT_EQ(update_best({entry(0.7, 10, 1, 0), entry(0.2, 10, 2, 0), entry(0.7, 10, 3, 0)}, 100), 0u);
  // History order does not decide ties; (round, index) does.
  EXPECT_EQ(update_best({entry(0.7, 10, 3, 0), entry(0.7, 10, 1, 2), entry(0.7, 10, 1, 1)}, 100), 2u);
  EXPECT_FALSE(update_best({entry(-kInf, 10, 1, 0)}, 100).has_value());
}

TEST(BuildPrompt, EmptyHistory) {
  const auto p = build_prompt({}, config_schema(), 2048, 1, PromptOptions{});
  EXPECT_NE(p.find("Budget: mean payload <= 2048 bytes"), std::string::npos);
  EXPECT_NE(p.find("quant_bits (one of 2, 4, 8)"), std::string::npos);
  EXPECT_EQ(p.find("Best feasible"), std::string::npos);
  EXPECT_EQ(p.find("over budget"), std::string::npos);
  EXPECT_NE(p.find("exactly 4 configuration objects"), std::string::npos);
}

TEST(BuildPrompt, ShowsViolationBytes) {
  const auto p = build_prompt({entry(0.3, 2148, 1, 0, 2048)}, config_schema(), 2048, 2, PromptOptions{});
  EXPECT_NE(p.find("violation: 100"), std::string::npos);
}

TEST(BuildPrompt, TruncatesToTopEntries) {
  History h;
  for (int i = 0; i < 9; ++i) h.push_back(entry(0.1 * i, 50, 1, i));
  for (int i = 0; i < 6; ++i) h.push_back(entry(5.0, 150 + i, 2, i));
  const auto p = build_prompt(h, config_schema(), 100, 3, PromptOptions{});
  EXPECT_NE(p.find("5. round 1 J=0.4"), std::string::npos);
  EXPECT_EQ(p.find("6. round 1"), std::string::npos);
  EXPECT_NE(p.find("3. round 2 J=5 bytes=152 violation: 52"), std::string::npos);
  EXPECT_EQ(p.find("4. round 2"), std::string::npos);
}

TEST(BuildPrompt, GoldenFixture) {
  Rng rng(123);
  History h;
  for (int round = 1; round <= 3; ++round)
    for (int i = 0; i < 4; ++i) {
      Evaluation e;
      e.j = 10.0 * uniform01(rng) - 2.0;
      e.r_mean = 1500.0 + 1000.0 * uniform01(rng);
      Config c;
      c.keyframe_interval = 1 << uniform_int(rng, 0, 5);
      c.quant_bits = i % 2 ? 2 : 8;
      c.top_k_blocks = i;
      h.push_back(make_entry(c, e, round, i, 2048));
    }
  const auto p = build_prompt(h, config_schema(), 2048, 4, PromptOptions{Objective::dia, 4, 5, 3, true});
  const auto path = testing::fixture("prompt/golden_prompt.txt");
  if (testing::regenerate_golden()) {
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, p);
    return;
  }
  EXPECT_EQ(p, testing::read_text(path));
}

ProposalRequest request(const History& h, const Config& base, int round, int m) {
  return ProposalRequest{h, base, round, m, 2048, "", true, false, 16, 16};
}

TEST(ScriptedProposer, DeterministicAndValid) {
  const History empty;
  const Config base;
  const auto a = ScriptedProposer(5).propose(request(empty, base, 1, 6));
  EXPECT_EQ(a, ScriptedProposer(5).propose(request(empty, base, 1, 6)));
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(a[0], base);
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_NO_THROW(validate(a[i]));
    EXPECT_NE(a[i], base);
  }
  EXPECT_NE(a, ScriptedProposer(6).propose(request(empty, base, 1, 6)));
}

TEST(ScriptedProposer, MutatesTheIncumbent) {
  Config best;
  best.keyframe_interval = 32;
  best.quant_bits = 2;
  History h = {entry(0.1, 10, 1, 0), entry(0.9, 10, 1, 1)};
  h[1].config = best;
  const auto out = ScriptedProposer(1).propose(request(h, Config{}, 2, 20));
  ASSERT_EQ(out.size(), 20u);
  for (const auto& c : out) {
    int differences = (c.keyframe_interval != best.keyframe_interval) + (c.downsample != best.downsample) +
                      (c.quant_bits != best.quant_bits) + (c.grid_rows != best.grid_rows) +
                      (c.grid_cols != best.grid_cols) + (c.top_k_blocks != best.top_k_blocks) +
                      (c.vsds_enabled != best.vsds_enabled) + (c.lambda_ridge != best.lambda_ridge);
    EXPECT_EQ(differences, 1);
  }
}

TEST(ScriptedProposer, ForcedVsdsAndGridCap) {
  const History empty;
  Config base;
  base.vsds_enabled = true;
  base.top_k_blocks = 1;
  ProposalRequest r{empty, base, 1, 30, 2048, "", true, true, 2, 3};
  for (const auto& c : ScriptedProposer(3).propose(r)) {
    EXPECT_TRUE(c.vsds_enabled);
    EXPECT_LE(c.grid_rows, 2);
    EXPECT_LE(c.grid_cols, 3);
    EXPECT_LE(c.top_k_blocks, c.grid_rows * c.grid_cols);
  }
}

TEST(ClampConfig, PullsValuesIntoDomain) {
  const Config base;
  const auto c = clamp_config(Json::parse(R"({"quant_bits": 5, "downsample": 3, "keyframe_interval": 500,
      "block_grid": [0, 40], "top_k_blocks": 99, "lambda_ridge": 1e9, "epsilon": 5, "nonsense": 1})"),
                              base);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->quant_bits, 4);
  EXPECT_EQ(c->downsample, 2);
  EXPECT_EQ(c->keyframe_interval, 64);
  EXPECT_EQ(c->grid_rows, 1);
  EXPECT_EQ(c->grid_cols, 16);
  EXPECT_EQ(c->top_k_blocks, 16);
  EXPECT_EQ(c->lambda_ridge, 1e3);
  EXPECT_EQ(c->epsilon, base.epsilon);
  EXPECT_FALSE(clamp_config(Json::parse(R"({"quant_bits": "lots"})"), base).has_value());
  EXPECT_FALSE(clamp_config(Json::parse("[1, 2]"), base).has_value());
}

TEST(ConfigJson, StrictRoundTrip) {
  Config c;
  c.grid_rows = 3;
  c.vsds_enabled = true;
  c.lambda_ridge = 0.25;
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_THROW(config_from_json(Json::parse(R"({"quant_bits": 4, "colour": 1})")), Error);
  EXPECT_THROW(config_from_json(Json::parse(R"({"quant_bits": 5})")), Error);
}

TEST(RemoteProposer, ClampsAndBackFills) {
  testing::MockSidecar server([](const std::string&, const std::string&, int) -> testing::MockSidecar::Reply {
    return {200, R"({"configs": [{"quant_bits": 5}, {"downsample": 2}, "garbage"]})"};
  });
  SidecarClient client(server.url());
  RemoteProposer proposer(client, 1);
  const History empty;
  const auto out = proposer.propose(request(empty, Config{}, 1, 3));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].quant_bits, 4);
  EXPECT_EQ(out[1].downsample, 2);
  for (const auto& c : out) EXPECT_NO_THROW(validate(c));
  ASSERT_EQ(proposer.log().size(), 1u);
  EXPECT_NE(proposer.log()[0].find("back-filled 1"), std::string::npos);
  const auto sent = Json::parse(server.requests().at(0).second);
  EXPECT_EQ(sent.at("m"), 3);
}

TEST(RemoteProposer, UnreachableBeforeFirstAnswerPropagates) {
  SidecarClient client(testing::dead_url(), RetryPolicy{}, std::chrono::seconds(2));
  client.set_sleeper([](std::chrono::milliseconds) {});
  RemoteProposer proposer(client, 1);
  const History empty;
  EXPECT_THROW(proposer.propose(request(empty, Config{}, 1, 2)), TransportError);
}

TEST(RemoteProposer, FallsBackAfterItHasAnswered) {
  testing::MockSidecar server([](const std::string&, const std::string&, int call) -> testing::MockSidecar::Reply {
    if (call == 0) return {200, R"({"configs": [{}, {}]})"};
    return {503, "{}"};
  });
  SidecarClient client(server.url());
  client.set_sleeper([](std::chrono::milliseconds) {});
  RemoteProposer proposer(client, 9);
  const History empty;
  EXPECT_EQ(proposer.propose(request(empty, Config{}, 1, 2)).size(), 2u);
  const auto second = proposer.propose(request(empty, Config{}, 2, 2));
  EXPECT_EQ(second, ScriptedProposer(9).propose(request(empty, Config{}, 2, 2)));
  ASSERT_EQ(proposer.log().size(), 1u);
  EXPECT_NE(proposer.log()[0].find("scripted"), std::string::npos);
}

TEST(EvaluateCandidate, IdenticalBatchEqualsSingleVideo) {
  const auto v = small_dataset(1)[0];
  const StubEncoder enc(16, 0);
  RunParams p;
  p.batch = 3;
  const std::vector<Video> batch(3, v);
  const auto e = evaluate_candidate(Config{}, batch, p, enc);
  EXPECT_NEAR(e.j, evaluate_video(v, Config{}, p, enc).dia.gamma, 1e-12);
  p.batch = 2;
  EXPECT_THROW(evaluate_candidate(Config{}, batch, p, enc), Error);
}

TEST(EvaluateCandidate, LosslessFeasibilityFollowsRawSize) {
  const auto data = small_dataset(2);
  const StubEncoder enc(16, 0);
  Config lossless;
  lossless.keyframe_interval = 1;
  lossless.downsample = 1;
  lossless.quant_bits = 8;
  RunParams p;
  p.batch = 2;
  const double payload = static_cast<double>(expected_payload_size(32, 32, 3, 8, lossless));
  p.r_max = payload;
  EXPECT_TRUE(evaluate_candidate(lossless, data, p, enc).feasible);
  p.r_max = payload - 1;
  EXPECT_FALSE(evaluate_candidate(lossless, data, p, enc).feasible);
}

// End-to-end replay: j recomputed from the pipeline pieces outside the
// harness.
TEST(EvaluateCandidate, MatchesIndependentReplay) {
  const auto data = small_dataset(2);
  const StubEncoder enc(16, 4);
  const ReconstructEmbedder recon(enc);
  Config c;
  c.keyframe_interval = 2;
  c.top_k_blocks = 3;
  RunParams p;
  p.batch = 2;
  double sum = 0.0;
  for (const auto& v : data) sum += video_dia(v, encode_abstraction(v, c), enc, recon, EntropyDomain::bytes, 1e-6).gamma;
  EXPECT_NEAR(evaluate_candidate(c, data, p, enc).j, sum / 2.0, 1e-9);
}

TEST(EvaluateCandidate, PredRejectionScoresMinusInfinity) {
  auto noise = small_dataset(3)[2];
  const StubEncoder enc(16, 0);
  Config heavy;
  heavy.downsample = 8;
  heavy.quant_bits = 2;
  RunParams p;
  p.batch = 1;
  p.pred = true;
  p.tau = 0.9;
  const auto e = evaluate_candidate(heavy, std::vector<Video>{noise}, p, enc);
  EXPECT_EQ(e.j, -kInf);
  EXPECT_FALSE(e.per_video[0].accepted);
}

RunReport run_scripted(RunParams p, const Config& base, const std::vector<Video>& data, const char* label = "test") {
  ScriptedProposer proposer(p.seed);
  const StubEncoder enc(p.encoder_dim, p.encoder_seed);
  return run(p, base, data, proposer, enc, label);
}

TEST(Run, MechanicsAcrossSeeds) {
  const auto data = small_dataset();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RunParams p;
    p.rounds = 3;
    p.population = 3;
    p.batch = 2;
    p.r_max = 600;
    p.seed = seed;
    const auto r = run_scripted(p, Config{}, data);
    ASSERT_EQ(r.history.size(), 9u);
    ASSERT_EQ(r.rounds.size(), 3u);
    for (std::size_t k = 1; k < r.rounds.size(); ++k) EXPECT_GE(r.rounds[k].best_j, r.rounds[k - 1].best_j);
    ASSERT_TRUE(r.best.has_value());
    const auto& best = r.history[*r.best];
    EXPECT_LE(best.r_mean, p.r_max);
    for (const auto& h : r.history) {
      if (h.r_mean <= p.r_max) {
        EXPECT_LE(h.j, best.j);
      }
    }
  }
}

// Exhaustive oracle: re-evaluate every candidate from scratch and take the
// feasible argmax independently of update_best.
TEST(Run, BestIsExhaustiveArgmax) {
  const auto data = small_dataset();
  RunParams p;
  p.rounds = 2;
  p.population = 2;
  p.batch = 2;
  p.r_max = 700;
  p.seed = 3;
  const auto r = run_scripted(p, Config{}, data);
  const StubEncoder enc(p.encoder_dim, p.encoder_seed);
  const std::vector<Video> batch(data.begin(), data.begin() + 2);
  double best = -kInf;
  std::optional<Config> arg;
  for (const auto& h : r.history) {
    const auto e = evaluate_candidate(h.config, batch, p, enc);
    EXPECT_NEAR(e.j, h.j, 1e-9);
    if (e.r_mean <= p.r_max && e.j > best) {
      best = e.j;
      arg = h.config;
    }
  }
  ASSERT_TRUE(r.best.has_value());
  EXPECT_EQ(r.history[*r.best].config, *arg);
}

TEST(Run, IbObjectiveReturnsArgmin) {
  const auto data = small_dataset();
  RunParams p;
  p.rounds = 2;
  p.population = 3;
  p.batch = 2;
  p.r_max = 700;
  p.objective = Objective::ib_surrogate;
  const auto r = run_scripted(p, Config{}, data);
  ASSERT_TRUE(r.best.has_value());
  auto mean_l = [](const HistoryEntry& h) {
    double s = 0.0;
    for (const auto& v : h.evaluation.per_video) s += v.ib_lagrangian;
    return s / static_cast<double>(h.evaluation.per_video.size());
  };
  const double best_l = mean_l(r.history[*r.best]);
  for (const auto& h : r.history) {
    if (h.feasible) {
      EXPECT_GE(mean_l(h), best_l - 1e-12);
    }
  }
}

TEST(Run, DeterministicReportBytes) {
  const auto data = small_dataset();
  RunParams p;
  p.rounds = 2;
  p.population = 3;
  p.batch = 3;
  p.seed = 11;
  const auto a = to_json(run_scripted(p, Config{}, data)).dump(2);
  EXPECT_EQ(a, to_json(run_scripted(p, Config{}, data)).dump(2));
  p.jobs = 4;
  EXPECT_EQ(a, to_json(run_scripted(p, Config{}, data)).dump(2));
}

TEST(Run, InfeasibleRunKeepsLeastViolating) {
  const auto data = small_dataset();
  RunParams p;
  p.rounds = 2;
  p.population = 2;
  p.batch = 2;
  p.r_max = 10;
  const auto r = run_scripted(p, Config{}, data);
  EXPECT_TRUE(r.infeasible());
  ASSERT_TRUE(r.least_violating.has_value());
  for (const auto& h : r.history) EXPECT_GE(h.violation, r.history[*r.least_violating].violation);
  for (const auto& s : r.rounds) EXPECT_EQ(s.best_j, -kInf);
}

TEST(Run, RejectsBadParams) {
  const auto data = small_dataset(2);
  RunParams p;
  p.batch = 3;
  EXPECT_THROW(run_scripted(p, Config{}, data), Error);
  p.batch = 1;
  p.population = 0;
  EXPECT_THROW(run_scripted(p, Config{}, data), Error);
}

TEST(Strategies, Overrides) {
  RunParams p;
  Config c;
  apply_strategy(Strategy::vsds_opro, p, c);
  EXPECT_TRUE(p.force_vsds);
  EXPECT_TRUE(c.vsds_enabled);
  EXPECT_GE(c.top_k_blocks, 1);
  RunParams q;
  Config d;
  apply_strategy(Strategy::pred_only, q, d);
  EXPECT_TRUE(q.pred);
  EXPECT_FALSE(q.anchor_on_best);
  EXPECT_EQ(strategy_from_string("opro-ib"), Strategy::opro_ib);
  EXPECT_THROW(strategy_from_string("random"), Error);
}

TEST(Report, RoundsCsvShape) {
  const auto data = small_dataset();
  RunParams p;
  p.rounds = 3;
  p.population = 2;
  p.batch = 4;
  const auto csv = rounds_csv(run_scripted(p, Config{}, data));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "round,best_j,mean_j,mean_ssim,mean_quality,ci95_j,ci95_ssim,ci95_quality");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
    EXPECT_EQ(line.back() == ',', false);
  }
  EXPECT_EQ(rows, 3);
}

TEST(Report, JsonFields) {
  const auto data = small_dataset();
  RunParams p;
  p.rounds = 1;
  p.population = 2;
  p.batch = 2;
  const auto j = to_json(run_scripted(p, Config{}, data, "opro-dia"));
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("strategy"), "opro-dia");
  EXPECT_EQ(j.at("history").size(), 2u);
  EXPECT_TRUE(j.at("best").contains("config"));
  EXPECT_NE(j.at("quality_proxy").get<std::string>().find("not VMAF"), std::string::npos);
}

}  // namespace
}  // namespace dia
