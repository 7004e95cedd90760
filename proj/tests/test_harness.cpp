#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "copolab/error.hpp"
#include "copolab/harness.hpp"

using namespace copolab;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::size_t count_fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

EpisodeResult row(int ep, int task, bool success, double score, std::size_t tokens,
                  std::vector<int> levels, std::string category = "pick") {
  EpisodeResult e;
  e.episode = ep;
  e.task_id = task;
  e.env_seed = 100 + static_cast<std::uint64_t>(ep);
  e.success = success;
  e.score = score;
  e.tokens = tokens;
  e.steps = static_cast<int>(levels.size());
  e.levels = std::move(levels);
  e.category = std::move(category);
  return e;
}

EvalReport report_of(std::vector<EpisodeResult> rows) {
  EvalReport r;
  r.episodes = std::move(rows);
  aggregate(r);
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ProgressBins, Examples) {
  EXPECT_EQ(progress_bin(0, 10), 0);
  EXPECT_EQ(progress_bin(9, 10), 9);
  EXPECT_EQ(progress_bin(0, 1), 0);
  EXPECT_EQ(progress_bin(2, 3), 6);
  EXPECT_EQ(progress_bin(29, 30), 9);
  // Totality: every step of every length lands in exactly one bin.
  for (std::size_t T = 1; T < 120; ++T) {
    for (std::size_t t = 0; t < T; ++t) {
      const int b = progress_bin(t, T);
      EXPECT_GE(b, 0);
      EXPECT_LT(b, kProgressBins);
    }
  }
}

TEST(LevelDistribution, Examples) {
  const DistributionProfile ones = level_distribution({{ComplexityTier::kShort, {1, 1, 1}}});
  for (int b = 0; b < kProgressBins; ++b) {
    if (ones.progress_empty[static_cast<std::size_t>(b)]) continue;
    EXPECT_EQ(ones.progress[static_cast<std::size_t>(b)], (std::array<double, 4>{1, 0, 0, 0}));
  }

  const std::vector<int> ten{4, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  const DistributionProfile two =
      level_distribution({{ComplexityTier::kShort, ten}, {ComplexityTier::kLong, ten}});
  EXPECT_EQ(two.progress[0][3], 1.0);
  for (int b = 1; b < kProgressBins; ++b) EXPECT_EQ(two.progress[static_cast<std::size_t>(b)][0], 1.0);
  EXPECT_NEAR(two.tiers[0][3], 0.1, 1e-12);
  EXPECT_TRUE(two.tier_empty[1]);
  EXPECT_FALSE(two.tier_empty[2]);

  const DistributionProfile none = level_distribution({});
  for (bool e : none.progress_empty) EXPECT_TRUE(e);
  for (bool e : none.tier_empty) EXPECT_TRUE(e);
}

TEST(LevelDistribution, RowsSumToOne) {
  Rng rng(3);
  std::vector<LevelTrace> traces;
  for (int i = 0; i < 40; ++i) {
    LevelTrace t;
    t.tier = static_cast<ComplexityTier>(rng.index(3));
    const std::size_t T = 1 + rng.index(60);
    for (std::size_t s = 0; s < T; ++s) t.levels.push_back(static_cast<int>(rng.index(5)));
    traces.push_back(t);
  }
  const DistributionProfile p = level_distribution(traces);
  for (std::size_t b = 0; b < kProgressBins; ++b) {
    if (p.progress_empty[b]) continue;
    double s = 0;
    for (double x : p.progress[b]) s += x;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (p.tier_empty[k]) continue;
    double s = 0;
    for (double x : p.tiers[k]) s += x;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

// Independent re-aggregation of every report field from the rows.
TEST(EvalReportTest, AggregatesRecomputeFromRows) {
  Rng rng(9);
  std::vector<EpisodeResult> rows;
  const char* cats[] = {"pick", "clean", "heat"};
  for (int i = 0; i < 50; ++i) {
    std::vector<int> levels;
    for (std::size_t s = 0, n = 1 + rng.index(10); s < n; ++s) levels.push_back(static_cast<int>(rng.index(5)));
    rows.push_back(row(i, i % 7, rng.uniform() < 0.4, rng.uniform(), 10 + rng.index(300), levels,
                       cats[i % 3]));
  }
  EvalReport r = report_of(rows);
  double sr = 0, score = 0, tokens = 0, leveled = 0;
  std::array<double, 4> hist{};
  std::map<std::string, std::pair<int, int>> cat_success;
  for (const auto& e : rows) {
    sr += e.success;
    score += e.score;
    tokens += static_cast<double>(e.tokens);
    for (int l : e.levels) {
      if (l >= 1) {
        hist[static_cast<std::size_t>(l - 1)] += 1;
        leveled += 1;
      }
    }
    cat_success[e.category].first += 1;
    cat_success[e.category].second += e.success;
  }
  EXPECT_NEAR(r.success_rate, sr / 50, 1e-12);
  EXPECT_NEAR(r.mean_score, score / 50, 1e-12);
  EXPECT_NEAR(r.mean_tokens, tokens / 50, 1e-12);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(r.level_histogram[k], hist[k] / leveled, 1e-12);
  for (const auto& [cat, c] : cat_success) {
    EXPECT_EQ(r.by_category.at(cat).episodes, c.first);
    EXPECT_NEAR(r.by_category.at(cat).success_rate, double(c.second) / c.first, 1e-12);
  }
  // Serialization keeps the rows and re-derives the same aggregates.
  const EvalReport back = eval_report_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));

  const EvalReport none = report_of({});
  EXPECT_TRUE(none.empty);
}

TEST(Compare, DeltasReductionAndMismatch) {
  EvalReport a = report_of({row(0, 1, true, 1, 1641, {1, 2}), row(1, 2, true, 1, 1641, {1})});
  EvalReport b = report_of({row(0, 1, true, 1, 4367, {4, 4}), row(1, 2, false, 0, 4367, {4})});
  const auto same = compare_runs(a, a);
  EXPECT_EQ(same["deltas"]["success_rate"].get<double>(), 0.0);
  EXPECT_EQ(same["deltas"]["mean_tokens"].get<double>(), 0.0);
  EXPECT_EQ(same["token_reduction"].get<double>(), 0.0);

  a.episodes[0].tokens = a.episodes[1].tokens = 16414;
  b.episodes[0].tokens = b.episodes[1].tokens = 43673;
  aggregate(a);
  aggregate(b);
  const auto ab = compare_runs(a, b);
  const auto ba = compare_runs(b, a);
  EXPECT_NEAR(ab["token_reduction"].get<double>(), 0.624, 5e-4);
  EXPECT_NEAR(ab["deltas"]["success_rate"].get<double>(), 0.5, 1e-12);
  for (const char* key : {"success_rate", "mean_score", "mean_tokens"}) {
    EXPECT_EQ(ab["deltas"][key].get<double>(), -ba["deltas"][key].get<double>()) << key;
  }

  EvalReport other = b;
  other.episodes[1].task_id = 99;
  EXPECT_THROW(compare_runs(a, other), SuiteMismatch);
  other = b;
  other.env_id = EnvId::kMiniLab;
  EXPECT_THROW(compare_runs(a, other), SuiteMismatch);
  other = b;
  other.episodes.pop_back();
  EXPECT_THROW(compare_runs(a, other), SuiteMismatch);
}

TEST(PlotData, Shapes) {
  const auto dir = scratch("copolab_plot");
  std::vector<IterationMetrics> metrics(150);
  for (int i = 0; i < 150; ++i) metrics[static_cast<std::size_t>(i)].iteration = i;
  emit_training_curve(metrics, dir.string());
  auto curve = read_lines(dir / "training_curve.csv");
  ASSERT_EQ(curve.size(), 151u);
  EXPECT_EQ(curve[0], "iteration,success_rate,mean_tokens,mean_kl,loss,L1,L2,L3,L4");
  for (const auto& l : curve) EXPECT_EQ(count_fields(l), 9u);

  emit_training_curve({}, dir.string());
  EXPECT_EQ(read_lines(dir / "training_curve.csv").size(), 1u);

  const std::vector<int> ten{4, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  emit_profile(level_distribution({{ComplexityTier::kShort, ten}}), dir.string());
  const auto bins = read_lines(dir / "progress_bins.csv");
  ASSERT_EQ(bins.size(), 11u);
  EXPECT_EQ(bins[0], "bin,L1,L2,L3,L4");
  for (const auto& l : bins) EXPECT_EQ(count_fields(l), 5u);
  const auto tiers = read_lines(dir / "tier_bins.csv");
  ASSERT_EQ(tiers.size(), 4u);
  EXPECT_EQ(tiers[2], "medium,,,,");  // empty tier, blank cells

  emit_level_histogram({0.1, 0.2, 0.3, 0.4}, dir.string());
  EXPECT_EQ(read_lines(dir / "level_histogram.csv").size(), 5u);

  // Round trip of a metrics stream through the reader.
  {
    std::ofstream out(dir / "metrics.jsonl");
    for (const auto& m : metrics) out << to_json(m).dump() << '\n';
  }
  EXPECT_EQ(read_metrics((dir / "metrics.jsonl").string()).size(), 150u);
  std::filesystem::remove_all(dir);
}

TEST(Evaluate, OracleAndRandomAgents) {
  for (EnvId env : {EnvId::kGridHouse, EnvId::kMiniLab}) {
    auto oracle = make_oracle_agent();
    EvalOptions opt;
    opt.env = env;
    opt.n_episodes = 40;
    opt.seed = 1;
    const EvalReport r = evaluate(*oracle, opt);
    EXPECT_EQ(r.success_rate, 1.0) << to_string(env);
    EXPECT_EQ(r.mean_score, 1.0);
    EXPECT_EQ(r.episodes.size(), 40u);
  }
  auto random = make_random_agent();
  EvalOptions opt;
  opt.n_episodes = 100;
  opt.seed = 2024;
  const EvalReport r = evaluate(*random, opt);
  EXPECT_LT(r.success_rate, 0.05);

  opt.n_episodes = 0;
  EXPECT_TRUE(evaluate(*random, opt).empty);
}

TEST(Evaluate, DeterministicGivenSeed) {
  auto random = make_random_agent();
  EvalOptions opt;
  opt.n_episodes = 20;
  opt.seed = 77;
  EXPECT_EQ(to_json(evaluate(*random, opt)), to_json(evaluate(*random, opt)));
}

TEST(Evaluate, PolicyAgentRecordsMalformedSteps) {
  ModelConfig c;
  c.context_length = 512;
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  const PolicyModel untrained(std::make_shared<const Vocabulary>(Vocabulary::standard()), c, 1);
  EvalOptions opt;
  opt.n_episodes = 3;
  const EvalReport r = evaluate(untrained, opt, 1.0, 6, 12);
  ASSERT_EQ(r.episodes.size(), 3u);
  for (const auto& e : r.episodes) {
    EXPECT_FALSE(e.success);
    EXPECT_EQ(e.levels.size(), static_cast<std::size_t>(e.steps));
    EXPECT_GT(e.tokens, 0u);
  }
}
