#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "copolab/envs.hpp"
#include "copolab/error.hpp"

using namespace copolab;

namespace {

struct OracleRun {
  bool success = false;
  int steps = 0;
  double score = 0.0;
  std::vector<std::string> observations;
};

OracleRun run_oracle(EnvId id, int task, std::uint64_t seed) {
  auto env = make_env(id);
  const EnvSpec spec = make_spec(id, task, seed);
  OracleRun r;
  r.observations.push_back(env->reset(spec).observation);
  double last_score = 0.0;
  while (!env->done()) {
    const std::string a = env->oracle_action();
    const auto adm = env->admissible_actions();
    EXPECT_NE(std::find(adm.begin(), adm.end(), a), adm.end()) << a;
    const StepOutcome o = env->step(a);
    EXPECT_GE(o.score, last_score);  // monotone score
    last_score = o.score;
    r.observations.push_back(o.observation);
    ++r.steps;
  }
  r.success = env->success();
  r.score = env->score();
  return r;
}

}  // namespace

TEST(Tiers, Thresholds) {
  EXPECT_EQ(tier_of(12), ComplexityTier::kShort);
  EXPECT_EQ(tier_of(20), ComplexityTier::kShort);
  EXPECT_EQ(tier_of(21), ComplexityTier::kMedium);
  EXPECT_EQ(tier_of(50), ComplexityTier::kMedium);
  EXPECT_EQ(tier_of(51), ComplexityTier::kLong);
  EXPECT_EQ(tier_of(94), ComplexityTier::kLong);
}

TEST(Envs, ResetIsDeterministic) {
  for (EnvId id : {EnvId::kGridHouse, EnvId::kMiniLab}) {
    auto a = make_env(id);
    auto b = make_env(id);
    const auto ra = a->reset(make_spec(id, 0, 7));
    const auto rb = b->reset(make_spec(id, 0, 7));
    EXPECT_EQ(ra.instruction, rb.instruction);
    EXPECT_EQ(ra.observation, rb.observation);
    EXPECT_EQ(ra.admissible_actions, rb.admissible_actions);
  }
}

TEST(Envs, UnknownTask) {
  auto env = make_env(EnvId::kGridHouse);
  EnvSpec spec = make_spec(EnvId::kGridHouse, 0, 1);
  spec.task_id = 1000000;
  EXPECT_THROW(env->reset(spec), UnknownTask);
  EXPECT_THROW(make_spec(EnvId::kMiniLab, 1000000, 1), UnknownTask);
}

TEST(Envs, StepLimits) {
  EXPECT_EQ(default_max_steps(EnvId::kGridHouse), 30);
  EXPECT_EQ(default_max_steps(EnvId::kMiniLab), 100);
}

TEST(GridHouse, InadmissibleActionChangesNothing) {
  auto env = make_env(EnvId::kGridHouse);
  env->reset(make_spec(EnvId::kGridHouse, 3, 11));
  const auto before = env->facts();
  const auto adm_before = env->admissible_actions();
  const StepOutcome o = env->step("fly to the moon");
  EXPECT_EQ(o.observation, kNothingHappened);
  EXPECT_EQ(env->step_counter(), 1);
  EXPECT_EQ(env->admissible_actions(), adm_before);
  EXPECT_EQ(env->facts().location, before.location);
  EXPECT_EQ(env->facts().holding, before.holding);
}

TEST(GridHouse, HorizonCapEndsEpisode) {
  auto env = make_env(EnvId::kGridHouse);
  env->reset(make_spec(EnvId::kGridHouse, 0, 1));
  StepOutcome o;
  for (int i = 0; i < 30; ++i) {
    ASSERT_FALSE(env->done());
    o = env->step("look around");
  }
  EXPECT_TRUE(o.done);
  EXPECT_FALSE(env->success());
  EXPECT_EQ(o.score, 0.0);
  EXPECT_THROW(env->step("look around"), EpisodeFinished);
  EXPECT_THROW(env->oracle_action(), EpisodeFinished);
}

TEST(MiniLab, InvalidActionReturnsErrorText) {
  auto env = make_env(EnvId::kMiniLab);
  env->reset(make_spec(EnvId::kMiniLab, 0, 1));
  const StepOutcome o = env->step("dance wildly");
  EXPECT_EQ(o.observation, kNoKnownAction);
  EXPECT_EQ(env->step_counter(), 1);
}

TEST(GridHouse, OracleSolvesEveryTask) {
  const int n = num_tasks(EnvId::kGridHouse);
  EXPECT_GE(n, 6 * 30);
  std::set<std::string> families;
  for (int task = 0; task < n; ++task) {
    const OracleRun r = run_oracle(EnvId::kGridHouse, task, 1000 + task);
    ASSERT_TRUE(r.success) << "task " << task;
    EXPECT_EQ(r.score, 1.0);
    EXPECT_LE(r.steps, 30);
    auto env = make_env(EnvId::kGridHouse);
    env->reset(make_spec(EnvId::kGridHouse, task, 1));
    families.insert(env->category());
  }
  EXPECT_EQ(families.size(), 6u);
}

TEST(MiniLab, OracleSolvesEveryTaskWithinTier) {
  const int n = num_tasks(EnvId::kMiniLab);
  std::set<std::string> types;
  for (int task = 0; task < n; ++task) {
    const EnvSpec spec = make_spec(EnvId::kMiniLab, task, 5 + task);
    const OracleRun r = run_oracle(EnvId::kMiniLab, task, 5 + task);
    ASSERT_TRUE(r.success) << "task " << task;
    EXPECT_DOUBLE_EQ(r.score, 1.0);
    EXPECT_LE(r.steps, 100);
    if (spec.complexity_tier == ComplexityTier::kShort) EXPECT_LE(r.steps, 20);
    auto env = make_env(EnvId::kMiniLab);
    env->reset(spec);
    types.insert(env->category());
  }
  EXPECT_EQ(types.size(), 9u);
}

TEST(Catalogue, CoversAllTiersInMiniLab) {
  std::set<ComplexityTier> tiers;
  for (const auto& e : task_catalogue(EnvId::kMiniLab)) {
    EXPECT_EQ(e.tier, tier_of(e.oracle_len));
    tiers.insert(e.tier);
  }
  EXPECT_EQ(tiers.size(), 3u);
}

// Oracle rollouts recorded once from the implementation and frozen.
TEST(Golden, OracleEpisodesMatchFixtures) {
  std::ifstream in(std::string(COPOLAB_FIXTURES) + "/oracle_episodes.json");
  ASSERT_TRUE(in.good());
  const auto doc = nlohmann::json::parse(in);
  ASSERT_FALSE(doc.empty());
  for (const auto& c : doc) {
    const EnvId id = env_id_from_string(c.at("env").get<std::string>());
    auto env = make_env(id);
    const auto r = env->reset(make_spec(id, c.at("task_id").get<int>(),
                                        c.at("seed").get<std::uint64_t>()));
    EXPECT_EQ(r.instruction, c.at("instruction").get<std::string>());
    EXPECT_EQ(r.observation, c.at("observation").get<std::string>());
    for (const auto& s : c.at("steps")) {
      const std::string action = s.at("action").get<std::string>();
      EXPECT_EQ(env->oracle_action(), action);
      const StepOutcome o = env->step(action);
      EXPECT_EQ(o.observation, s.at("observation").get<std::string>());
      EXPECT_EQ(o.score, s.at("score").get<double>());
      EXPECT_EQ(o.done, s.at("done").get<bool>());
    }
    EXPECT_TRUE(env->done());
  }
}

TEST(Golden, MiniLabMeasurementTask) {
  auto env = make_env(EnvId::kMiniLab);
  const auto r = env->reset(make_spec(EnvId::kMiniLab, 3, 1));
  EXPECT_NE(r.instruction.find("measure"), std::string::npos);
  EXPECT_NE(r.observation.find("door to"), std::string::npos);
}

TEST(Envs, CloneIsIndependent) {
  auto env = make_env(EnvId::kGridHouse);
  env->reset(make_spec(EnvId::kGridHouse, 2, 9));
  auto copy = env->clone();
  const std::string a = env->oracle_action();
  env->step(a);
  EXPECT_EQ(copy->step_counter(), 0);
  EXPECT_EQ(copy->step(a).observation.empty(), false);
}
