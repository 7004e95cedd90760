#pragma once

// Group rollouts, trajectory advantages, cognitive-group expansion with
// confidence weighting, the clipped CoPO/GRPO objectives and the training
// loop.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "copolab/advantage.hpp"
#include "copolab/core.hpp"
#include "copolab/envs.hpp"
#include "copolab/policy.hpp"

namespace copolab {

enum class Algo { kCoPO, kGRPO, kAdaptThink };
std::string_view to_string(Algo algo);
Algo algo_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Rollouts

/// What the policy produced at one step, with everything the update needs.
struct StepSample {
  PromptContext ctx;
  std::vector<int> response;          // sampled token ids
  std::vector<double> old_logprobs;   // under the rollout snapshot
  bool budget_exhausted = false;
};

struct RolloutTrajectory {
  Trajectory traj;
  std::vector<StepSample> samples;  // parallel to traj.steps
};

struct RolloutGroup {
  int task_id = 0;
  std::uint64_t env_seed = 0;
  std::vector<RolloutTrajectory> members;
};

struct RolloutBatch {
  std::vector<RolloutGroup> groups;
  std::uint64_t snapshot_id = 0;
};

struct RolloutOptions {
  EnvId env = EnvId::kGridHouse;
  int group_size = 8;
  int groups = 16;
  double temperature = 1.0;
  int max_response_tokens = 1024;
  int history_length = 6;
  int task_pool = 0;  // tasks 0..task_pool-1; 0 means every task
};

/// Plays one episode with the policy. `rng` drives token sampling.
RolloutTrajectory play_episode(const PolicyModel& policy, const EnvSpec& spec,
                               double temperature, int max_response_tokens,
                               int history_length, Rng& rng);

/// Rolls `groups` groups of `group_size` episodes. Members of a group share
/// the task and the environment seed. Deterministic in `seed`.
RolloutBatch rollout(const PolicyModel& policy, const RolloutOptions& options,
                     std::uint64_t seed);

/// Terminal reward with the strict format gate. Sets traj.reward.
RewardBreakdown score_trajectory(Trajectory& traj, bool success);

/// (1/|tau|) * sum_t 1(empty think at t) * delta + R(tau).
double adaptthink_reward(const Trajectory& traj, double delta);

// ---------------------------------------------------------------------------
// Advantages and cognitive groups

/// One regenerated version of a step under a forced level.
struct Variant {
  CognitiveLevel level = CognitiveLevel::L1;
  std::vector<int> response;         // full structured step
  std::vector<double> old_logprobs;  // under the rollout snapshot
  TokenSpan action_span;             // into `response`
  bool think_failed = false;         // think block did not close; left empty
  double confidence = 0.0;
};

/// The four variants of one step of a successful trajectory.
struct CognitiveGroup {
  int group = 0;
  int member = 0;
  int step = 0;
  double trajectory_advantage = 0.0;
  std::array<Variant, kNumLevels> variants;
  LevelWeighting<double> weighting;
};

struct AdvantageTable {
  /// A^(i) per group and member.
  std::vector<std::vector<double>> trajectory;
  /// Groups whose rewards were all equal and therefore carry no signal.
  std::vector<bool> skipped;
  /// Membership in I+ (R > 0) per group and member.
  std::vector<std::vector<bool>> positive;
  std::vector<CognitiveGroup> cognitive_groups;
};

/// Trajectory advantages from the given per-member rewards.
AdvantageTable compute_advantages(const std::vector<std::vector<double>>& rewards,
                                  double guard);

/// Rewards used for the advantage: R, or the AdaptThink bonus reward.
std::vector<std::vector<double>> batch_rewards(const RolloutBatch& batch,
                                               Algo algo, double delta);

struct ExpansionOptions {
  double temperature = 1.0;
  int think_budget = 1024;
  double softmax_temperature = 2.0;
  double guard = 1e-8;
  ConfidenceMetric metric = ConfidenceMetric::kMeanLogProb;
};

/// Regenerates the thinking of every step of every I+ trajectory under all
/// four levels with the snapshot policy, keeps the original action, scores
/// its confidence and derives the level weights. Skipped groups and I-
/// trajectories are never expanded.
void expand_cognitive_groups(const RolloutBatch& batch, AdvantageTable& table,
                             const PolicyModel& snapshot,
                             const ExpansionOptions& options, std::uint64_t seed);

/// Recomputes confidences and weights of one cognitive group with `model`.
void rescore_cognitive_group(const RolloutBatch& batch, CognitiveGroup& cg,
                             const PolicyModel& model,
                             const ExpansionOptions& options);

// ---------------------------------------------------------------------------
// Objectives

/// One response scored by the clipped objective: every token carries its
/// old log-probability and advantage; `weight` is the sequence's share of
/// the normalization (for example 1 / (|minibatch| * |y^(i)|)).
struct TrainingSequence {
  const std::vector<int>* prompt = nullptr;
  std::vector<int> response;
  std::vector<double> old_logprobs;
  std::vector<double> advantages;
  double weight = 0.0;
  int pack = -1;  // sequences with the same pack id share `prompt`
};

struct ObjectiveConfig {
  double clip_epsilon = 0.2;
  double kl_beta = 0.1;
  bool kl_all_tokens = true;  // otherwise KL only on tokens with nonzero advantage
};

struct ObjectiveResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
  double kl_sum = 0.0;  // summed token KL
  std::size_t tokens = 0;
  std::size_t clipped = 0;
};

/// loss = - sum_seq weight * sum_n [min(r_n A_n, clip(r_n) A_n) - beta KL_n],
/// r_n = exp(logpi_n - old_n). `ref` may be null when beta is 0.
ObjectiveResult clipped_objective(const PolicyModel& model,
                                  const PolicyModel* ref,
                                  const std::vector<TrainingSequence>& seqs,
                                  const ObjectiveConfig& config,
                                  bool with_grad = true);

/// GRPO: trajectory advantage on every token of every step, normalized by
/// the trajectory's response tokens |y^(i)|. Members are (group, member)
/// pairs; skipped groups contribute nothing.
std::vector<TrainingSequence> grpo_sequences(
    const RolloutBatch& batch, const AdvantageTable& table,
    const std::vector<std::pair<int, int>>& members);

/// CoPO: I+ trajectories contribute their four variants per step with the
/// per-level advantages, normalized by the total variant tokens |e^(i)|; I-
/// trajectories contribute their original steps as in GRPO.
std::vector<TrainingSequence> copo_sequences(
    const RolloutBatch& batch, const AdvantageTable& table,
    const std::vector<std::pair<int, int>>& members);

// ---------------------------------------------------------------------------
// Training loop

struct IterationMetrics {
  int iteration = 0;
  double success_rate = 0.0;
  double format_rate = 0.0;
  double mean_tokens = 0.0;  // response tokens per trajectory
  double mean_steps = 0.0;
  std::array<double, kNumLevels> level_histogram{};  // shares of parsed steps
  double mean_kl = 0.0;
  double loss = 0.0;
  int skipped_groups = 0;
  int cognitive_groups = 0;
  int updates = 0;
};

nlohmann::json to_json(const IterationMetrics& m);
IterationMetrics iteration_metrics_from_json(const nlohmann::json& j);

struct TrainRequest {
  TrainConfig config;
  Algo algo = Algo::kCoPO;
  EnvId env = EnvId::kGridHouse;
  std::string out_dir;  // empty: nothing written
};

struct TrainResult {
  std::vector<IterationMetrics> metrics;
};

/// Runs the full loop from `policy` (updated in place). Writes
/// metrics.jsonl, groups.jsonl (CoPO), summary.json and final.ckpt into
/// out_dir. `reference` is the frozen KL anchor.
TrainResult train(PolicyModel& policy, const PolicyModel& reference,
                  const TrainRequest& request);

}  // namespace copolab
