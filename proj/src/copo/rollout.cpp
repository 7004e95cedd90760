#include <algorithm>

#include "copolab/copo.hpp"
#include "copolab/error.hpp"

namespace copolab {

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::kCoPO: return "copo";
    case Algo::kGRPO: return "grpo";
    case Algo::kAdaptThink: return "adaptthink";
  }
  return "?";
}

Algo algo_from_string(std::string_view name) {
  if (name == "copo") return Algo::kCoPO;
  if (name == "grpo") return Algo::kGRPO;
  if (name == "adaptthink") return Algo::kAdaptThink;
  throw ConfigError("unknown algorithm: " + std::string(name));
}

RewardBreakdown score_trajectory(Trajectory& traj, bool success) {
  traj.reward.task = success ? 1 : 0;
  validate_trajectory_format(traj);
  traj.reward = terminal_reward(traj.reward.task, traj.reward.format);
  return traj.reward;
}

double adaptthink_reward(const Trajectory& traj, double delta) {
  if (traj.steps.empty()) throw EmptyTrajectory("adaptthink reward of an empty trajectory");
  int no_think = 0;
  for (const auto& s : traj.steps) {
    if (s.parsed && s.parsed->think_text.empty()) ++no_think;
  }
  return delta * no_think / static_cast<double>(traj.steps.size()) +
         traj.reward.total;
}

RolloutTrajectory play_episode(const PolicyModel& policy, const EnvSpec& spec,
                               double temperature, int max_response_tokens,
                               int history_length, Rng& rng) {
  auto env = make_env(spec.env_id);
  const ResetResult reset = env->reset(spec);
  RolloutTrajectory out;
  Trajectory& traj = out.traj;
  traj.instruction = reset.instruction;
  traj.env_id = spec.env_id;
  traj.task_id = spec.task_id;
  traj.seed = spec.seed;
  traj.complexity_tier = spec.complexity_tier;

  std::vector<HistoryEntry> history;
  std::string obs = reset.observation;
  SampleOptions options;
  options.temperature = temperature;
  options.budget = max_response_tokens;
  while (!env->done()) {
    const auto admissible = env->admissible_actions();
    const std::vector<std::string> listed =
        env->lists_actions() ? admissible : std::vector<std::string>{};
    StepSample sample;
    sample.ctx = step_prompt(policy, traj.instruction, history, obs, listed,
                             history_length);
    SampleResult s = sample_step(policy, sample.ctx, options, rng);
    sample.response = std::move(s.ids);
    sample.old_logprobs = std::move(s.model_logprobs);
    sample.budget_exhausted = s.budget_exhausted;

    TrajectoryStep step;
    step.observation = obs;
    step.raw_text = std::move(s.tokens);
    step.admissible_count = admissible.size();
    if (ParseResult parsed = parse_structured(step.raw_text)) {
      step.action = parsed.step().action_string();
      step.parsed = std::move(parsed.step());
    }
    const StepOutcome outcome = env->step(step.action);
    history.push_back({obs, step.action});
    obs = outcome.observation;
    traj.steps.push_back(std::move(step));
    out.samples.push_back(std::move(sample));
  }
  traj.env_score = env->score();
  traj.termination_cause =
      env->success() ? TerminationCause::kSuccess : TerminationCause::kStepLimit;
  score_trajectory(traj, env->success());
  return out;
}

RolloutBatch rollout(const PolicyModel& policy, const RolloutOptions& options,
                     std::uint64_t seed) {
  if (options.group_size < 2) throw GroupTooSmall("group_size must be >= 2");
  const int pool = options.task_pool > 0
                       ? std::min(options.task_pool, num_tasks(options.env))
                       : num_tasks(options.env);
  RolloutBatch batch;
  batch.snapshot_id = seed;
  for (int g = 0; g < options.groups; ++g) {
    const std::uint64_t group_seed = mix_seed(seed, static_cast<std::uint64_t>(g));
    Rng pick(group_seed);
    RolloutGroup group;
    group.task_id = static_cast<int>(pick.index(static_cast<std::size_t>(pool)));
    group.env_seed = pick.next();
    const EnvSpec spec = make_spec(options.env, group.task_id, group.env_seed);
    for (int m = 0; m < options.group_size; ++m) {
      Rng rng(mix_seed(group_seed, static_cast<std::uint64_t>(m) + 1));
      group.members.push_back(play_episode(policy, spec, options.temperature,
                                           options.max_response_tokens,
                                           options.history_length, rng));
    }
    batch.groups.push_back(std::move(group));
  }
  return batch;
}

}  // namespace copolab
