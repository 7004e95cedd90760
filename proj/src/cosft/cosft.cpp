#include "copolab/cosft.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "copolab/error.hpp"
#include "copolab/optim.hpp"
#include "copolab/random.hpp"
#include "copolab/templates.hpp"

namespace copolab {

namespace {

struct ReplayedStep {
  std::string observation;
  std::vector<std::string> admissible;  // what the prompt lists
  std::size_t admissible_count = 0;
  ThinkFacts facts;
  std::string action;
};

// Re-runs a recorded trajectory to recover the ground truth at every step.
std::vector<ReplayedStep> replay(const Trajectory& traj) {
  auto env = make_env(traj.env_id);
  EnvSpec spec;
  spec.env_id = traj.env_id;
  spec.task_id = traj.task_id;
  spec.seed = traj.seed;
  spec.max_steps = default_max_steps(traj.env_id);
  spec.complexity_tier = traj.complexity_tier;
  env->reset(spec);
  std::vector<ReplayedStep> out;
  for (const auto& step : traj.steps) {
    ReplayedStep r;
    r.observation = step.observation;
    const auto admissible = env->admissible_actions();
    r.admissible_count = admissible.size();
    if (env->lists_actions()) r.admissible = admissible;
    r.facts = env->facts();
    r.action = step.action;
    env->step(step.action);
    out.push_back(std::move(r));
  }
  return out;
}

// (level, think) for step t.
using Chooser = std::function<std::pair<CognitiveLevel, TokenSeq>(
    const std::vector<ReplayedStep>&, std::size_t, const ThinkContext&, Rng&)>;

std::vector<CosftExample> build_with(const std::vector<Trajectory>& trajs,
                                     std::uint64_t seed, const Vocabulary& vocab,
                                     const DatasetOptions& options,
                                     const Chooser& choose) {
  std::vector<CosftExample> out;
  Rng rng(mix_seed(seed, 0xc05f7ULL));
  for (const auto& traj : trajs) {
    const auto steps = replay(traj);
    std::vector<HistoryEntry> history;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const auto& s = steps[t];
      ThinkContext tc;
      tc.instruction = traj.instruction;
      tc.facts = s.facts;
      tc.last_observation = t == 0 ? std::string() : s.observation;
      tc.step_index = static_cast<int>(t);
      auto [level, think] = choose(steps, t, tc, rng);
      CosftExample ex;
      ex.ctx = render_prompt(vocab, traj.instruction, history, s.observation,
                             s.admissible, options.history_length,
                             options.context_length, kResponseReserve);
      ex.target = make_step(level, think, lex(s.action));
      ex.env_id = traj.env_id;
      ex.task_id = traj.task_id;
      ex.step_index = static_cast<int>(t);
      out.push_back(std::move(ex));
      history.push_back({s.observation, s.action});
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(CosftMode mode) {
  switch (mode) {
    case CosftMode::kBalanced: return "balanced";
    case CosftMode::kExpert: return "expert";
    case CosftMode::kAdaptThink: return "adaptthink";
  }
  return "?";
}

CosftMode cosft_mode_from_string(std::string_view name) {
  if (name == "balanced") return CosftMode::kBalanced;
  if (name == "expert") return CosftMode::kExpert;
  if (name == "adaptthink") return CosftMode::kAdaptThink;
  throw ConfigError("unknown cosft mode: " + std::string(name));
}

std::vector<Trajectory> collect_expert_trajectories(EnvId env_id, int n_episodes,
                                                    std::uint64_t seed) {
  std::vector<Trajectory> out;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(env_id) + 101));
  for (int e = 0; e < n_episodes; ++e) {
    const int task = static_cast<int>(rng.index(num_tasks(env_id)));
    const std::uint64_t env_seed = rng.next();
    const EnvSpec spec = make_spec(env_id, task, env_seed);
    auto env = make_env(env_id);
    const auto reset = env->reset(spec);
    Trajectory traj;
    traj.instruction = reset.instruction;
    traj.env_id = env_id;
    traj.task_id = task;
    traj.seed = env_seed;
    traj.complexity_tier = spec.complexity_tier;
    std::string obs = reset.observation;
    while (!env->done()) {
      TrajectoryStep step;
      step.observation = obs;
      step.admissible_count = env->admissible_actions().size();
      step.action = env->oracle_action();
      const auto outcome = env->step(step.action);
      obs = outcome.observation;
      traj.steps.push_back(std::move(step));
    }
    traj.env_score = env->score();
    traj.termination_cause =
        env->success() ? TerminationCause::kSuccess : TerminationCause::kStepLimit;
    if (!env->success()) continue;
    traj.reward = terminal_reward(1, 1);
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<CosftExample> build_balanced_dataset(
    const std::vector<Trajectory>& trajs, std::uint64_t seed,
    const Vocabulary& vocab, const DatasetOptions& options) {
  return build_with(trajs, seed, vocab, options,
                    [](const auto&, std::size_t, const ThinkContext& tc, Rng& rng) {
                      const CognitiveLevel level = level_at(rng.index(kNumLevels));
                      ThinkContext c = tc;
                      c.oracle_first = rng.uniform() < 0.5;
                      return std::make_pair(level, render_think(level, c));
                    });
}

std::vector<CosftExample> build_balanced_dataset(
    const std::vector<Trajectory>& trajs, const LevelSource& levels,
    std::uint64_t seed, const Vocabulary& vocab, const DatasetOptions& options) {
  return build_with(trajs, seed, vocab, options,
                    [&levels](const auto&, std::size_t, const ThinkContext& tc,
                              Rng& rng) {
                      const CognitiveLevel level = levels();
                      ThinkContext c = tc;
                      c.oracle_first = rng.uniform() < 0.5;
                      return std::make_pair(level, render_think(level, c));
                    });
}

CognitiveLevel expert_level(int step_index, const std::string& observation,
                            std::size_t admissible_now,
                            std::size_t admissible_before) {
  if (step_index == 0) return CognitiveLevel::L4;
  if (observation == kNothingHappened || observation == kNoKnownAction) {
    return CognitiveLevel::L3;
  }
  if (admissible_now != admissible_before) return CognitiveLevel::L2;
  return CognitiveLevel::L1;
}

std::vector<CosftExample> build_expert_selected_dataset(
    const std::vector<Trajectory>& trajs, const Vocabulary& vocab,
    const DatasetOptions& options) {
  return build_with(
      trajs, 0, vocab, options,
      [](const std::vector<ReplayedStep>& steps, std::size_t t,
         const ThinkContext& tc, Rng& rng) {
        const std::size_t before = t == 0 ? 0 : steps[t - 1].admissible_count;
        const CognitiveLevel level =
            expert_level(static_cast<int>(t), steps[t].observation,
                         steps[t].admissible_count, before);
        ThinkContext c = tc;
        c.oracle_first = rng.uniform() < 0.5;
        return std::make_pair(level, render_think(level, c));
      });
}

std::vector<CosftExample> build_adaptthink_dataset(
    const std::vector<Trajectory>& trajs, std::uint64_t seed,
    const Vocabulary& vocab, const DatasetOptions& options) {
  return build_with(trajs, seed, vocab, options,
                    [](const auto&, std::size_t, const ThinkContext& tc, Rng& rng) {
                      if (rng.uniform() < 0.5) {
                        return std::make_pair(CognitiveLevel::L1, TokenSeq{});
                      }
                      ThinkContext c = tc;
                      c.oracle_first = rng.uniform() < 0.5;
                      return std::make_pair(CognitiveLevel::L4,
                                            render_think(CognitiveLevel::L4, c));
                    });
}

std::vector<CosftExample> build_dataset(CosftMode mode,
                                        const std::vector<Trajectory>& trajs,
                                        std::uint64_t seed,
                                        const Vocabulary& vocab,
                                        const DatasetOptions& options) {
  switch (mode) {
    case CosftMode::kBalanced:
      return build_balanced_dataset(trajs, seed, vocab, options);
    case CosftMode::kExpert:
      return build_expert_selected_dataset(trajs, vocab, options);
    case CosftMode::kAdaptThink:
      return build_adaptthink_dataset(trajs, seed, vocab, options);
  }
  return {};
}

std::array<double, kNumLevels> level_frequencies(
    const std::vector<CosftExample>& dataset) {
  std::array<double, kNumLevels> f{};
  for (const auto& ex : dataset) f[level_index(ex.target.level)] += 1.0;
  if (!dataset.empty()) {
    for (auto& x : f) x /= static_cast<double>(dataset.size());
  }
  return f;
}

CosftTrainReport train_cosft(PolicyModel& model,
                             const std::vector<CosftExample>& dataset,
                             const CosftTrainOptions& options) {
  if (dataset.empty()) throw ConfigError("cosft dataset is empty");
  if (options.batch_size <= 0) throw ConfigError("batch_size must be positive");
  CosftTrainReport report;
  Adam adam(static_cast<Eigen::Index>(model.num_parameters()));
  const Vocabulary& vocab = model.vocab();
  std::vector<SupervisedExample> all;
  all.reserve(dataset.size());
  for (const auto& ex : dataset) {
    all.push_back({ex.ctx.tokens, vocab.encode(ex.target.raw_text)});
  }
  std::vector<std::size_t> order(all.size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      std::vector<SupervisedExample> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(all[order[i]]);
      LossAndGrad lg = nll_loss(model, batch);
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
        throw DivergenceDetected("cosft loss became non-finite in epoch " +
                                 std::to_string(epoch));
      }
      clip_grad_norm(lg.grad, options.grad_clip);
      adam.step(model.parameters(), lg.grad, options.learning_rate);
      loss_sum += lg.loss * static_cast<double>(lg.tokens);
      token_sum += lg.tokens;
      ++report.updates;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(token_sum));
  }
  return report;
}

void write_dataset(const std::string& path,
                   const std::vector<CosftExample>& dataset,
                   const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write dataset " + path);
  for (const auto& ex : dataset) {
    nlohmann::json j = {
        {"prompt_tokens", vocab.decode(ex.ctx.tokens)},
        {"target_tokens", ex.target.raw_text},
        {"level", static_cast<int>(ex.target.level)},
        {"env_id", to_string(ex.env_id)},
        {"task_id", ex.task_id},
        {"step_index", ex.step_index},
    };
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset " + path);
}

std::vector<CosftExample> read_dataset(const std::string& path,
                                       const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path);
  std::vector<CosftExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CosftExample ex;
    ex.ctx.tokens = vocab.encode(j.at("prompt_tokens").get<TokenSeq>());
    const auto raw = j.at("target_tokens").get<TokenSeq>();
    auto parsed = parse_structured(raw, Strictness::kRollout);
    if (!parsed) throw IoError("dataset target does not parse: " + join_tokens(raw));
    ex.target = parsed.step();
    ex.env_id = env_id_from_string(j.at("env_id").get<std::string>());
    ex.task_id = j.value("task_id", 0);
    ex.step_index = j.at("step_index").get<int>();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace copolab
