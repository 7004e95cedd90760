#pragma once

// Evaluation runs, level-usage profiles, run comparison and CSV emission.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copolab/copo.hpp"
#include "copolab/core.hpp"
#include "copolab/envs.hpp"
#include "copolab/policy.hpp"

namespace copolab {

// ---------------------------------------------------------------------------
// Agents

/// What an agent sees before acting.
struct AgentView {
  const TextEnv* env = nullptr;
  std::string instruction;
  std::string observation;
  std::vector<HistoryEntry> history;
  std::vector<std::string> admissible;
};

struct AgentStep {
  std::string action;
  TokenSeq raw_text;  // empty for agents that do not write structured output
  std::optional<CognitiveLevel> level;
  bool well_formed = true;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentStep act(const AgentView& view, Rng& rng) = 0;
  virtual std::string name() const = 0;
};

/// Follows the environment's scripted solution.
std::unique_ptr<Agent> make_oracle_agent();
/// Picks uniformly among the admissible actions.
std::unique_ptr<Agent> make_random_agent();
/// Samples structured steps from a policy at `temperature`.
std::unique_ptr<Agent> make_policy_agent(const PolicyModel& policy,
                                         double temperature, int history_length,
                                         int max_response_tokens);

// ---------------------------------------------------------------------------
// Reports

struct EpisodeResult {
  int episode = 0;
  int task_id = 0;
  std::uint64_t env_seed = 0;
  std::string category;
  ComplexityTier tier = ComplexityTier::kShort;
  /// Task completed and, for structured agents, every step well formed.
  bool success = false;
  double score = 0.0;
  int steps = 0;
  std::size_t tokens = 0;
  std::vector<int> levels;  // 1..4 per step, 0 for a malformed step
  std::string error;        // non-empty when the episode aborted
};

struct CategoryStats {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_score = 0.0;
  double mean_tokens = 0.0;
};

struct EvalReport {
  EnvId env_id = EnvId::kGridHouse;
  std::string agent;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpisodeResult> episodes;

  // Aggregates; meaningless when `empty`.
  bool empty = true;
  double success_rate = 0.0;
  double mean_score = 0.0;
  double mean_tokens = 0.0;
  std::array<double, kNumLevels> level_histogram{};
  std::map<std::string, CategoryStats> by_category;
};

/// Recomputes every aggregate of `report` from its episode rows.
void aggregate(EvalReport& report);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

struct EvalOptions {
  EnvId env = EnvId::kGridHouse;
  int n_episodes = 100;
  std::uint64_t seed = 0;
  int task_pool = 0;  // 0: the whole suite
};

/// Runs `n_episodes` episodes. Episode e plays a task and environment seed
/// drawn from mix_seed(seed, e); agent sampling is seeded the same way, so
/// the report is a pure function of its inputs.
EvalReport evaluate(Agent& agent, const EvalOptions& options);

/// Convenience overload for a policy at the validation temperature.
EvalReport evaluate(const PolicyModel& policy, const EvalOptions& options,
                    double temperature, int history_length = 6,
                    int max_response_tokens = 1024);

// ---------------------------------------------------------------------------
// Level usage

inline constexpr int kProgressBins = 10;

struct LevelTrace {
  ComplexityTier tier = ComplexityTier::kShort;
  std::vector<int> levels;  // 1..4, 0 for steps without a level
};

struct DistributionProfile {
  std::array<std::array<double, kNumLevels>, kProgressBins> progress{};
  std::array<bool, kProgressBins> progress_empty{};
  std::array<std::array<double, kNumLevels>, 3> tiers{};
  std::array<bool, 3> tier_empty{};
};

/// Progress bin of step t in a trajectory of length T: floor(10 t / T),
/// clamped to the last bin.
int progress_bin(std::size_t t, std::size_t T);

/// Pools steps across trajectories. Steps without a level are skipped.
DistributionProfile level_distribution(const std::vector<LevelTrace>& traces);
std::vector<LevelTrace> level_traces(const EvalReport& report);

// ---------------------------------------------------------------------------
// Comparison and plot data

/// Paired deltas a - b and the token reduction 1 - tokens_a / tokens_b.
/// Throws SuiteMismatch unless both reports ran the same episodes.
nlohmann::json compare_runs(const EvalReport& a, const EvalReport& b);

/// Writes training_curve.csv (iteration, success_rate, mean_tokens,
/// mean_kl, loss, L1..L4).
void emit_training_curve(const std::vector<IterationMetrics>& metrics,
                         const std::string& out_dir);
/// Writes progress_bins.csv (bin, L1..L4) and tier_bins.csv (tier, L1..L4).
/// Empty bins leave their level cells blank.
void emit_profile(const DistributionProfile& profile, const std::string& out_dir);
/// Writes level_histogram.csv (level, share).
void emit_level_histogram(const std::array<double, kNumLevels>& histogram,
                          const std::string& out_dir);

/// Reads a metrics.jsonl stream.
std::vector<IterationMetrics> read_metrics(const std::string& path);

}  // namespace copolab
