#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "copolab/text.hpp"

namespace copolab {

// ---------------------------------------------------------------------------
// Cognitive levels

/// Reasoning depth chosen at each step. Ordered L1 < L2 < L3 < L4.
enum class CognitiveLevel : std::uint8_t { L1 = 1, L2 = 2, L3 = 3, L4 = 4 };

inline constexpr std::size_t kNumLevels = 4;
inline constexpr std::array<CognitiveLevel, kNumLevels> kAllLevels{
    CognitiveLevel::L1, CognitiveLevel::L2, CognitiveLevel::L3,
    CognitiveLevel::L4};

constexpr std::size_t level_index(CognitiveLevel level) {
  return static_cast<std::size_t>(level) - 1;
}
constexpr CognitiveLevel level_at(std::size_t index) {
  return static_cast<CognitiveLevel>(index + 1);
}
std::optional<CognitiveLevel> level_from_digit(std::string_view token);
std::string level_digit(CognitiveLevel level);

/// Fixed think text of an instinctive (L1) response.
inline constexpr std::string_view kInstinctiveThought =
    "Okay, I think I have finished thinking.";

// ---------------------------------------------------------------------------
// Structured output

/// Half-open index range into a token sequence.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
};

/// One decision step `<level>K</level><think>T</think><action>A</action>`.
struct StructuredStep {
  CognitiveLevel level = CognitiveLevel::L1;
  TokenSeq think_text;
  TokenSeq action_text;
  TokenSeq raw_text;
  TokenSpan think_token_span;
  TokenSpan action_token_span;

  std::string action_string() const { return join_tokens(action_text); }
  std::string serialize() const { return join_tokens(raw_text); }
};

/// Builds the canonical token sequence for a step from its parts.
StructuredStep make_step(CognitiveLevel level, const TokenSeq& think,
                         const TokenSeq& action);

enum class FormatError {
  kMissingTag,
  kTagOrder,
  kBadLevel,
  kEmptyAction,
  kTrailingContent,
  kL1ThinkMismatch,
};
std::string_view to_string(FormatError error);

struct FormatViolation {
  FormatError error = FormatError::kMissingTag;
  std::size_t position = 0;  // token index of the first offending token
};

/// How strictly L1 think text is checked. Rollouts accept any think text;
/// supervised targets must carry the fixed sentence byte-exact.
enum class Strictness { kRollout, kSupervised };

class ParseResult {
 public:
  ParseResult(StructuredStep step) : step_(std::move(step)) {}
  ParseResult(FormatViolation v) : violation_(v) {}

  bool ok() const { return step_.has_value(); }
  explicit operator bool() const { return ok(); }
  const StructuredStep& step() const { return *step_; }
  StructuredStep& step() { return *step_; }
  const FormatViolation& violation() const { return *violation_; }

 private:
  std::optional<StructuredStep> step_;
  std::optional<FormatViolation> violation_;
};

ParseResult parse_structured(const TokenSeq& raw,
                             Strictness strictness = Strictness::kRollout);
ParseResult parse_structured(std::string_view raw,
                             Strictness strictness = Strictness::kRollout);

// ---------------------------------------------------------------------------
// Rewards and trajectories

struct RewardBreakdown {
  int task = 0;
  int format = 0;
  int total = 0;
};

RewardBreakdown terminal_reward(int task_success, int format_ok);

enum class EnvId { kGridHouse, kMiniLab };
std::string_view to_string(EnvId id);
EnvId env_id_from_string(std::string_view name);

enum class ComplexityTier { kShort, kMedium, kLong };
std::string_view to_string(ComplexityTier tier);
ComplexityTier tier_from_string(std::string_view name);

enum class TerminationCause { kSuccess, kStepLimit, kRunning };
std::string_view to_string(TerminationCause cause);

struct TrajectoryStep {
  std::string observation;
  TokenSeq raw_text;
  std::optional<StructuredStep> parsed;  // empty when the step is malformed
  std::string action;                    // text sent to the environment
  std::size_t admissible_count = 0;
};

struct Trajectory {
  std::string instruction;
  std::vector<TrajectoryStep> steps;
  RewardBreakdown reward;
  double env_score = 0.0;
  ComplexityTier complexity_tier = ComplexityTier::kShort;
  EnvId env_id = EnvId::kGridHouse;
  int task_id = 0;
  std::uint64_t seed = 0;
  TerminationCause termination_cause = TerminationCause::kRunning;

  std::size_t horizon() const { return steps.size(); }
  std::size_t response_tokens() const;
};

/// Returns 1 iff every step parses; stores the result in reward.format and
/// refreshes reward.total.
int validate_trajectory_format(Trajectory& traj);

nlohmann::json to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Training configuration

enum class ConfidenceMetric { kMeanLogProb, kMaxLogProb, kMinLogProb, kNegEntropy };
std::string_view to_string(ConfidenceMetric metric);
ConfidenceMetric confidence_metric_from_string(std::string_view name);

struct TrainConfig {
  int group_size = 8;
  int groups_per_rollout = 16;
  double clip_epsilon = 0.2;
  double kl_beta = 0.1;
  double softmax_temperature = 2.0;
  double learning_rate = 1e-4;
  int iterations = 150;
  std::uint64_t seed = 0;
  ConfidenceMetric confidence_metric = ConfidenceMetric::kMeanLogProb;
  double adaptthink_delta = 0.05;
  double std_guard = 1e-8;

  int minibatch_size = 64;  // trajectories per gradient step
  double rollout_temperature = 1.0;
  double validation_temperature = 0.4;
  int max_response_tokens = 1024;
  int history_length = 6;
  int task_pool = 0;  // 0: whole suite
  bool recompute_confidence = false;
  bool kl_all_tokens = true;
  double grad_clip = 1.0;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Reads a flat document; keys mirror the field names. Unknown keys throw.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);

}  // namespace copolab
