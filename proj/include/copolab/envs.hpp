#pragma once

// Seeded toy text POMDPs and their scripted oracle experts.
//
// GridHouse is a household world with six task families (pick-place,
// examine-with-light, clean-place, heat-place, cool-place, pick-two-place).
// MiniLab is a small science lab with nine task types spread over three
// complexity tiers and a 100-point additive rubric.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "copolab/core.hpp"

namespace copolab {

struct EnvSpec {
  EnvId env_id = EnvId::kGridHouse;
  int task_id = 0;
  std::uint64_t seed = 0;
  int max_steps = 30;
  ComplexityTier complexity_tier = ComplexityTier::kShort;
};

/// Step limits: 30 for GridHouse, 100 for MiniLab.
int default_max_steps(EnvId id);
int num_tasks(EnvId id);
/// Builds a spec with the default step limit and the tier of the task.
EnvSpec make_spec(EnvId id, int task_id, std::uint64_t seed);

/// Short iff <= 20, Medium iff in (20, 50], Long iff > 50.
ComplexityTier tier_of(int oracle_len);

struct StepOutcome {
  std::string observation;
  std::vector<std::string> admissible_actions;
  bool done = false;
  bool success = false;
  double score = 0.0;
};

struct ResetResult {
  std::string instruction;
  std::string observation;
  std::vector<std::string> admissible_actions;
};

/// Ground-truth facts a scripted expert uses to write thinking text.
struct ThinkFacts {
  std::string location;      // "the middle of the room", "countertop 2", ...
  std::string holding;       // "nothing" or an object name
  std::string key_fact;      // what the next useful move depends on
  std::string oracle_action;
  std::string alternative_action;  // another admissible action, may be empty
};

inline constexpr std::string_view kNothingHappened = "Nothing happened.";
inline constexpr std::string_view kNoKnownAction =
    "No known action matches that input.";

/// A single-owner text environment. Copyable through clone().
class TextEnv {
 public:
  virtual ~TextEnv() = default;

  virtual ResetResult reset(const EnvSpec& spec) = 0;
  /// Throws EpisodeFinished after done.
  virtual StepOutcome step(std::string_view action) = 0;
  /// Next move on a shortest known solution path. Throws EpisodeFinished at
  /// done and NoSolution when the task cannot be completed.
  virtual std::string oracle_action() const = 0;
  virtual ThinkFacts facts() const = 0;
  virtual std::vector<std::string> admissible_actions() const = 0;
  virtual std::unique_ptr<TextEnv> clone() const = 0;

  virtual EnvId id() const = 0;
  /// Task family or task type label, e.g. "clean-place".
  virtual std::string category() const = 0;
  /// Whether the admissible actions are rendered into the prompt.
  virtual bool lists_actions() const = 0;

  const EnvSpec& spec() const { return spec_; }
  int step_counter() const { return step_counter_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  double score() const { return score_; }

 protected:
  EnvSpec spec_;
  int step_counter_ = 0;
  bool done_ = false;
  bool success_ = false;
  double score_ = 0.0;
};

std::unique_ptr<TextEnv> make_env(EnvId id);

/// Every word an environment can emit in instructions, observations and
/// actions.
std::vector<std::string> env_lexicon(EnvId id);

/// Rolls the oracle from reset to done and returns its length and outcome.
int oracle_length(const EnvSpec& spec);

struct CatalogueEntry {
  EnvId env_id;
  int task_id;
  std::string category;
  std::string instruction;
  int oracle_len;
  ComplexityTier tier;
};

std::vector<CatalogueEntry> task_catalogue(EnvId id, std::uint64_t seed = 0);

}  // namespace copolab
