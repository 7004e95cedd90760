#pragma once

// Level-specific thinking templates filled from environment ground truth.

#include <string>
#include <string_view>
#include <vector>

#include "copolab/core.hpp"
#include "copolab/envs.hpp"

namespace copolab {

/// Slot headers in the order they appear inside a think block.
inline constexpr std::string_view kSlotGoal = "Goal:";
inline constexpr std::string_view kSlotState = "Current state:";
inline constexpr std::string_view kSlotActions = "Available actions:";
inline constexpr std::string_view kSlotReflection = "Reflection:";
inline constexpr std::string_view kSlotEvaluation = "Evaluation:";
inline constexpr std::string_view kSlotReasoning = "Reasoning:";

/// Headers a level's think block must contain, in order. Empty for L1.
std::vector<std::string_view> slot_schema(CognitiveLevel level);

/// What the template renderer may look at: the task, the current ground
/// truth and the previous observation. Nothing from future steps.
struct ThinkContext {
  std::string instruction;
  ThinkFacts facts;
  std::string last_observation;  // empty at the first step
  int step_index = 0;
  bool oracle_first = true;  // order of the two candidate actions
};

TokenSeq render_think(CognitiveLevel level, const ThinkContext& ctx);

/// Words the templates contribute beyond environment text.
std::vector<std::string> template_lexicon();

}  // namespace copolab
