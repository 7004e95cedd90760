#include "copolab/templates.hpp"

namespace copolab {

namespace {

constexpr std::string_view kReasoningL2 =
    "choose the action that moves the task forward.";
constexpr std::string_view kReasoningL3 =
    "keep what worked and avoid repeating what failed.";
constexpr std::string_view kReasoningL4 =
    "pick the candidate whose outcome brings the goal closest.";
constexpr std::string_view kFirstStep = "nothing has been tried yet.";
constexpr std::string_view kLastFailed = "the last action failed, so try another.";
constexpr std::string_view kLastWorked = "the last action worked.";

std::string reflection(const ThinkContext& ctx) {
  if (ctx.step_index == 0 || ctx.last_observation.empty()) {
    return std::string(kFirstStep);
  }
  if (ctx.last_observation == kNothingHappened ||
      ctx.last_observation == kNoKnownAction) {
    return std::string(kLastFailed);
  }
  return std::string(kLastWorked);
}

std::string candidates(const ThinkContext& ctx) {
  const auto& f = ctx.facts;
  if (f.alternative_action.empty()) return f.oracle_action + ".";
  return ctx.oracle_first ? f.oracle_action + " or " + f.alternative_action + "."
                          : f.alternative_action + " or " + f.oracle_action + ".";
}

}  // namespace

std::vector<std::string_view> slot_schema(CognitiveLevel level) {
  switch (level) {
    case CognitiveLevel::L1:
      return {};
    case CognitiveLevel::L2:
      return {kSlotState, kSlotActions, kSlotReasoning};
    case CognitiveLevel::L3:
      return {kSlotGoal, kSlotState, kSlotActions, kSlotReflection,
              kSlotReasoning};
    case CognitiveLevel::L4:
      return {kSlotGoal,       kSlotState,      kSlotActions,
              kSlotReflection, kSlotEvaluation, kSlotReasoning};
  }
  return {};
}

TokenSeq render_think(CognitiveLevel level, const ThinkContext& ctx) {
  if (level == CognitiveLevel::L1) return lex(kInstinctiveThought);
  std::string text;
  auto slot = [&text](std::string_view header, const std::string& body) {
    if (!text.empty()) text += ' ';
    text += header;
    text += ' ';
    text += body;
  };
  const bool deep = level != CognitiveLevel::L2;
  if (deep) slot(kSlotGoal, ctx.instruction);
  slot(kSlotState, "i am at " + ctx.facts.location + " holding " +
                       ctx.facts.holding + ".");
  slot(kSlotActions, candidates(ctx));
  if (deep) slot(kSlotReflection, reflection(ctx));
  if (level == CognitiveLevel::L4) slot(kSlotEvaluation, ctx.facts.key_fact);
  const std::string_view why = level == CognitiveLevel::L2   ? kReasoningL2
                               : level == CognitiveLevel::L3 ? kReasoningL3
                                                             : kReasoningL4;
  slot(kSlotReasoning, std::string(why));
  return lex(text);
}

std::vector<std::string> template_lexicon() {
  std::vector<std::string> words;
  for (std::string_view text :
       {kSlotGoal, kSlotState, kSlotActions, kSlotReflection, kSlotEvaluation,
        kSlotReasoning, kReasoningL2, kReasoningL3, kReasoningL4, kFirstStep,
        kLastFailed, kLastWorked, kInstinctiveThought,
        std::string_view("i am at holding or .")}) {
    for (auto& t : lex(text)) words.push_back(std::move(t));
  }
  return words;
}

}  // namespace copolab
