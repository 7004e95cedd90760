#pragma once

// A tiny vocabulary, model and rollout batch shared by the objective tests
// and the acceptance checks; small enough for finite differences.

#include <memory>
#include <string>
#include <vector>

#include "copolab/copo.hpp"

namespace toy {

using namespace copolab;

inline std::shared_ptr<const Vocabulary> toy_vocab() {
  static const auto v = std::make_shared<const Vocabulary>(std::vector<std::string>{
      "1", "2", "3", "4", "go", "north", "south", "door", "the", "."});
  return v;
}

inline ModelConfig toy_config() {
  ModelConfig c;
  c.context_length = 30;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 4;
  return c;
}

inline PolicyModel toy_model(std::uint64_t seed, double scale) {
  PolicyModel m(toy_vocab(), toy_config(), seed);
  m.parameters() *= scale;
  return m;
}

struct ToyStep {
  CognitiveLevel level;
  std::string think;
  std::string action;
};

inline RolloutTrajectory toy_member(const PolicyModel& old, const std::vector<ToyStep>& steps,
                             bool success) {
  const Vocabulary& v = old.vocab();
  RolloutTrajectory rt;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    StepSample s;
    s.ctx.tokens = {Vocabulary::kBos, v.id("go"), v.id(t % 2 ? "north" : "south")};
    const StructuredStep st = make_step(steps[t].level, lex(steps[t].think), lex(steps[t].action));
    s.response = v.encode(st.raw_text);
    s.old_logprobs = score_response(old, s.ctx.tokens, s.response).logprobs;
    TrajectoryStep ts;
    ts.observation = "the door .";
    ts.raw_text = st.raw_text;
    ts.parsed = st;
    ts.action = st.action_string();
    rt.traj.steps.push_back(ts);
    rt.samples.push_back(std::move(s));
  }
  score_trajectory(rt.traj, success);
  return rt;
}

// One group: a successful two-step member and a failed two-step member.
inline RolloutBatch toy_batch(const PolicyModel& old) {
  RolloutBatch b;
  RolloutGroup g;
  g.members.push_back(toy_member(old,
                                 {{CognitiveLevel::L2, "the door", "go north"},
                                  {CognitiveLevel::L1, "", "go south"}},
                                 true));
  g.members.push_back(toy_member(old,
                                 {{CognitiveLevel::L3, "the", "go door"},
                                  {CognitiveLevel::L4, "door .", "north"}},
                                 false));
  b.groups.push_back(std::move(g));
  return b;
}

inline std::vector<std::pair<int, int>> all_members(const RolloutBatch& b) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t g = 0; g < b.groups.size(); ++g) {
    for (std::size_t m = 0; m < b.groups[g].members.size(); ++m) {
      out.emplace_back(static_cast<int>(g), static_cast<int>(m));
    }
  }
  return out;
}

inline ExpansionOptions toy_expansion() {
  ExpansionOptions o;
  o.think_budget = 6;
  return o;
}

}  // namespace toy
