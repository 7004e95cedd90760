#include <algorithm>
#include <cmath>

#include "copolab/copo.hpp"
#include "copolab/error.hpp"

namespace copolab {

AdvantageTable compute_advantages(const std::vector<std::vector<double>>& rewards,
                                  double guard) {
  AdvantageTable table;
  for (const auto& group : rewards) {
    const Eigen::Map<const Eigen::VectorXd> r(group.data(),
                                              static_cast<Eigen::Index>(group.size()));
    const Eigen::VectorXd a = group_advantages(r, guard);
    table.trajectory.emplace_back(a.data(), a.data() + a.size());
    table.skipped.push_back(r.maxCoeff() == r.minCoeff());
    std::vector<bool> positive(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) positive[i] = group[i] > 0.0;
    table.positive.push_back(std::move(positive));
  }
  return table;
}

std::vector<std::vector<double>> batch_rewards(const RolloutBatch& batch,
                                               Algo algo, double delta) {
  std::vector<std::vector<double>> out;
  for (const auto& group : batch.groups) {
    std::vector<double> r;
    for (const auto& m : group.members) {
      r.push_back(algo == Algo::kAdaptThink ? adaptthink_reward(m.traj, delta)
                                            : m.traj.reward.total);
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

// Confidence of the action tokens of a variant from their log-probabilities
// and, for the entropy metric, the full next-token distributions.
double variant_confidence(ConfidenceMetric metric, const std::vector<double>& lp,
                          const Eigen::MatrixXd& logp_rows) {
  const Eigen::Map<const Eigen::VectorXd> v(lp.data(),
                                            static_cast<Eigen::Index>(lp.size()));
  if (metric == ConfidenceMetric::kNegEntropy) {
    const Eigen::MatrixXd p = logp_rows.array().exp().matrix();
    return confidence(metric, v, p);
  }
  return confidence(metric, v, Eigen::MatrixXd());
}

// Regenerates one variant from the decoder state right after the prompt.
Variant regenerate(const PolicyModel& model, const IncrementalDecoder& prompt_state,
                   const Eigen::VectorXd& prompt_logp, CognitiveLevel level,
                   const TokenSeq& action, const ExpansionOptions& options,
                   Rng& rng) {
  const Vocabulary& vocab = model.vocab();
  const int think_close = vocab.id(kThinkClose);
  const std::vector<int> action_ids = vocab.encode(action);

  Variant v;
  v.level = level;
  IncrementalDecoder dec = prompt_state;
  Eigen::VectorXd logp = prompt_logp;
  auto push = [&](int id) {
    v.response.push_back(id);
    v.old_logprobs.push_back(logp[id]);
    logp = dec.feed(id);
  };
  for (int id : forced_level_prefix(vocab, level)) push(id);

  // The think block, the tags around the action and the action itself must
  // still fit after the sampled thinking.
  const std::size_t tail = action_ids.size() + 3;
  const IncrementalDecoder after_prefix = dec;
  const Eigen::VectorXd after_prefix_logp = logp;
  const std::size_t prefix_len = v.response.size();
  TokenSeq think;
  bool closed = false;
  for (int n = 0; n < options.think_budget; ++n) {
    if (dec.length() + tail >= dec.capacity()) break;
    double lp = 0.0;
    const int id = draw_token(logp, options.temperature, rng, lp);
    if (is_tag_like(vocab.token(id))) {
      closed = id == think_close;
      break;
    }
    think.push_back(vocab.token(id));
    push(id);
  }
  if (!closed) {
    v.think_failed = true;
    think.clear();
    dec = after_prefix;
    logp = after_prefix_logp;
    v.response.resize(prefix_len);
    v.old_logprobs.resize(prefix_len);
  }

  const StructuredStep step = make_step(level, think, action);
  v.action_span = step.action_token_span;
  push(think_close);
  push(vocab.id(kActionOpen));
  std::vector<double> action_lp;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(action_ids.size()), logp.size());
  for (std::size_t i = 0; i < action_ids.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = logp.transpose();
    action_lp.push_back(logp[action_ids[i]]);
    push(action_ids[i]);
  }
  // The closing tag needs its probability but not the state after it.
  const int action_close = vocab.id(kActionClose);
  v.response.push_back(action_close);
  v.old_logprobs.push_back(logp[action_close]);
  if (vocab.encode(step.raw_text) != v.response) {
    throw Error("regenerated step does not match its canonical form");
  }
  v.confidence = variant_confidence(options.metric, action_lp, rows);
  return v;
}

void refresh_weighting(CognitiveGroup& cg, const ExpansionOptions& options) {
  Vector4<double> c;
  for (std::size_t k = 0; k < kNumLevels; ++k) c[k] = cg.variants[k].confidence;
  cg.weighting = reweight_cognitive_group(c, cg.trajectory_advantage,
                                          options.softmax_temperature, options.guard);
}

}  // namespace

void expand_cognitive_groups(const RolloutBatch& batch, AdvantageTable& table,
                             const PolicyModel& snapshot,
                             const ExpansionOptions& options, std::uint64_t seed) {
  table.cognitive_groups.clear();
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    if (table.skipped[g]) continue;
    const auto& members = batch.groups[g].members;
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (!table.positive[g][m]) continue;
      const auto& rt = members[m];
      for (std::size_t t = 0; t < rt.traj.steps.size(); ++t) {
        const auto& parsed = rt.traj.steps[t].parsed;
        // A rewarded trajectory passed the format gate, so every step parsed.
        if (!parsed) throw EmptyAction("rewarded trajectory has a malformed step");
        Rng rng(mix_seed(mix_seed(mix_seed(seed, g), m), t));
        IncrementalDecoder prompt_state(snapshot.net());
        const Eigen::VectorXd prompt_logp = prompt_state.feed(rt.samples[t].ctx.tokens);
        CognitiveGroup cg;
        cg.group = static_cast<int>(g);
        cg.member = static_cast<int>(m);
        cg.step = static_cast<int>(t);
        cg.trajectory_advantage = table.trajectory[g][m];
        for (std::size_t k = 0; k < kNumLevels; ++k) {
          cg.variants[k] = regenerate(snapshot, prompt_state, prompt_logp,
                                      level_at(k), parsed->action_text, options, rng);
        }
        refresh_weighting(cg, options);
        table.cognitive_groups.push_back(std::move(cg));
      }
    }
  }
}

void rescore_cognitive_group(const RolloutBatch& batch, CognitiveGroup& cg,
                             const PolicyModel& model,
                             const ExpansionOptions& options) {
  const auto& ctx = batch.groups[static_cast<std::size_t>(cg.group)]
                        .members[static_cast<std::size_t>(cg.member)]
                        .samples[static_cast<std::size_t>(cg.step)]
                        .ctx;
  for (auto& v : cg.variants) {
    const ScoredResponse s = score_response(model, ctx.tokens, v.response);
    const auto b = static_cast<Eigen::Index>(v.action_span.begin);
    const auto n = static_cast<Eigen::Index>(v.action_span.size());
    const std::vector<double> lp(s.logprobs.begin() + b, s.logprobs.begin() + b + n);
    v.confidence = variant_confidence(options.metric, lp, s.logp_rows.middleRows(b, n));
  }
  refresh_weighting(cg, options);
}

}  // namespace copolab
