#include <algorithm>
#include <cmath>
#include <map>

#include "copolab/copo.hpp"
#include "copolab/error.hpp"

namespace copolab {

namespace {

// Sequences scored in one forward pass: one shared prompt and one or more
// responses, each in its own attention segment.
struct Pack {
  const std::vector<int>* prompt = nullptr;
  std::vector<const TrainingSequence*> members;
};

std::vector<Pack> make_packs(const std::vector<TrainingSequence>& seqs) {
  std::vector<Pack> packs;
  std::map<int, std::size_t> by_id;
  for (const auto& s : seqs) {
    if (s.prompt == nullptr) throw ConfigError("training sequence without a prompt");
    if (s.response.size() != s.old_logprobs.size() ||
        s.response.size() != s.advantages.size()) {
      throw ConfigError("training sequence fields differ in length");
    }
    if (s.pack >= 0) {
      auto [it, fresh] = by_id.try_emplace(s.pack, packs.size());
      if (fresh) packs.push_back({s.prompt, {}});
      if (packs[it->second].prompt != s.prompt) {
        throw ConfigError("packed sequences must share their prompt");
      }
      packs[it->second].members.push_back(&s);
    } else {
      packs.push_back({s.prompt, {&s}});
    }
  }
  return packs;
}

}  // namespace

ObjectiveResult clipped_objective(const PolicyModel& model,
                                  const PolicyModel* ref,
                                  const std::vector<TrainingSequence>& seqs,
                                  const ObjectiveConfig& config,
                                  bool with_grad) {
  if (config.kl_beta != 0.0 && ref == nullptr) {
    throw ConfigError("a KL penalty needs a reference model");
  }
  ObjectiveResult out;
  if (with_grad) out.grad = Eigen::VectorXd::Zero(model.num_parameters());
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;

  for (const Pack& pack : make_packs(seqs)) {
    const std::vector<int>& prompt = *pack.prompt;
    if (prompt.empty()) throw ContextOverflow("empty prompt");
    const int P = static_cast<int>(prompt.size());
    std::vector<int> tokens(prompt);
    std::vector<int> rows;
    AttentionMask mask;
    const bool packed = pack.members.size() > 1;
    if (packed) {
      mask.segment.assign(prompt.size(), 0);
      for (int i = 0; i < P; ++i) mask.position.push_back(i);
    }
    for (std::size_t s = 0; s < pack.members.size(); ++s) {
      const auto& resp = pack.members[s]->response;
      for (std::size_t n = 0; n < resp.size(); ++n) {
        rows.push_back(n == 0 ? P - 1 : static_cast<int>(tokens.size()) - 1);
        tokens.push_back(resp[n]);
        if (packed) {
          mask.segment.push_back(static_cast<int>(s) + 1);
          mask.position.push_back(P + static_cast<int>(n));
        }
      }
    }
    if (rows.empty()) continue;
    const AttentionMask* mp = packed ? &mask : nullptr;
    Transformer::Activations cache;
    const Eigen::MatrixXd logp =
        model.net().forward(tokens, rows, with_grad ? &cache : nullptr, mp);
    Eigen::MatrixXd logq;
    if (config.kl_beta != 0.0) logq = ref->net().forward(tokens, rows, nullptr, mp);
    Eigen::MatrixXd dlogp;
    if (with_grad) dlogp = Eigen::MatrixXd::Zero(logp.rows(), logp.cols());

    Eigen::Index r = 0;
    for (const TrainingSequence* seq : pack.members) {
      const Eigen::Index n0 = r;
      const auto len = static_cast<Eigen::Index>(seq->response.size());
      for (Eigen::Index n = 0; n < len; ++n, ++r) {
        const int tok = seq->response[static_cast<std::size_t>(n)];
        const double adv = seq->advantages[static_cast<std::size_t>(n)];
        const double ratio =
            std::exp(logp(r, tok) - seq->old_logprobs[static_cast<std::size_t>(n)]);
        const double clipped_ratio = std::clamp(ratio, lo, hi);
        const bool clipped = (adv > 0 && ratio > hi) || (adv < 0 && ratio < lo);
        out.loss -= seq->weight * std::min(ratio * adv, clipped_ratio * adv);
        if (clipped) ++out.clipped;
        if (with_grad && !clipped) dlogp(r, tok) -= seq->weight * adv * ratio;
      }
      out.tokens += static_cast<std::size_t>(len);
      if (config.kl_beta == 0.0) continue;
      const Eigen::MatrixXd p_rows = logp.middleRows(n0, len);
      const Eigen::MatrixXd q_rows = logq.middleRows(n0, len);
      const Eigen::VectorXd kl = categorical_kl(p_rows, q_rows);
      Eigen::MatrixXd kl_grad;
      if (with_grad) kl_grad = categorical_kl_grad(p_rows, q_rows);
      for (Eigen::Index n = 0; n < len; ++n) {
        out.kl_sum += kl[n];
        if (!config.kl_all_tokens && seq->advantages[static_cast<std::size_t>(n)] == 0.0) {
          continue;
        }
        out.loss += seq->weight * config.kl_beta * kl[n];
        if (with_grad) dlogp.row(n0 + n) += seq->weight * config.kl_beta * kl_grad.row(n);
      }
    }
    if (with_grad) model.net().backward(cache, dlogp, out.grad);
  }
  if (!std::isfinite(out.loss)) throw NonFiniteLoss("clipped objective is not finite");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_member(const RolloutBatch& batch, const AdvantageTable& table,
                  std::pair<int, int> gm) {
  const auto g = static_cast<std::size_t>(gm.first);
  const auto m = static_cast<std::size_t>(gm.second);
  if (g >= batch.groups.size() || m >= batch.groups[g].members.size() ||
      g >= table.trajectory.size() || m >= table.trajectory[g].size()) {
    throw ConfigError("member index out of range");
  }
}

// Every original step of a trajectory, all tokens carrying advantage A and
// normalized by the trajectory's total response length.
void append_original(const RolloutTrajectory& rt, double advantage, double scale,
                     std::vector<TrainingSequence>& out) {
  std::size_t total = 0;
  for (const auto& s : rt.samples) total += s.response.size();
  if (total == 0) return;
  for (const auto& s : rt.samples) {
    TrainingSequence seq;
    seq.prompt = &s.ctx.tokens;
    seq.response = s.response;
    seq.old_logprobs = s.old_logprobs;
    seq.advantages.assign(s.response.size(), advantage);
    seq.weight = scale / static_cast<double>(total);
    out.push_back(std::move(seq));
  }
}

}  // namespace

std::vector<TrainingSequence> grpo_sequences(
    const RolloutBatch& batch, const AdvantageTable& table,
    const std::vector<std::pair<int, int>>& members) {
  std::vector<TrainingSequence> out;
  if (members.empty()) return out;
  const double scale = 1.0 / static_cast<double>(members.size());
  for (const auto& gm : members) {
    check_member(batch, table, gm);
    if (table.skipped[static_cast<std::size_t>(gm.first)]) continue;
    append_original(batch.groups[static_cast<std::size_t>(gm.first)]
                        .members[static_cast<std::size_t>(gm.second)],
                    table.trajectory[static_cast<std::size_t>(gm.first)]
                                    [static_cast<std::size_t>(gm.second)],
                    scale, out);
  }
  return out;
}

std::vector<TrainingSequence> copo_sequences(
    const RolloutBatch& batch, const AdvantageTable& table,
    const std::vector<std::pair<int, int>>& members) {
  std::vector<TrainingSequence> out;
  if (members.empty()) return out;
  const double scale = 1.0 / static_cast<double>(members.size());
  std::map<std::pair<int, int>, std::vector<const CognitiveGroup*>> expanded;
  for (const auto& cg : table.cognitive_groups) {
    expanded[{cg.group, cg.member}].push_back(&cg);
  }
  int next_pack = 0;
  for (const auto& gm : members) {
    check_member(batch, table, gm);
    const auto g = static_cast<std::size_t>(gm.first);
    const auto m = static_cast<std::size_t>(gm.second);
    if (table.skipped[g]) continue;
    const RolloutTrajectory& rt = batch.groups[g].members[m];
    if (!table.positive[g][m]) {
      append_original(rt, table.trajectory[g][m], scale, out);
      continue;
    }
    const auto it = expanded.find(gm);
    if (it == expanded.end()) throw ConfigError("successful trajectory was not expanded");
    std::size_t total = 0;
    for (const CognitiveGroup* cg : it->second) {
      for (const auto& v : cg->variants) total += v.response.size();
    }
    for (const CognitiveGroup* cg : it->second) {
      const int pack = next_pack++;
      for (std::size_t k = 0; k < kNumLevels; ++k) {
        const Variant& v = cg->variants[k];
        TrainingSequence seq;
        seq.prompt = &rt.samples[static_cast<std::size_t>(cg->step)].ctx.tokens;
        seq.response = v.response;
        seq.old_logprobs = v.old_logprobs;
        seq.advantages.assign(v.response.size(), cg->weighting.advantages[k]);
        seq.weight = scale / static_cast<double>(total);
        seq.pack = pack;
        out.push_back(std::move(seq));
      }
    }
  }
  return out;
}

}  // namespace copolab
