#include <cmath>
#include <filesystem>
#include <fstream>

#include "copolab/copo.hpp"
#include "copolab/error.hpp"
#include "copolab/optim.hpp"

namespace copolab {

nlohmann::json to_json(const IterationMetrics& m) {
  return {
      {"iteration", m.iteration},
      {"success_rate", m.success_rate},
      {"format_rate", m.format_rate},
      {"mean_tokens", m.mean_tokens},
      {"mean_steps", m.mean_steps},
      {"level_histogram", m.level_histogram},
      {"mean_kl", m.mean_kl},
      {"loss", m.loss},
      {"skipped_groups", m.skipped_groups},
      {"cognitive_groups", m.cognitive_groups},
      {"updates", m.updates},
  };
}

IterationMetrics iteration_metrics_from_json(const nlohmann::json& j) {
  IterationMetrics m;
  m.iteration = j.at("iteration").get<int>();
  m.success_rate = j.at("success_rate").get<double>();
  m.format_rate = j.at("format_rate").get<double>();
  m.mean_tokens = j.at("mean_tokens").get<double>();
  m.mean_steps = j.at("mean_steps").get<double>();
  m.level_histogram = j.at("level_histogram").get<std::array<double, kNumLevels>>();
  m.mean_kl = j.at("mean_kl").get<double>();
  m.loss = j.at("loss").get<double>();
  m.skipped_groups = j.at("skipped_groups").get<int>();
  m.cognitive_groups = j.at("cognitive_groups").get<int>();
  m.updates = j.at("updates").get<int>();
  return m;
}

namespace {

nlohmann::json cognitive_group_json(int iteration, const CognitiveGroup& cg) {
  nlohmann::json conf, norm, weights, adv, failed;
  for (std::size_t k = 0; k < kNumLevels; ++k) {
    conf.push_back(cg.weighting.confidence[k]);
    norm.push_back(cg.weighting.normalized[k]);
    weights.push_back(cg.weighting.weights[k]);
    adv.push_back(cg.weighting.advantages[k]);
    failed.push_back(cg.variants[k].think_failed);
  }
  return {{"iteration", iteration},         {"group", cg.group},
          {"member", cg.member},            {"step", cg.step},
          {"confidences", conf},            {"normalized", norm},
          {"weights", weights},             {"advantages", adv},
          {"trajectory_advantage", cg.trajectory_advantage},
          {"think_failed", failed}};
}

void rollout_statistics(const RolloutBatch& batch, IterationMetrics& m) {
  int n = 0, success = 0, formatted = 0;
  double tokens = 0.0, steps = 0.0, parsed = 0.0;
  std::array<double, kNumLevels> hist{};
  for (const auto& group : batch.groups) {
    for (const auto& rt : group.members) {
      ++n;
      success += rt.traj.reward.task;
      formatted += rt.traj.reward.format;
      tokens += static_cast<double>(rt.traj.response_tokens());
      steps += static_cast<double>(rt.traj.steps.size());
      for (const auto& s : rt.traj.steps) {
        if (!s.parsed) continue;
        hist[level_index(s.parsed->level)] += 1.0;
        parsed += 1.0;
      }
    }
  }
  if (n == 0) return;
  m.success_rate = static_cast<double>(success) / n;
  m.format_rate = static_cast<double>(formatted) / n;
  m.mean_tokens = tokens / n;
  m.mean_steps = steps / n;
  if (parsed > 0) {
    for (auto& h : hist) h /= parsed;
  }
  m.level_histogram = hist;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

TrainResult train(PolicyModel& policy, const PolicyModel& reference,
                  const TrainRequest& request) {
  const TrainConfig& config = request.config;
  config.validate();
  if (policy.num_parameters() != reference.num_parameters()) {
    throw ConfigError("policy and reference differ in size");
  }

  const bool writing = !request.out_dir.empty();
  std::ofstream metrics_out, groups_out;
  if (writing) {
    std::filesystem::create_directories(request.out_dir);
    const std::filesystem::path dir(request.out_dir);
    nlohmann::json cfg = to_json(config);
    cfg["algo"] = to_string(request.algo);
    cfg["env"] = to_string(request.env);
    open_out(dir / "config.json") << cfg.dump(2) << "\n";
    metrics_out = open_out(dir / "metrics.jsonl");
    if (request.algo == Algo::kCoPO) groups_out = open_out(dir / "groups.jsonl");
  }

  RolloutOptions ro;
  ro.env = request.env;
  ro.group_size = config.group_size;
  ro.groups = config.groups_per_rollout;
  ro.temperature = config.rollout_temperature;
  ro.max_response_tokens = config.max_response_tokens;
  ro.history_length = config.history_length;
  ro.task_pool = config.task_pool;

  ExpansionOptions eo;
  eo.temperature = 1.0;
  eo.think_budget = config.max_response_tokens;
  eo.softmax_temperature = config.softmax_temperature;
  eo.guard = config.std_guard;
  eo.metric = config.confidence_metric;

  ObjectiveConfig oc;
  oc.clip_epsilon = config.clip_epsilon;
  oc.kl_beta = config.kl_beta;
  oc.kl_all_tokens = config.kl_all_tokens;

  Adam adam(static_cast<Eigen::Index>(policy.num_parameters()));
  TrainResult result;
  for (int it = 0; it < config.iterations; ++it) {
    const std::uint64_t iter_seed = mix_seed(config.seed, static_cast<std::uint64_t>(it));
    IterationMetrics m;
    m.iteration = it;

    RolloutBatch batch = rollout(policy, ro, iter_seed);
    rollout_statistics(batch, m);
    AdvantageTable table = compute_advantages(
        batch_rewards(batch, request.algo, config.adaptthink_delta), config.std_guard);
    if (request.algo == Algo::kCoPO) {
      expand_cognitive_groups(batch, table, policy, eo, mix_seed(iter_seed, 0xe7a9dULL));
    }

    std::vector<std::pair<int, int>> active;
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
      if (table.skipped[g]) {
        ++m.skipped_groups;
        continue;
      }
      for (std::size_t i = 0; i < batch.groups[g].members.size(); ++i) {
        active.emplace_back(static_cast<int>(g), static_cast<int>(i));
      }
    }
    m.cognitive_groups = static_cast<int>(table.cognitive_groups.size());
    Rng order(mix_seed(iter_seed, 0x5fu));
    order.shuffle(active);

    double loss_sum = 0.0, kl_sum = 0.0;
    std::size_t kl_tokens = 0;
    const auto mb = static_cast<std::size_t>(config.minibatch_size);
    for (std::size_t start = 0; start < active.size(); start += mb) {
      const std::vector<std::pair<int, int>> members(
          active.begin() + static_cast<std::ptrdiff_t>(start),
          active.begin() + static_cast<std::ptrdiff_t>(std::min(active.size(), start + mb)));
      std::vector<TrainingSequence> seqs;
      if (request.algo == Algo::kCoPO) {
        if (config.recompute_confidence) {
          for (auto& cg : table.cognitive_groups) {
            for (const auto& gm : members) {
              if (cg.group == gm.first && cg.member == gm.second) {
                rescore_cognitive_group(batch, cg, policy, eo);
              }
            }
          }
        }
        seqs = copo_sequences(batch, table, members);
      } else {
        seqs = grpo_sequences(batch, table, members);
      }
      ObjectiveResult r = clipped_objective(policy, &reference, seqs, oc);
      if (!std::isfinite(r.loss) || !r.grad.allFinite()) {
        throw DivergenceDetected("non-finite loss at iteration " + std::to_string(it));
      }
      clip_grad_norm(r.grad, config.grad_clip);
      adam.step(policy.parameters(), r.grad, config.learning_rate);
      loss_sum += r.loss;
      kl_sum += r.kl_sum;
      kl_tokens += r.tokens;
      ++m.updates;
    }
    if (m.updates > 0) m.loss = loss_sum / m.updates;
    if (kl_tokens > 0) m.mean_kl = kl_sum / static_cast<double>(kl_tokens);

    if (writing) {
      metrics_out << to_json(m).dump() << "\n" << std::flush;
      for (const auto& cg : table.cognitive_groups) {
        groups_out << cognitive_group_json(it, cg).dump() << "\n";
      }
      groups_out.flush();
    }
    result.metrics.push_back(m);
  }

  if (writing) {
    const std::filesystem::path dir(request.out_dir);
    nlohmann::json summary;
    summary["algo"] = to_string(request.algo);
    summary["env"] = to_string(request.env);
    summary["iterations"] = config.iterations;
    summary["final"] = result.metrics.empty() ? nlohmann::json()
                                              : to_json(result.metrics.back());
    open_out(dir / "summary.json") << summary.dump(2) << "\n";
    save_checkpoint(policy, (dir / "final.ckpt").string());
  }
  return result;
}

}  // namespace copolab
