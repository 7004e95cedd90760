#pragma once

// Cognition-aware supervised fine-tuning: expert trajectories, templated
// thinking at chosen levels, and the masked NLL trainer.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "copolab/core.hpp"
#include "copolab/envs.hpp"
#include "copolab/policy.hpp"

namespace copolab {

struct CosftExample {
  PromptContext ctx;
  StructuredStep target;
  EnvId env_id = EnvId::kGridHouse;
  int task_id = 0;
  int step_index = 0;
};

enum class CosftMode { kBalanced, kExpert, kAdaptThink };
std::string_view to_string(CosftMode mode);
CosftMode cosft_mode_from_string(std::string_view name);

struct DatasetOptions {
  int history_length = 6;
  std::size_t context_length = 512;
};

/// Rolls the scripted expert on `n_episodes` tasks drawn from the suite.
/// Only successful runs are kept.
std::vector<Trajectory> collect_expert_trajectories(EnvId env, int n_episodes,
                                                    std::uint64_t seed);

/// Level source for each step, in trajectory order.
using LevelSource = std::function<CognitiveLevel()>;

/// Uniformly random level per step.
std::vector<CosftExample> build_balanced_dataset(
    const std::vector<Trajectory>& trajs, std::uint64_t seed,
    const Vocabulary& vocab, const DatasetOptions& options = {});
std::vector<CosftExample> build_balanced_dataset(
    const std::vector<Trajectory>& trajs, const LevelSource& levels,
    std::uint64_t seed, const Vocabulary& vocab,
    const DatasetOptions& options = {});

/// Frozen stand-in for an expert choosing levels by situation: L4 at the
/// first step, L3 right after a failed action, L2 when the number of
/// admissible actions changed, L1 otherwise.
CognitiveLevel expert_level(int step_index, const std::string& observation,
                            std::size_t admissible_now,
                            std::size_t admissible_before);

std::vector<CosftExample> build_expert_selected_dataset(
    const std::vector<Trajectory>& trajs, const Vocabulary& vocab,
    const DatasetOptions& options = {});

/// Half the steps think at L4, the other half answer with an empty think
/// block under L1.
std::vector<CosftExample> build_adaptthink_dataset(
    const std::vector<Trajectory>& trajs, std::uint64_t seed,
    const Vocabulary& vocab, const DatasetOptions& options = {});

std::vector<CosftExample> build_dataset(CosftMode mode,
                                        const std::vector<Trajectory>& trajs,
                                        std::uint64_t seed,
                                        const Vocabulary& vocab,
                                        const DatasetOptions& options = {});

/// Fraction of examples at each level.
std::array<double, kNumLevels> level_frequencies(
    const std::vector<CosftExample>& dataset);

struct CosftTrainOptions {
  int epochs = 3;
  double learning_rate = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;
};

struct CosftTrainReport {
  std::vector<double> epoch_loss;  // mean per-token NLL seen during each epoch
  long updates = 0;
};

/// Minimizes the NLL of the target tokens only. Throws DivergenceDetected
/// on a non-finite loss.
CosftTrainReport train_cosft(PolicyModel& model,
                             const std::vector<CosftExample>& dataset,
                             const CosftTrainOptions& options);

/// Line-delimited records {prompt_tokens, target_tokens, level, env_id,
/// task_id, step_index}.
void write_dataset(const std::string& path,
                   const std::vector<CosftExample>& dataset,
                   const Vocabulary& vocab);
std::vector<CosftExample> read_dataset(const std::string& path,
                                       const Vocabulary& vocab);

}  // namespace copolab
