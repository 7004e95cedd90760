#pragma once

// The policy: vocabulary + transformer, prompt rendering, sampling of
// structured steps, teacher-forced scoring, and the supervised/KL losses.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "copolab/core.hpp"
#include "copolab/random.hpp"
#include "copolab/transformer.hpp"
#include "copolab/vocabulary.hpp"

namespace copolab {

// ---------------------------------------------------------------------------
// Prompts

struct HistoryEntry {
  std::string observation;
  std::string action;
};

/// Rendered prompt tokens. The response starts right after the last token.
struct PromptContext {
  std::vector<int> tokens;
  std::size_t history_kept = 0;  // history pairs that fit
};

/// Fixed words of the prompt layout.
std::vector<std::string> prompt_lexicon();

/// Renders
///   <bos> task : X obs : o act : a ... obs : o_t [actions : a1 , a2 ...]
/// keeping at most `history_length` of the most recent pairs and dropping
/// older ones until the prompt plus `reserve` tokens fit in `max_tokens`.
/// `admissible` is listed only when non-empty.
PromptContext render_prompt(const Vocabulary& vocab, std::string_view instruction,
                            std::span<const HistoryEntry> history,
                            std::string_view observation,
                            std::span<const std::string> admissible,
                            int history_length, std::size_t max_tokens,
                            std::size_t reserve);

/// Tokens kept free after the prompt for the response.
inline constexpr std::size_t kResponseReserve = 96;

// ---------------------------------------------------------------------------
// Model

/// Width 64, 2 layers, 4 heads, feed-forward 256, context 512.
ModelConfig default_model_config(std::size_t vocab_size);

class PolicyModel {
 public:
  /// Randomly initialized from `seed`. `config.vocab_size` is overwritten by
  /// the vocabulary size.
  PolicyModel(std::shared_ptr<const Vocabulary> vocab, ModelConfig config,
              std::uint64_t seed);

  const Vocabulary& vocab() const { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocab_ptr() const { return vocab_; }
  Transformer& net() { return net_; }
  const Transformer& net() const { return net_; }
  Eigen::VectorXd& parameters() { return net_.parameters(); }
  const Eigen::VectorXd& parameters() const { return net_.parameters(); }
  std::size_t num_parameters() const { return net_.num_parameters(); }
  std::size_t context_length() const {
    return static_cast<std::size_t>(net_.config().context_length);
  }
  std::uint64_t rng_seed() const { return rng_seed_; }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  Transformer net_;
  std::uint64_t rng_seed_ = 0;
};

/// Prompt of the current step of an episode, sized for `model`.
PromptContext step_prompt(const PolicyModel& model, std::string_view instruction,
                          std::span<const HistoryEntry> history,
                          std::string_view observation,
                          std::span<const std::string> admissible,
                          int history_length);

// ---------------------------------------------------------------------------
// Sampling

struct SampleOptions {
  double temperature = 1.0;  // 0 selects the argmax
  std::optional<CognitiveLevel> forced_level;
  int budget = 1024;  // generated tokens, forced prefix excluded
};

struct SampleResult {
  std::vector<int> ids;  // forced prefix followed by generated tokens
  TokenSeq tokens;
  /// Log-probability of each token under the sampling distribution; forced
  /// tokens carry their temperature-1 model log-probability.
  std::vector<double> logprobs;
  /// Temperature-1 model log-probability of every token.
  std::vector<double> model_logprobs;
  std::size_t forced_tokens = 0;
  bool budget_exhausted = false;  // no closing tag within the budget
};

/// Draws one token from a log-distribution at `temperature` (0: argmax) and
/// reports its log-probability under the tempered distribution.
int draw_token(const Eigen::VectorXd& logp, double temperature, Rng& rng,
               double& sampled_logprob);

/// Token ids of `<level> K </level> <think>`.
std::vector<int> forced_level_prefix(const Vocabulary& vocab, CognitiveLevel level);

/// Samples one structured step until `</action>`.
SampleResult sample_step(const PolicyModel& model, const PromptContext& ctx,
                         const SampleOptions& options, Rng& rng);

/// Samples after `ctx` (plus the forced prefix, if any) until a think
/// block closes or any other tag-like token is drawn. Used to regenerate the
/// thinking of a step under a chosen level.
SampleResult sample_think(const PolicyModel& model, const PromptContext& ctx,
                          CognitiveLevel level, double temperature, int budget,
                          Rng& rng);

// ---------------------------------------------------------------------------
// Scoring

struct ScoredResponse {
  std::vector<double> logprobs;  // one per response token
  Eigen::MatrixXd logp_rows;     // full log-distribution per response token
};

/// Teacher-forced scores of `response` following `prompt`.
ScoredResponse score_response(const PolicyModel& model,
                              std::span<const int> prompt,
                              std::span<const int> response,
                              const AttentionMask* mask = nullptr);

/// Log-probabilities of the action tokens of `step` after `ctx`. With
/// `blind_think` the model cannot attend to the think span.
std::vector<double> action_logprobs(const PolicyModel& model,
                                    const PromptContext& ctx,
                                    const StructuredStep& step,
                                    bool blind_think = false);

// ---------------------------------------------------------------------------
// Losses

struct SupervisedExample {
  std::vector<int> prompt;
  std::vector<int> target;
};

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::size_t tokens = 0;
};

/// Mean negative log-likelihood over all target tokens of the batch.
LossAndGrad nll_loss(const PolicyModel& model,
                     std::span<const SupervisedExample> batch,
                     bool with_grad = true);

/// Per-row KL(p || q) of two log-distribution matrices.
Eigen::VectorXd categorical_kl(const Eigen::MatrixXd& logp,
                               const Eigen::MatrixXd& logq);
/// Derivative of the summed row KLs with respect to logp.
Eigen::MatrixXd categorical_kl_grad(const Eigen::MatrixXd& logp,
                                    const Eigen::MatrixXd& logq);

/// Mean over response positions of KL(model || ref) of the next-token
/// distributions.
double token_kl(const PolicyModel& model, const PolicyModel& ref,
                std::span<const int> prompt, std::span<const int> response);

// ---------------------------------------------------------------------------
// Checkpoints

/// One JSON header line (architecture, vocabulary hash, sizes) followed by
/// the raw little-endian parameter doubles.
void save_checkpoint(const PolicyModel& model, const std::string& path);
/// Throws CheckpointError when the file is malformed or was written for a
/// different vocabulary.
PolicyModel load_checkpoint(const std::string& path,
                            std::shared_ptr<const Vocabulary> vocab);

}  // namespace copolab
