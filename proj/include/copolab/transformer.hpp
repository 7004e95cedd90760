#pragma once

// Decoder-only transformer over a closed vocabulary, in double precision.
//
// All parameters live in one flat vector so that optimizers, checkpoints and
// finite-difference checks see a plain R^n. Gradients come from a hand
// written reverse pass over the cached forward activations.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "copolab/core.hpp"

namespace copolab {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int vocab_size = 0;
  int context_length = 512;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;

  void validate() const;
  std::size_t num_parameters() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Optional structure on top of causal attention.
///
/// Blind span: positions at or after `from` may not attend to tokens inside
/// `hidden`; used to build a model that provably ignores part of its input.
///
/// Packing: several responses that share one prompt can be scored in a
/// single pass. Token i carries `segment[i]` (0 for the shared prompt) and
/// `position[i]`; a token attends only to the prompt and to earlier tokens of
/// its own segment, so every response sees exactly what it would see alone.
struct AttentionMask {
  TokenSpan hidden;
  std::size_t from = 0;
  std::vector<int> segment;   // empty: a single segment
  std::vector<int> position;  // empty: 0, 1, 2, ...
};

class Transformer {
 public:
  struct Activations;

  Transformer() = default;
  explicit Transformer(ModelConfig config);

  /// Small random weights, unit layer-norm gains, zero biases.
  void init_parameters(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  std::size_t num_parameters() const { return theta_.size(); }

  /// Log-softmax rows at the requested positions; row r of the result is the
  /// distribution of tokens[rows[r] + 1] given tokens[0..rows[r]].
  /// Passing `cache` keeps what backward() needs.
  Eigen::MatrixXd forward(std::span<const int> tokens,
                          std::span<const int> rows,
                          Activations* cache = nullptr,
                          const AttentionMask* mask = nullptr) const;

  /// Accumulates into `grad` the gradient of a loss whose derivative with
  /// respect to the returned log-probability rows is `dlogp`.
  void backward(const Activations& cache, const Eigen::MatrixXd& dlogp,
                Eigen::VectorXd& grad) const;

 private:
  friend class IncrementalDecoder;

  ModelConfig config_;
  Eigen::VectorXd theta_;
};

/// Forward activations of one sequence.
struct Transformer::Activations {
  struct Layer {
    Eigen::MatrixXd x_in, xhat1, h1, qkv, attn_out, x_mid, xhat2, h2, u, z;
    Eigen::VectorXd rstd1, rstd2;
    std::vector<RowMatrix> probs;  // one T x T matrix per head
  };
  std::vector<int> tokens;
  std::vector<int> positions;
  std::vector<int> rows;
  std::vector<Layer> layers;
  Eigen::MatrixXd x_final, xhat_f, h_final_rows;
  Eigen::VectorXd rstd_f;
  Eigen::MatrixXd logp;
};

/// Token-at-a-time decoding with cached keys and values.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const Transformer& model);

  /// Appends tokens and returns the next-token log-softmax after the last.
  Eigen::VectorXd feed(std::span<const int> tokens);
  Eigen::VectorXd feed(int token) { return feed(std::span<const int>(&token, 1)); }

  std::size_t length() const { return length_; }
  std::size_t capacity() const;

 private:
  Eigen::VectorXd step(int token);

  const Transformer* model_;
  std::vector<Eigen::MatrixXd> keys_, values_;  // context x d_model per layer
  std::size_t length_ = 0;
};

}  // namespace copolab
