#include "copolab/policy.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "copolab/error.hpp"

namespace copolab {

namespace {

constexpr std::string_view kCheckpointFormat = "copolab-checkpoint";
constexpr int kCheckpointVersion = 1;

void append_words(std::vector<int>& out, const Vocabulary& vocab,
                  std::string_view text) {
  for (const auto& w : lex(text)) out.push_back(vocab.id(w));
}

// Feeds prompt and forced tokens, then samples until `stop` accepts a token.
template <typename StopFn>
SampleResult sample_after(const PolicyModel& model, const PromptContext& ctx,
                          const std::vector<int>& forced, double temperature,
                          int budget, StopFn stop, Rng& rng) {
  if (ctx.tokens.empty()) throw ContextOverflow("empty prompt");
  if (ctx.tokens.size() + forced.size() >= model.context_length()) {
    throw ContextOverflow("prompt does not leave room for a response");
  }
  SampleResult out;
  IncrementalDecoder dec(model.net());
  Eigen::VectorXd logp = dec.feed(ctx.tokens);
  for (int id : forced) {
    out.ids.push_back(id);
    out.tokens.push_back(model.vocab().token(id));
    out.logprobs.push_back(logp[id]);
    out.model_logprobs.push_back(logp[id]);
    logp = dec.feed(id);
  }
  out.forced_tokens = forced.size();
  for (int n = 0;; ++n) {
    if (n >= budget || dec.length() >= dec.capacity()) {
      out.budget_exhausted = true;
      break;
    }
    double lp = 0.0;
    const int id = draw_token(logp, temperature, rng, lp);
    out.ids.push_back(id);
    out.tokens.push_back(model.vocab().token(id));
    out.logprobs.push_back(lp);
    out.model_logprobs.push_back(logp[id]);
    if (stop(id)) break;
    logp = dec.feed(id);
  }
  return out;
}

}  // namespace

int draw_token(const Eigen::VectorXd& logp, double temperature, Rng& rng,
               double& sampled_logprob) {
  Eigen::Index best = 0;
  if (temperature <= 0.0) {
    logp.maxCoeff(&best);
    sampled_logprob = 0.0;
    return static_cast<int>(best);
  }
  const Eigen::VectorXd z = logp / temperature;
  const double m = z.maxCoeff();
  const Eigen::VectorXd e = (z.array() - m).exp();
  const double total = e.sum();
  const double u = rng.uniform() * total;
  double acc = 0.0;
  Eigen::Index pick = e.size() - 1;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    acc += e[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  sampled_logprob = z[pick] - m - std::log(total);
  return static_cast<int>(pick);
}

// ---------------------------------------------------------------------------

std::vector<std::string> prompt_lexicon() {
  return {"task", ":", "obs", "act", "actions", ","};
}

PromptContext render_prompt(const Vocabulary& vocab, std::string_view instruction,
                            std::span<const HistoryEntry> history,
                            std::string_view observation,
                            std::span<const std::string> admissible,
                            int history_length, std::size_t max_tokens,
                            std::size_t reserve) {
  const int colon = vocab.id(":");
  std::vector<int> head{Vocabulary::kBos, vocab.id("task"), colon};
  append_words(head, vocab, instruction);

  std::vector<int> tail{vocab.id("obs"), colon};
  append_words(tail, vocab, observation);
  if (!admissible.empty()) {
    tail.push_back(vocab.id("actions"));
    tail.push_back(colon);
    for (std::size_t i = 0; i < admissible.size(); ++i) {
      if (i > 0) tail.push_back(vocab.id(","));
      append_words(tail, vocab, admissible[i]);
    }
  }

  std::size_t keep = std::min<std::size_t>(
      history.size(), static_cast<std::size_t>(std::max(history_length, 0)));
  std::vector<std::vector<int>> pairs;
  std::size_t pair_total = 0;
  for (std::size_t i = history.size() - keep; i < history.size(); ++i) {
    std::vector<int> p{vocab.id("obs"), colon};
    append_words(p, vocab, history[i].observation);
    p.push_back(vocab.id("act"));
    p.push_back(colon);
    append_words(p, vocab, history[i].action);
    pair_total += p.size();
    pairs.push_back(std::move(p));
  }
  const std::size_t fixed = head.size() + tail.size() + reserve;
  std::size_t first = 0;
  while (first < pairs.size() && fixed + pair_total > max_tokens) {
    pair_total -= pairs[first].size();
    ++first;
  }
  if (fixed + pair_total > max_tokens) {
    throw ContextOverflow("prompt of " + std::to_string(fixed - reserve) +
                          " tokens does not fit");
  }

  PromptContext ctx;
  ctx.tokens = std::move(head);
  for (std::size_t i = first; i < pairs.size(); ++i) {
    ctx.tokens.insert(ctx.tokens.end(), pairs[i].begin(), pairs[i].end());
  }
  ctx.tokens.insert(ctx.tokens.end(), tail.begin(), tail.end());
  ctx.history_kept = pairs.size() - first;
  return ctx;
}

// ---------------------------------------------------------------------------

ModelConfig default_model_config(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = static_cast<int>(vocab_size);
  return c;
}

PolicyModel::PolicyModel(std::shared_ptr<const Vocabulary> vocab,
                         ModelConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), rng_seed_(seed) {
  config.vocab_size = static_cast<int>(vocab_->size());
  net_ = Transformer(config);
  net_.init_parameters(seed);
}

PromptContext step_prompt(const PolicyModel& model, std::string_view instruction,
                          std::span<const HistoryEntry> history,
                          std::string_view observation,
                          std::span<const std::string> admissible,
                          int history_length) {
  return render_prompt(model.vocab(), instruction, history, observation,
                       admissible, history_length, model.context_length(),
                       kResponseReserve);
}

// ---------------------------------------------------------------------------

std::vector<int> forced_level_prefix(const Vocabulary& vocab,
                                     CognitiveLevel level) {
  return {vocab.id(kLevelOpen), vocab.id(level_digit(level)),
          vocab.id(kLevelClose), vocab.id(kThinkOpen)};
}

SampleResult sample_step(const PolicyModel& model, const PromptContext& ctx,
                         const SampleOptions& options, Rng& rng) {
  const int close = model.vocab().id(kActionClose);
  std::vector<int> forced;
  if (options.forced_level) {
    forced = forced_level_prefix(model.vocab(), *options.forced_level);
  }
  return sample_after(model, ctx, forced, options.temperature, options.budget,
                      [close](int id) { return id == close; }, rng);
}

SampleResult sample_think(const PolicyModel& model, const PromptContext& ctx,
                          CognitiveLevel level, double temperature, int budget,
                          Rng& rng) {
  const Vocabulary& vocab = model.vocab();
  std::vector<bool> tag(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    tag[i] = is_tag_like(vocab.token(static_cast<int>(i)));
  }
  return sample_after(model, ctx, forced_level_prefix(vocab, level), temperature,
                      budget, [&tag](int id) { return tag[id]; }, rng);
}

// ---------------------------------------------------------------------------

ScoredResponse score_response(const PolicyModel& model,
                              std::span<const int> prompt,
                              std::span<const int> response,
                              const AttentionMask* mask) {
  ScoredResponse out;
  if (response.empty()) return out;
  std::vector<int> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), response.begin(), response.end());
  std::vector<int> rows(response.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = static_cast<int>(prompt.size() + i) - 1;
  }
  if (prompt.empty()) throw ContextOverflow("scoring needs a non-empty prompt");
  out.logp_rows = model.net().forward(seq, rows, nullptr, mask);
  out.logprobs.resize(response.size());
  for (std::size_t i = 0; i < response.size(); ++i) {
    out.logprobs[i] = out.logp_rows(static_cast<Eigen::Index>(i), response[i]);
  }
  return out;
}

std::vector<double> action_logprobs(const PolicyModel& model,
                                    const PromptContext& ctx,
                                    const StructuredStep& step,
                                    bool blind_think) {
  if (step.action_token_span.empty()) {
    throw EmptyAction("step has no action tokens");
  }
  const std::vector<int> response = model.vocab().encode(step.raw_text);
  AttentionMask mask;
  if (blind_think) {
    mask.hidden = {ctx.tokens.size() + step.think_token_span.begin,
                   ctx.tokens.size() + step.think_token_span.end};
    mask.from = mask.hidden.end;
  }
  const ScoredResponse scored =
      score_response(model, ctx.tokens, response, blind_think ? &mask : nullptr);
  return {scored.logprobs.begin() + step.action_token_span.begin,
          scored.logprobs.begin() + step.action_token_span.end};
}

// ---------------------------------------------------------------------------

LossAndGrad nll_loss(const PolicyModel& model,
                     std::span<const SupervisedExample> batch, bool with_grad) {
  LossAndGrad out;
  for (const auto& ex : batch) out.tokens += ex.target.size();
  if (with_grad) out.grad = Eigen::VectorXd::Zero(model.num_parameters());
  if (out.tokens == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.tokens);
  for (const auto& ex : batch) {
    if (ex.target.empty()) continue;
    if (ex.prompt.empty()) throw ContextOverflow("example without a prompt");
    std::vector<int> seq = ex.prompt;
    seq.insert(seq.end(), ex.target.begin(), ex.target.end());
    std::vector<int> rows(ex.target.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rows[i] = static_cast<int>(ex.prompt.size() + i) - 1;
    }
    Transformer::Activations acts;
    const Eigen::MatrixXd logp =
        model.net().forward(seq, rows, with_grad ? &acts : nullptr);
    Eigen::MatrixXd dlogp;
    if (with_grad) dlogp = Eigen::MatrixXd::Zero(logp.rows(), logp.cols());
    for (std::size_t i = 0; i < ex.target.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out.loss -= logp(r, ex.target[i]) * inv;
      if (with_grad) dlogp(r, ex.target[i]) = -inv;
    }
    if (with_grad) model.net().backward(acts, dlogp, out.grad);
  }
  return out;
}

Eigen::VectorXd categorical_kl(const Eigen::MatrixXd& logp,
                               const Eigen::MatrixXd& logq) {
  return (logp.array().exp() * (logp - logq).array()).rowwise().sum();
}

Eigen::MatrixXd categorical_kl_grad(const Eigen::MatrixXd& logp,
                                    const Eigen::MatrixXd& logq) {
  // d/dlogp_v of sum_v p_v (logp_v - logq_v) with p = exp(logp).
  return (logp.array().exp() * ((logp - logq).array() + 1.0)).matrix();
}

double token_kl(const PolicyModel& model, const PolicyModel& ref,
                std::span<const int> prompt, std::span<const int> response) {
  if (response.empty()) return 0.0;
  const ScoredResponse a = score_response(model, prompt, response);
  const ScoredResponse b = score_response(ref, prompt, response);
  return categorical_kl(a.logp_rows, b.logp_rows).mean();
}

// ---------------------------------------------------------------------------

void save_checkpoint(const PolicyModel& model, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoints are written in little-endian order");
  nlohmann::json header = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"model", to_json(model.net().config())},
      {"vocab_hash", hash_hex(model.vocab().hash())},
      {"vocab_size", model.vocab().size()},
      {"num_parameters", model.num_parameters()},
      {"rng_seed", model.rng_seed()},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << header.dump() << '\n';
  const auto& theta = model.parameters();
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

PolicyModel load_checkpoint(const std::string& path,
                            std::shared_ptr<const Vocabulary> vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line)) throw CheckpointError("empty checkpoint " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("checkpoint header is not JSON: " + path);
  }
  if (header.value("format", "") != kCheckpointFormat ||
      header.value("version", 0) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format: " + path);
  }
  if (header.at("vocab_hash").get<std::string>() != hash_hex(vocab->hash())) {
    throw CheckpointError("checkpoint vocabulary does not match: " + path);
  }
  ModelConfig config;
  try {
    config = model_config_from_json(header.at("model"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad architecture: ") + e.what());
  }
  PolicyModel model(std::move(vocab), config, header.at("rng_seed").get<std::uint64_t>());
  auto& theta = model.parameters();
  if (header.at("num_parameters").get<std::size_t>() !=
      static_cast<std::size_t>(theta.size())) {
    throw CheckpointError("parameter count does not match architecture");
  }
  in.read(reinterpret_cast<char*>(theta.data()),
          static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(theta.size() * sizeof(double)) ||
      in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("checkpoint payload has the wrong size: " + path);
  }
  return model;
}

}  // namespace copolab
