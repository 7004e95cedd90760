#include "copolab/core.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "copolab/error.hpp"

namespace copolab {

std::optional<CognitiveLevel> level_from_digit(std::string_view token) {
  if (token.size() != 1 || token[0] < '1' || token[0] > '4') {
    return std::nullopt;
  }
  return static_cast<CognitiveLevel>(token[0] - '0');
}

std::string level_digit(CognitiveLevel level) {
  return std::string(1, static_cast<char>('0' + static_cast<int>(level)));
}

StructuredStep make_step(CognitiveLevel level, const TokenSeq& think,
                         const TokenSeq& action) {
  StructuredStep step;
  step.level = level;
  step.think_text = think;
  step.action_text = action;
  auto& raw = step.raw_text;
  raw.reserve(think.size() + action.size() + 7);
  raw.emplace_back(kLevelOpen);
  raw.push_back(level_digit(level));
  raw.emplace_back(kLevelClose);
  raw.emplace_back(kThinkOpen);
  step.think_token_span.begin = raw.size();
  raw.insert(raw.end(), think.begin(), think.end());
  step.think_token_span.end = raw.size();
  raw.emplace_back(kThinkClose);
  raw.emplace_back(kActionOpen);
  step.action_token_span.begin = raw.size();
  raw.insert(raw.end(), action.begin(), action.end());
  step.action_token_span.end = raw.size();
  raw.emplace_back(kActionClose);
  return step;
}

std::string_view to_string(FormatError error) {
  switch (error) {
    case FormatError::kMissingTag: return "MissingTag";
    case FormatError::kTagOrder: return "TagOrder";
    case FormatError::kBadLevel: return "BadLevel";
    case FormatError::kEmptyAction: return "EmptyAction";
    case FormatError::kTrailingContent: return "TrailingContent";
    case FormatError::kL1ThinkMismatch: return "L1ThinkMismatch";
  }
  return "?";
}

namespace {

FormatViolation missing_or_misplaced(const TokenSeq& raw, std::size_t pos) {
  if (pos < raw.size() && is_structural_tag(raw[pos])) {
    return {FormatError::kTagOrder, pos};
  }
  return {FormatError::kMissingTag, pos};
}

// Scans content up to `close`. Any tag-like token before it is a violation.
std::optional<FormatViolation> scan_content(const TokenSeq& raw,
                                            std::size_t& pos,
                                            std::string_view close) {
  while (pos < raw.size() && raw[pos] != close) {
    if (is_tag_like(raw[pos])) return missing_or_misplaced(raw, pos);
    ++pos;
  }
  if (pos >= raw.size()) return FormatViolation{FormatError::kMissingTag, pos};
  return std::nullopt;
}

}  // namespace

ParseResult parse_structured(const TokenSeq& raw, Strictness strictness) {
  std::size_t pos = 0;
  auto expect = [&](std::string_view tag) -> std::optional<FormatViolation> {
    if (pos < raw.size() && raw[pos] == tag) {
      ++pos;
      return std::nullopt;
    }
    return missing_or_misplaced(raw, pos);
  };

  if (auto v = expect(kLevelOpen)) return *v;
  const std::size_t level_pos = pos;
  if (pos >= raw.size()) return FormatViolation{FormatError::kMissingTag, pos};
  std::optional<CognitiveLevel> level;
  if (raw[pos] == kLevelClose) {
    return FormatViolation{FormatError::kBadLevel, level_pos};
  }
  if (is_tag_like(raw[pos])) return missing_or_misplaced(raw, pos);
  level = level_from_digit(raw[pos]);
  if (!level) return FormatViolation{FormatError::kBadLevel, level_pos};
  ++pos;
  if (pos < raw.size() && raw[pos] != kLevelClose && !is_tag_like(raw[pos])) {
    return FormatViolation{FormatError::kBadLevel, level_pos};
  }
  if (auto v = expect(kLevelClose)) return *v;

  if (auto v = expect(kThinkOpen)) return *v;
  const std::size_t think_begin = pos;
  if (auto v = scan_content(raw, pos, kThinkClose)) return *v;
  const std::size_t think_end = pos++;

  if (auto v = expect(kActionOpen)) return *v;
  const std::size_t action_begin = pos;
  if (auto v = scan_content(raw, pos, kActionClose)) return *v;
  const std::size_t action_end = pos++;
  if (action_end == action_begin) {
    return FormatViolation{FormatError::kEmptyAction, action_begin};
  }
  if (pos != raw.size()) {
    return FormatViolation{FormatError::kTrailingContent, pos};
  }

  StructuredStep step;
  step.level = *level;
  step.think_text.assign(raw.begin() + static_cast<std::ptrdiff_t>(think_begin),
                         raw.begin() + static_cast<std::ptrdiff_t>(think_end));
  step.action_text.assign(
      raw.begin() + static_cast<std::ptrdiff_t>(action_begin),
      raw.begin() + static_cast<std::ptrdiff_t>(action_end));
  step.raw_text = raw;
  step.think_token_span = {think_begin, think_end};
  step.action_token_span = {action_begin, action_end};

  if (strictness == Strictness::kSupervised && *level == CognitiveLevel::L1) {
    static const TokenSeq kFixed = lex(kInstinctiveThought);
    if (step.think_text != kFixed) {
      return FormatViolation{FormatError::kL1ThinkMismatch, think_begin};
    }
  }
  return step;
}

ParseResult parse_structured(std::string_view raw, Strictness strictness) {
  return parse_structured(lex(raw), strictness);
}

RewardBreakdown terminal_reward(int task_success, int format_ok) {
  RewardBreakdown r;
  r.task = task_success != 0 ? 1 : 0;
  r.format = format_ok != 0 ? 1 : 0;
  r.total = r.task * r.format;
  return r;
}

std::string_view to_string(EnvId id) {
  return id == EnvId::kGridHouse ? "gridhouse" : "minilab";
}

EnvId env_id_from_string(std::string_view name) {
  if (name == "gridhouse" || name == "GridHouse") return EnvId::kGridHouse;
  if (name == "minilab" || name == "MiniLab") return EnvId::kMiniLab;
  throw ConfigError("unknown environment: " + std::string(name));
}

std::string_view to_string(ComplexityTier tier) {
  switch (tier) {
    case ComplexityTier::kShort: return "short";
    case ComplexityTier::kMedium: return "medium";
    case ComplexityTier::kLong: return "long";
  }
  return "?";
}

ComplexityTier tier_from_string(std::string_view name) {
  if (name == "short") return ComplexityTier::kShort;
  if (name == "medium") return ComplexityTier::kMedium;
  if (name == "long") return ComplexityTier::kLong;
  throw ConfigError("unknown tier: " + std::string(name));
}

std::string_view to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::kSuccess: return "success";
    case TerminationCause::kStepLimit: return "step_limit";
    case TerminationCause::kRunning: return "running";
  }
  return "?";
}

std::size_t Trajectory::response_tokens() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.raw_text.size();
  return n;
}

int validate_trajectory_format(Trajectory& traj) {
  int ok = 1;
  for (const auto& s : traj.steps) {
    if (!parse_structured(s.raw_text, Strictness::kRollout)) {
      ok = 0;
      break;
    }
  }
  traj.reward.format = ok;
  traj.reward.total = traj.reward.task * traj.reward.format;
  return ok;
}

nlohmann::json to_json(const Trajectory& traj) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : traj.steps) {
    nlohmann::json js;
    js["observation"] = s.observation;
    js["raw_text"] = join_tokens(s.raw_text);
    js["level"] = s.parsed ? nlohmann::json(static_cast<int>(s.parsed->level))
                           : nlohmann::json(nullptr);
    js["action"] = s.action;
    steps.push_back(std::move(js));
  }
  nlohmann::json j;
  j["instruction"] = traj.instruction;
  j["steps"] = std::move(steps);
  j["reward"] = {{"task", traj.reward.task},
                 {"format", traj.reward.format},
                 {"total", traj.reward.total}};
  j["env_score"] = traj.env_score;
  j["tier"] = to_string(traj.complexity_tier);
  j["seed"] = traj.seed;
  j["env"] = to_string(traj.env_id);
  j["task_id"] = traj.task_id;
  j["termination_cause"] = to_string(traj.termination_cause);
  return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  t.instruction = j.at("instruction").get<std::string>();
  for (const auto& js : j.at("steps")) {
    TrajectoryStep s;
    s.observation = js.at("observation").get<std::string>();
    s.raw_text = lex(js.at("raw_text").get<std::string>());
    s.action = js.at("action").get<std::string>();
    if (auto parsed = parse_structured(s.raw_text)) {
      s.parsed = std::move(parsed.step());
    }
    t.steps.push_back(std::move(s));
  }
  const auto& r = j.at("reward");
  t.reward.task = r.at("task").get<int>();
  t.reward.format = r.at("format").get<int>();
  t.reward.total = r.at("total").get<int>();
  t.env_score = j.at("env_score").get<double>();
  t.complexity_tier = tier_from_string(j.at("tier").get<std::string>());
  t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("env")) t.env_id = env_id_from_string(j.at("env").get<std::string>());
  if (j.contains("task_id")) t.task_id = j.at("task_id").get<int>();
  if (j.contains("termination_cause")) {
    const auto cause = j.at("termination_cause").get<std::string>();
    t.termination_cause = cause == "success"      ? TerminationCause::kSuccess
                          : cause == "step_limit" ? TerminationCause::kStepLimit
                                                  : TerminationCause::kRunning;
  }
  return t;
}

std::string_view to_string(ConfidenceMetric metric) {
  switch (metric) {
    case ConfidenceMetric::kMeanLogProb: return "MeanLogProb";
    case ConfidenceMetric::kMaxLogProb: return "MaxLogProb";
    case ConfidenceMetric::kMinLogProb: return "MinLogProb";
    case ConfidenceMetric::kNegEntropy: return "NegEntropy";
  }
  return "?";
}

ConfidenceMetric confidence_metric_from_string(std::string_view name) {
  if (name == "MeanLogProb") return ConfidenceMetric::kMeanLogProb;
  if (name == "MaxLogProb") return ConfidenceMetric::kMaxLogProb;
  if (name == "MinLogProb") return ConfidenceMetric::kMinLogProb;
  if (name == "NegEntropy") return ConfidenceMetric::kNegEntropy;
  throw ConfigError("unknown confidence metric: " + std::string(name));
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw ConfigError("clip_epsilon must lie in (0, 1)");
  }
  if (!(softmax_temperature > 0.0)) {
    throw ConfigError("softmax_temperature must be > 0");
  }
  if (!(kl_beta >= 0.0)) throw ConfigError("kl_beta must be >= 0");
  if (groups_per_rollout < 1) throw ConfigError("groups_per_rollout must be >= 1");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (!(std_guard > 0.0)) throw ConfigError("std_guard must be > 0");
  if (max_response_tokens < 8) throw ConfigError("max_response_tokens too small");
  if (history_length < 0) throw ConfigError("history_length must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"group_size", c.group_size},
      {"groups_per_rollout", c.groups_per_rollout},
      {"clip_epsilon", c.clip_epsilon},
      {"kl_beta", c.kl_beta},
      {"softmax_temperature", c.softmax_temperature},
      {"learning_rate", c.learning_rate},
      {"iterations", c.iterations},
      {"seed", c.seed},
      {"confidence_metric", to_string(c.confidence_metric)},
      {"adaptthink_delta", c.adaptthink_delta},
      {"std_guard", c.std_guard},
      {"minibatch_size", c.minibatch_size},
      {"rollout_temperature", c.rollout_temperature},
      {"validation_temperature", c.validation_temperature},
      {"max_response_tokens", c.max_response_tokens},
      {"history_length", c.history_length},
      {"task_pool", c.task_pool},
      {"recompute_confidence", c.recompute_confidence},
      {"kl_all_tokens", c.kl_all_tokens},
      {"grad_clip", c.grad_clip},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (value.is_object() || value.is_array()) {
      throw ConfigError("config must be flat; nested value at " + key);
    }
    if (key == "group_size") c.group_size = value.get<int>();
    else if (key == "groups_per_rollout") c.groups_per_rollout = value.get<int>();
    else if (key == "clip_epsilon") c.clip_epsilon = value.get<double>();
    else if (key == "kl_beta") c.kl_beta = value.get<double>();
    else if (key == "softmax_temperature") c.softmax_temperature = value.get<double>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "iterations") c.iterations = value.get<int>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "confidence_metric") c.confidence_metric = confidence_metric_from_string(value.get<std::string>());
    else if (key == "adaptthink_delta") c.adaptthink_delta = value.get<double>();
    else if (key == "std_guard") c.std_guard = value.get<double>();
    else if (key == "minibatch_size") c.minibatch_size = value.get<int>();
    else if (key == "rollout_temperature") c.rollout_temperature = value.get<double>();
    else if (key == "validation_temperature") c.validation_temperature = value.get<double>();
    else if (key == "max_response_tokens") c.max_response_tokens = value.get<int>();
    else if (key == "history_length") c.history_length = value.get<int>();
    else if (key == "task_pool") c.task_pool = value.get<int>();
    else if (key == "recompute_confidence") c.recompute_confidence = value.get<bool>();
    else if (key == "kl_all_tokens") c.kl_all_tokens = value.get<bool>();
    else if (key == "grad_clip") c.grad_clip = value.get<double>();
    else throw ConfigError("unknown config key: " + key);
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return train_config_from_json(j);
}

}  // namespace copolab
