#include "copolab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "copolab/error.hpp"

namespace copolab {

// ---------------------------------------------------------------------------
// Agents

namespace {

class OracleAgent : public Agent {
 public:
  AgentStep act(const AgentView& view, Rng&) override {
    return {view.env->oracle_action(), {}, std::nullopt, true};
  }
  std::string name() const override { return "oracle"; }
};

class RandomAgent : public Agent {
 public:
  AgentStep act(const AgentView& view, Rng& rng) override {
    if (view.admissible.empty()) return {};
    return {view.admissible[rng.index(view.admissible.size())], {}, std::nullopt, true};
  }
  std::string name() const override { return "random"; }
};

class PolicyAgent : public Agent {
 public:
  PolicyAgent(const PolicyModel& policy, double temperature, int history_length,
              int max_response_tokens)
      : policy_(policy),
        temperature_(temperature),
        history_length_(history_length),
        budget_(max_response_tokens) {}

  AgentStep act(const AgentView& view, Rng& rng) override {
    const std::vector<std::string> listed =
        view.env->lists_actions() ? view.admissible : std::vector<std::string>{};
    const PromptContext ctx = step_prompt(policy_, view.instruction, view.history,
                                          view.observation, listed, history_length_);
    SampleOptions options;
    options.temperature = temperature_;
    options.budget = budget_;
    SampleResult s = sample_step(policy_, ctx, options, rng);
    AgentStep out;
    out.raw_text = std::move(s.tokens);
    if (ParseResult parsed = parse_structured(out.raw_text)) {
      out.action = parsed.step().action_string();
      out.level = parsed.step().level;
    } else {
      out.well_formed = false;
    }
    return out;
  }
  std::string name() const override { return "policy"; }

 private:
  const PolicyModel& policy_;
  double temperature_;
  int history_length_;
  int budget_;
};

}  // namespace

std::unique_ptr<Agent> make_oracle_agent() { return std::make_unique<OracleAgent>(); }
std::unique_ptr<Agent> make_random_agent() { return std::make_unique<RandomAgent>(); }
std::unique_ptr<Agent> make_policy_agent(const PolicyModel& policy,
                                         double temperature, int history_length,
                                         int max_response_tokens) {
  return std::make_unique<PolicyAgent>(policy, temperature, history_length,
                                       max_response_tokens);
}

// ---------------------------------------------------------------------------
// Reports

void aggregate(EvalReport& r) {
  r.empty = r.episodes.empty();
  r.success_rate = r.mean_score = r.mean_tokens = 0.0;
  r.level_histogram.fill(0.0);
  r.by_category.clear();
  if (r.empty) return;
  double leveled = 0.0;
  std::map<std::string, std::array<double, 4>> sums;  // episodes, success, score, tokens
  for (const auto& e : r.episodes) {
    r.success_rate += e.success ? 1.0 : 0.0;
    r.mean_score += e.score;
    r.mean_tokens += static_cast<double>(e.tokens);
    for (int l : e.levels) {
      if (l < 1 || l > 4) continue;
      r.level_histogram[static_cast<std::size_t>(l - 1)] += 1.0;
      leveled += 1.0;
    }
    auto& s = sums[e.category];
    s[0] += 1.0;
    s[1] += e.success ? 1.0 : 0.0;
    s[2] += e.score;
    s[3] += static_cast<double>(e.tokens);
  }
  const auto n = static_cast<double>(r.episodes.size());
  r.success_rate /= n;
  r.mean_score /= n;
  r.mean_tokens /= n;
  if (leveled > 0) {
    for (auto& h : r.level_histogram) h /= leveled;
  }
  for (const auto& [cat, s] : sums) {
    r.by_category[cat] = {static_cast<int>(s[0]), s[1] / s[0], s[2] / s[0], s[3] / s[0]};
  }
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : r.episodes) {
    rows.push_back({{"episode", e.episode},
                    {"task_id", e.task_id},
                    {"env_seed", e.env_seed},
                    {"category", e.category},
                    {"tier", to_string(e.tier)},
                    {"success", e.success},
                    {"score", e.score},
                    {"steps", e.steps},
                    {"tokens", e.tokens},
                    {"levels", e.levels},
                    {"error", e.error}});
  }
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [cat, s] : r.by_category) {
    cats[cat] = {{"episodes", s.episodes},
                 {"success_rate", s.success_rate},
                 {"mean_score", s.mean_score},
                 {"mean_tokens", s.mean_tokens}};
  }
  return {{"env", to_string(r.env_id)},
          {"agent", r.agent},
          {"temperature", r.temperature},
          {"seed", r.seed},
          {"empty", r.empty},
          {"success_rate", r.success_rate},
          {"mean_score", r.mean_score},
          {"mean_tokens", r.mean_tokens},
          {"level_histogram", r.level_histogram},
          {"by_category", cats},
          {"episodes", rows}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.env_id = env_id_from_string(j.at("env").get<std::string>());
  r.agent = j.at("agent").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& row : j.at("episodes")) {
    EpisodeResult e;
    e.episode = row.at("episode").get<int>();
    e.task_id = row.at("task_id").get<int>();
    e.env_seed = row.at("env_seed").get<std::uint64_t>();
    e.category = row.at("category").get<std::string>();
    e.tier = tier_from_string(row.at("tier").get<std::string>());
    e.success = row.at("success").get<bool>();
    e.score = row.at("score").get<double>();
    e.steps = row.at("steps").get<int>();
    e.tokens = row.at("tokens").get<std::size_t>();
    e.levels = row.at("levels").get<std::vector<int>>();
    e.error = row.at("error").get<std::string>();
    r.episodes.push_back(std::move(e));
  }
  aggregate(r);
  return r;
}

EvalReport evaluate(Agent& agent, const EvalOptions& options) {
  if (options.n_episodes < 0) throw ConfigError("n_episodes must be >= 0");
  EvalReport report;
  report.env_id = options.env;
  report.agent = agent.name();
  report.seed = options.seed;
  const int pool = options.task_pool > 0
                       ? std::min(options.task_pool, num_tasks(options.env))
                       : num_tasks(options.env);
  for (int ep = 0; ep < options.n_episodes; ++ep) {
    const std::uint64_t ep_seed = mix_seed(options.seed, static_cast<std::uint64_t>(ep));
    Rng pick(ep_seed);
    EpisodeResult row;
    row.episode = ep;
    row.task_id = static_cast<int>(pick.index(static_cast<std::size_t>(pool)));
    row.env_seed = pick.next();
    const EnvSpec spec = make_spec(options.env, row.task_id, row.env_seed);
    row.tier = spec.complexity_tier;
    Rng rng(mix_seed(ep_seed, 1));
    auto env = make_env(options.env);
    bool well_formed = true;
    try {
      const ResetResult reset = env->reset(spec);
      row.category = env->category();
      AgentView view;
      view.env = env.get();
      view.instruction = reset.instruction;
      view.observation = reset.observation;
      while (!env->done()) {
        view.admissible = env->admissible_actions();
        AgentStep step = agent.act(view, rng);
        row.tokens += step.raw_text.size();
        row.levels.push_back(step.level ? static_cast<int>(*step.level) : 0);
        well_formed = well_formed && step.well_formed;
        const StepOutcome out = env->step(step.action);
        view.history.push_back({view.observation, step.action});
        view.observation = out.observation;
        ++row.steps;
      }
      row.success = env->success() && well_formed;
      row.score = env->score();
    } catch (const Error& e) {
      row.error = e.what();
      row.success = false;
    }
    report.episodes.push_back(std::move(row));
  }
  aggregate(report);
  return report;
}

EvalReport evaluate(const PolicyModel& policy, const EvalOptions& options,
                    double temperature, int history_length,
                    int max_response_tokens) {
  auto agent = make_policy_agent(policy, temperature, history_length, max_response_tokens);
  EvalReport r = evaluate(*agent, options);
  r.temperature = temperature;
  return r;
}

// ---------------------------------------------------------------------------
// Level usage

int progress_bin(std::size_t t, std::size_t T) {
  if (T == 0) return 0;
  const auto bin = static_cast<int>((kProgressBins * t) / T);
  return std::min(bin, kProgressBins - 1);
}

namespace {

int tier_slot(ComplexityTier tier) { return static_cast<int>(tier); }

void normalize(std::array<double, kNumLevels>& v, bool& empty) {
  double total = 0.0;
  for (double x : v) total += x;
  empty = total == 0.0;
  if (!empty) {
    for (double& x : v) x /= total;
  }
}

}  // namespace

DistributionProfile level_distribution(const std::vector<LevelTrace>& traces) {
  DistributionProfile p;
  for (const auto& tr : traces) {
    const std::size_t T = tr.levels.size();
    for (std::size_t t = 0; t < T; ++t) {
      const int l = tr.levels[t];
      if (l < 1 || l > 4) continue;
      p.progress[static_cast<std::size_t>(progress_bin(t, T))][static_cast<std::size_t>(l - 1)] += 1.0;
      p.tiers[static_cast<std::size_t>(tier_slot(tr.tier))][static_cast<std::size_t>(l - 1)] += 1.0;
    }
  }
  for (int b = 0; b < kProgressBins; ++b) normalize(p.progress[b], p.progress_empty[b]);
  for (int s = 0; s < 3; ++s) normalize(p.tiers[s], p.tier_empty[s]);
  return p;
}

std::vector<LevelTrace> level_traces(const EvalReport& report) {
  std::vector<LevelTrace> out;
  for (const auto& e : report.episodes) out.push_back({e.tier, e.levels});
  return out;
}

// ---------------------------------------------------------------------------
// Comparison and plot data

nlohmann::json compare_runs(const EvalReport& a, const EvalReport& b) {
  bool same = a.env_id == b.env_id && a.episodes.size() == b.episodes.size();
  for (std::size_t i = 0; same && i < a.episodes.size(); ++i) {
    same = a.episodes[i].task_id == b.episodes[i].task_id &&
           a.episodes[i].env_seed == b.episodes[i].env_seed;
  }
  if (!same) throw SuiteMismatch("reports were produced on different episodes");
  nlohmann::json level_delta = nlohmann::json::array();
  for (std::size_t k = 0; k < kNumLevels; ++k) {
    level_delta.push_back(a.level_histogram[k] - b.level_histogram[k]);
  }
  const double reduction =
      b.mean_tokens > 0.0 ? 1.0 - a.mean_tokens / b.mean_tokens : 0.0;
  return {{"env", to_string(a.env_id)},
          {"episodes", a.episodes.size()},
          {"success_rate", {{"a", a.success_rate}, {"b", b.success_rate}}},
          {"mean_score", {{"a", a.mean_score}, {"b", b.mean_score}}},
          {"mean_tokens", {{"a", a.mean_tokens}, {"b", b.mean_tokens}}},
          {"deltas",
           {{"success_rate", a.success_rate - b.success_rate},
            {"mean_score", a.mean_score - b.mean_score},
            {"mean_tokens", a.mean_tokens - b.mean_tokens},
            {"level_histogram", level_delta}}},
          {"token_reduction", reduction}};
}

namespace {

std::ofstream open_csv(const std::string& dir, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  return out;
}

void write_levels(std::ofstream& out, const std::array<double, kNumLevels>& v, bool empty) {
  for (double x : v) {
    out << ',';
    if (!empty) out << x;
  }
  out << '\n';
}

}  // namespace

void emit_training_curve(const std::vector<IterationMetrics>& metrics,
                         const std::string& out_dir) {
  auto out = open_csv(out_dir, "training_curve.csv");
  out << "iteration,success_rate,mean_tokens,mean_kl,loss,L1,L2,L3,L4\n";
  for (const auto& m : metrics) {
    out << m.iteration << ',' << m.success_rate << ',' << m.mean_tokens << ','
        << m.mean_kl << ',' << m.loss;
    write_levels(out, m.level_histogram, false);
  }
  if (!out) throw IoError("write failed: training_curve.csv");
}

void emit_profile(const DistributionProfile& profile, const std::string& out_dir) {
  auto bins = open_csv(out_dir, "progress_bins.csv");
  bins << "bin,L1,L2,L3,L4\n";
  for (int b = 0; b < kProgressBins; ++b) {
    bins << b;
    write_levels(bins, profile.progress[b], profile.progress_empty[b]);
  }
  auto tiers = open_csv(out_dir, "tier_bins.csv");
  tiers << "tier,L1,L2,L3,L4\n";
  for (int s = 0; s < 3; ++s) {
    tiers << to_string(static_cast<ComplexityTier>(s));
    write_levels(tiers, profile.tiers[s], profile.tier_empty[s]);
  }
  if (!bins || !tiers) throw IoError("write failed: profile tables");
}

void emit_level_histogram(const std::array<double, kNumLevels>& histogram,
                          const std::string& out_dir) {
  auto out = open_csv(out_dir, "level_histogram.csv");
  out << "level,share\n";
  for (std::size_t k = 0; k < kNumLevels; ++k) {
    out << 'L' << (k + 1) << ',' << histogram[k] << '\n';
  }
  if (!out) throw IoError("write failed: level_histogram.csv");
}

std::vector<IterationMetrics> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<IterationMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(iteration_metrics_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace copolab
