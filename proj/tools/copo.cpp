// Command-line front end: environments, supervised warm-up, RL training,
// evaluation and analysis.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "copolab/copo.hpp"
#include "copolab/cosft.hpp"
#include "copolab/error.hpp"
#include "copolab/harness.hpp"

namespace fs = std::filesystem;
using namespace copolab;

namespace {

std::shared_ptr<const Vocabulary> vocabulary() {
  static const auto v = std::make_shared<const Vocabulary>(Vocabulary::standard());
  return v;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

int cmd_envs(const std::string& env_name, std::uint64_t seed, const std::string& json_out) {
  const EnvId env = env_id_from_string(env_name);
  nlohmann::json doc = nlohmann::json::array();
  std::cout << "task_id\tcategory\ttier\toracle_len\tinstruction\n";
  for (const auto& e : task_catalogue(env, seed)) {
    std::cout << e.task_id << '\t' << e.category << '\t' << to_string(e.tier) << '\t'
              << e.oracle_len << '\t' << e.instruction << '\n';
    doc.push_back({{"env", to_string(e.env_id)},
                   {"task_id", e.task_id},
                   {"category", e.category},
                   {"tier", to_string(e.tier)},
                   {"oracle_len", e.oracle_len},
                   {"instruction", e.instruction}});
  }
  if (!json_out.empty()) write_json(json_out, doc);
  return 0;
}

struct CosftArgs {
  std::string env = "gridhouse";
  std::string mode = "balanced";
  int episodes = 500;
  int epochs = 3;
  double lr = 1e-3;
  int batch = 16;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::string out = "cosft_run";
};

int cmd_cosft(const CosftArgs& a) {
  const EnvId env = env_id_from_string(a.env);
  const auto vocab = vocabulary();
  PolicyModel model = a.checkpoint.empty()
                          ? PolicyModel(vocab, default_model_config(vocab->size()), a.seed)
                          : load_checkpoint(a.checkpoint, vocab);
  const auto trajs = collect_expert_trajectories(env, a.episodes, a.seed);
  DatasetOptions dopt;
  dopt.context_length = model.context_length();
  const auto dataset =
      build_dataset(cosft_mode_from_string(a.mode), trajs, a.seed, *vocab, dopt);
  fs::create_directories(a.out);
  write_dataset((fs::path(a.out) / "dataset.jsonl").string(), dataset, *vocab);

  CosftTrainOptions topt;
  topt.epochs = a.epochs;
  topt.learning_rate = a.lr;
  topt.batch_size = a.batch;
  topt.seed = a.seed;
  const CosftTrainReport report = train_cosft(model, dataset, topt);
  save_checkpoint(model, (fs::path(a.out) / "cosft.ckpt").string());
  write_json(fs::path(a.out) / "report.json",
             {{"env", a.env},
              {"mode", a.mode},
              {"trajectories", trajs.size()},
              {"examples", dataset.size()},
              {"level_frequencies", level_frequencies(dataset)},
              {"epoch_loss", report.epoch_loss},
              {"updates", report.updates}});
  std::cout << "examples " << dataset.size() << ", final loss "
            << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()) << "\n";
  return 0;
}

struct TrainArgs {
  std::string algo = "copo";
  std::string env = "gridhouse";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string reference;
  std::string out = "train_run";
};

int cmd_train(const TrainArgs& a) {
  TrainRequest req;
  if (!a.config.empty()) req.config = load_train_config(a.config);
  if (a.seed) req.config.seed = *a.seed;
  req.algo = algo_from_string(a.algo);
  req.env = env_id_from_string(a.env);
  req.out_dir = a.out;
  const auto vocab = vocabulary();
  if (a.checkpoint.empty()) throw ConfigError("train needs --checkpoint");
  PolicyModel policy = load_checkpoint(a.checkpoint, vocab);
  const PolicyModel reference =
      a.reference.empty() ? policy : load_checkpoint(a.reference, vocab);
  const TrainResult result = train(policy, reference, req);
  if (!result.metrics.empty()) {
    const auto& m = result.metrics.back();
    std::cout << "iteration " << m.iteration << ": success " << m.success_rate
              << ", tokens " << m.mean_tokens << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string env = "gridhouse";
  std::string agent = "policy";
  int n = 100;
  std::uint64_t seed = 0;
  double temperature = 0.4;
  int history_length = 6;
  int max_response_tokens = 1024;
  int task_pool = 0;
  std::string out = "eval.json";
};

int cmd_eval(const EvalArgs& a) {
  EvalOptions opt;
  opt.env = env_id_from_string(a.env);
  opt.n_episodes = a.n;
  opt.seed = a.seed;
  opt.task_pool = a.task_pool;
  EvalReport report;
  if (a.agent == "policy") {
    if (a.checkpoint.empty()) throw ConfigError("the policy agent needs --checkpoint");
    const PolicyModel policy = load_checkpoint(a.checkpoint, vocabulary());
    report = evaluate(policy, opt, a.temperature, a.history_length, a.max_response_tokens);
  } else if (a.agent == "oracle") {
    report = evaluate(*make_oracle_agent(), opt);
  } else if (a.agent == "random") {
    report = evaluate(*make_random_agent(), opt);
  } else {
    throw ConfigError("unknown agent: " + a.agent);
  }
  write_json(a.out, to_json(report));
  std::cout << "success " << report.success_rate << ", score " << report.mean_score
            << ", tokens " << report.mean_tokens << "\n";
  return 0;
}

int cmd_analyze(const std::string& in, const std::string& out) {
  const fs::path dir(in);
  bool any = false;
  if (fs::exists(dir / "metrics.jsonl")) {
    const auto metrics = read_metrics((dir / "metrics.jsonl").string());
    emit_training_curve(metrics, out);
    if (!metrics.empty()) emit_level_histogram(metrics.back().level_histogram, out);
    any = true;
  }
  if (fs::exists(dir / "eval.json")) {
    const EvalReport report = eval_report_from_json(read_json(dir / "eval.json"));
    emit_profile(level_distribution(level_traces(report)), out);
    emit_level_histogram(report.level_histogram, out);
    any = true;
  }
  if (!any) throw IoError("no metrics.jsonl or eval.json in " + in);
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
  const nlohmann::json cmp = compare_runs(eval_report_from_json(read_json(a)),
                                          eval_report_from_json(read_json(b)));
  if (!out.empty()) write_json(out, cmp);
  std::cout << cmp.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cognition-aware policy optimization toolkit"};
  app.require_subcommand(1);
  std::string checkpoint;

  auto* envs = app.add_subcommand("envs", "list the task suites");
  auto* envs_list = envs->add_subcommand("list", "print the task catalogue");
  envs->require_subcommand(1);
  std::string envs_env = "gridhouse";
  std::uint64_t envs_seed = 0;
  envs_list->add_option("--env", envs_env, "gridhouse or minilab");
  envs_list->add_option("--seed", envs_seed, "catalogue seed");
  std::string envs_json;
  envs_list->add_option("--json", envs_json, "also write the catalogue as JSON");
  envs_list->add_option("--checkpoint", checkpoint, "ignored");

  CosftArgs ca;
  auto* cosft = app.add_subcommand("cosft", "supervised warm-up on oracle trajectories");
  cosft->add_option("--env", ca.env);
  cosft->add_option("--mode", ca.mode, "balanced, expert or adaptthink");
  cosft->add_option("--n,--episodes", ca.episodes, "oracle episodes to collect");
  cosft->add_option("--epochs", ca.epochs);
  cosft->add_option("--lr", ca.lr);
  cosft->add_option("--batch", ca.batch);
  cosft->add_option("--seed", ca.seed);
  cosft->add_option("--checkpoint", ca.checkpoint, "start from this model");
  cosft->add_option("--out", ca.out);

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "reinforcement learning from a checkpoint");
  trn->add_option("--algo", ta.algo, "copo, grpo or adaptthink");
  trn->add_option("--env", ta.env);
  trn->add_option("--config", ta.config, "flat JSON document of training settings");
  trn->add_option("--seed", ta.seed);
  trn->add_option("--checkpoint", ta.checkpoint, "initial policy")->required();
  trn->add_option("--reference", ta.reference, "KL anchor; defaults to --checkpoint");
  trn->add_option("--out", ta.out);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate an agent");
  ev->add_option("--checkpoint", ea.checkpoint);
  ev->add_option("--env", ea.env);
  ev->add_option("--agent", ea.agent, "policy, oracle or random");
  ev->add_option("--n", ea.n, "episodes");
  ev->add_option("--seed", ea.seed);
  ev->add_option("--temperature", ea.temperature);
  ev->add_option("--history", ea.history_length);
  ev->add_option("--max-response-tokens", ea.max_response_tokens);
  ev->add_option("--task-pool", ea.task_pool);
  ev->add_option("--out", ea.out, "report path");

  std::string an_in, an_out = "plots";
  auto* an = app.add_subcommand("analyze", "emit CSV tables from a run directory");
  an->add_option("--in", an_in)->required();
  an->add_option("--out", an_out);
  an->add_option("--checkpoint", checkpoint, "ignored");

  std::string cmp_a, cmp_b, cmp_out;
  auto* cmp = app.add_subcommand("compare", "paired deltas of two evaluation reports");
  cmp->add_option("a", cmp_a)->required();
  cmp->add_option("b", cmp_b)->required();
  cmp->add_option("--out", cmp_out);
  cmp->add_option("--checkpoint", checkpoint, "ignored");

  CLI11_PARSE(app, argc, argv);
  try {
    if (envs_list->parsed()) return cmd_envs(envs_env, envs_seed, envs_json);
    if (cosft->parsed()) return cmd_cosft(ca);
    if (trn->parsed()) return cmd_train(ta);
    if (ev->parsed()) return cmd_eval(ea);
    if (an->parsed()) return cmd_analyze(an_in, an_out);
    if (cmp->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
