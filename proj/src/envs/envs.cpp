#include <algorithm>

#include "copolab/error.hpp"
#include "envs_internal.hpp"

namespace copolab {

int default_max_steps(EnvId id) { return id == EnvId::kGridHouse ? 30 : 100; }

int num_tasks(EnvId id) {
  return id == EnvId::kGridHouse ? detail::gridhouse_num_tasks()
                                 : detail::minilab_num_tasks();
}

std::unique_ptr<TextEnv> make_env(EnvId id) {
  return id == EnvId::kGridHouse ? detail::make_gridhouse()
                                 : detail::make_minilab();
}

std::vector<std::string> env_lexicon(EnvId id) {
  return id == EnvId::kGridHouse ? detail::gridhouse_lexicon()
                                 : detail::minilab_lexicon();
}

ComplexityTier tier_of(int oracle_len) {
  if (oracle_len <= 20) return ComplexityTier::kShort;
  if (oracle_len <= 50) return ComplexityTier::kMedium;
  return ComplexityTier::kLong;
}

int oracle_length(const EnvSpec& spec) {
  auto env = make_env(spec.env_id);
  env->reset(spec);
  int n = 0;
  while (!env->done()) {
    env->step(env->oracle_action());
    ++n;
  }
  if (!env->success()) {
    throw NoSolution("oracle did not finish task " + std::to_string(spec.task_id));
  }
  return n;
}

EnvSpec make_spec(EnvId id, int task_id, std::uint64_t seed) {
  EnvSpec spec;
  spec.env_id = id;
  spec.task_id = task_id;
  spec.seed = seed;
  spec.max_steps = default_max_steps(id);
  if (task_id < 0 || task_id >= num_tasks(id)) {
    throw UnknownTask("task " + std::to_string(task_id) + " of " +
                      std::string(to_string(id)));
  }
  spec.complexity_tier = tier_of(oracle_length(spec));
  return spec;
}

std::vector<CatalogueEntry> task_catalogue(EnvId id, std::uint64_t seed) {
  std::vector<CatalogueEntry> out;
  for (int t = 0; t < num_tasks(id); ++t) {
    const EnvSpec spec = make_spec(id, t, seed);
    auto env = make_env(id);
    const auto reset = env->reset(spec);
    out.push_back({id, t, env->category(), reset.instruction,
                   oracle_length(spec), spec.complexity_tier});
  }
  return out;
}

}  // namespace copolab
