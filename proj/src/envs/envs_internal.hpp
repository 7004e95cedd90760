#pragma once

#include <memory>
#include <string>
#include <vector>

#include "copolab/envs.hpp"

namespace copolab::detail {

int gridhouse_num_tasks();
std::unique_ptr<TextEnv> make_gridhouse();
std::vector<std::string> gridhouse_lexicon();

int minilab_num_tasks();
std::unique_ptr<TextEnv> make_minilab();
std::vector<std::string> minilab_lexicon();

}  // namespace copolab::detail
