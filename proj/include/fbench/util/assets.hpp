#pragma once

#include <string_view>

namespace fbench::assets {

// Returns the embedded contents of a file under data/ (e.g. "prompts/judge_system.txt").
std::string_view get(std::string_view name);

}  // namespace fbench::assets
