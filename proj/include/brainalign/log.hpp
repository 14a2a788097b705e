#pragma once

#include <string>

namespace brainalign::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

void set_level(Level level);
Level level();

// Warnings are de-duplicated by message text so hot loops (permutations,
// grid cells) do not flood standard error.
void warn(const std::string& message);
void info(const std::string& message);
void debug(const std::string& message);

}  // namespace brainalign::log
