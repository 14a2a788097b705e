#include "brainalign/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>

#include "brainalign/core.hpp"

namespace brainalign {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Range: return "range";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Load: return "load";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

const char* to_string(FitScope scope) noexcept { return scope == FitScope::TrainFold ? "train_fold" : "global"; }

FitScope fit_scope_from_string(const std::string& s) {
  if (s == "train_fold") return FitScope::TrainFold;
  if (s == "global") return FitScope::Global;
  throw parameter_error("unknown fit scope '" + s + "' (train_fold, global)");
}

namespace log {
namespace {

std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;
std::set<std::string> g_seen;

void emit(const char* tag, const std::string& message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[" << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void warn(const std::string& message) {
  if (g_level < Level::Warn) return;
  {
    std::lock_guard lock(g_mutex);
    if (!g_seen.insert(message).second) return;
  }
  emit("warn", message);
}

void info(const std::string& message) {
  if (g_level >= Level::Info) emit("info", message);
}

void debug(const std::string& message) {
  if (g_level >= Level::Debug) emit("debug", message);
}

}  // namespace log
}  // namespace brainalign
