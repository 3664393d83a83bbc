#include "detangle/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace detangle::log {

namespace {

Level parse_level() {
  const char* env = std::getenv("DETANGLE_LOG");
  if (!env) return Level::kWarn;
  const std::string v(env);
  if (v == "error") return Level::kError;
  if (v == "info") return Level::kInfo;
  if (v == "debug") return Level::kDebug;
  return Level::kWarn;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

Level threshold() {
  static const Level level = parse_level();
  return level;
}

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::cerr << "[detangle " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace detangle::log
