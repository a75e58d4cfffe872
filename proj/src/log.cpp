#include "covergraph/log.hpp"

#include <iostream>
#include <mutex>

namespace covergraph::log {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

const char* label(Level level) {
  switch (level) {
    case Level::debug:
      return "debug";
    case Level::info:
      return "info";
    case Level::warn:
      return "warn";
    case Level::error:
      return "error";
  }
  return "?";
}

Sink& current_sink() {
  static Sink sink = [](Level level, std::string_view message) {
    std::cerr << "[" << label(level) << "] " << message << "\n";
  };
  return sink;
}

Level& min_level() {
  static Level level = Level::info;
  return level;
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  std::swap(current_sink(), sink);
  return sink;
}

void set_min_level(Level level) {
  std::lock_guard lock(sink_mutex());
  min_level() = level;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (level < min_level() || !current_sink()) {
    return;
  }
  current_sink()(level, message);
}

}  // namespace covergraph::log
