#include "specbnp/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace specbnp {
namespace {

std::mutex sink_mutex;
LogSink& current_sink() {
  static LogSink sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
  return sink;
}

}  // namespace

LogSink set_warning_sink(LogSink sink) {
  std::lock_guard lock(sink_mutex);
  return std::exchange(current_sink(), std::move(sink));
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex);
  if (current_sink()) current_sink()(message);
}

}  // namespace specbnp
