#pragma once

#include <functional>
#include <string>

namespace specbnp {

using LogSink = std::function<void(const std::string&)>;

/// Replaces the warning sink (stderr by default). Returns the previous sink.
LogSink set_warning_sink(LogSink sink);
void warn(const std::string& message);

}  // namespace specbnp
