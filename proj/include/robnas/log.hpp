#pragma once

#include <functional>
#include <string>

namespace robnas {

enum class LogLevel { info = 0, warning = 1 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Installs a process-wide sink; an empty sink discards messages.
void set_log_sink(LogSink sink);
void log_message(LogLevel level, const std::string& message);

}  // namespace robnas
