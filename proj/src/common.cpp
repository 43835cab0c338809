#include "csmil/common.hpp"

#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

namespace csmil {

LogLevel log_level() {
  static LogLevel lvl = [] {
    const char* env = std::getenv("CSMIL_LOG");
    if (env == nullptr) return LogLevel::info;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::info;
  }();
  return lvl;
}

void log_msg(LogLevel lvl, const std::string& msg) {
  if (lvl > log_level()) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  const char* tag = lvl == LogLevel::error ? "error" : (lvl == LogLevel::debug ? "debug" : "info");
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw NumericError("short write: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace csmil
