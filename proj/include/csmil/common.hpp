#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace csmil {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Bad user input: unusable config, malformed files, violated preconditions.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure at run time: divergence, non-finite values, solver breakdown.
// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_msg(LogLevel lvl, const std::string& msg);

inline void log_error(const std::string& m) { log_msg(LogLevel::error, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::debug, m); }

// Fixed 17-significant-digit rendering so artifacts are byte-stable.
std::string fmt17(double x);

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so the
// result is independent of scheduling and identical to the serial order.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  int n_threads = jobs < n ? jobs : n;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace csmil
