#pragma once

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mp {

enum class Errc {
  invalid_argument = 1,
  parse = 2,
  io = 3,
  config = 4,
  numeric = 5,
  internal = 6,
};

const char* errc_name(Errc c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

template <class... Args>
[[noreturn]] void fail(Errc code, Args&&... args) {
  std::ostringstream ss;
  (ss << ... << args);
  throw Error(code, ss.str());
}

// Extra NaN/Inf sweeps after heavy kernels. Off by default; tests flip it on.
bool debug_checks_enabled() noexcept;
void set_debug_checks(bool on) noexcept;

// Worker count for parallel kernels and the experiment scheduler.
// 1 keeps everything on the calling thread. Results are identical for any value.
int max_threads() noexcept;
void set_max_threads(int n) noexcept;

// Runs fn(i) for i in [0, n). Work is split into fixed-size chunks so the
// floating-point result of each item never depends on the worker count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace mp
