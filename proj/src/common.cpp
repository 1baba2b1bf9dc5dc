#include "mpnet/common.hpp"

#include <atomic>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mp {

namespace {

// The training loops allocate and free tens-of-MB activation buffers every
// layer call. With glibc defaults those come from mmap, so each call pays the
// full soft-page-fault cost again. Keeping large blocks on the heap lets the
// allocator recycle them.
struct MallocTuning {
  MallocTuning() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  }
};
const MallocTuning g_malloc_tuning;

}  // namespace

const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::parse: return "parse";
    case Errc::io: return "io";
    case Errc::config: return "config";
    case Errc::numeric: return "numeric";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

namespace {
std::atomic<bool> g_debug_checks{false};
std::atomic<int> g_max_threads{1};
}  // namespace

bool debug_checks_enabled() noexcept { return g_debug_checks.load(std::memory_order_relaxed); }
void set_debug_checks(bool on) noexcept { g_debug_checks.store(on, std::memory_order_relaxed); }

int max_threads() noexcept { return g_max_threads.load(std::memory_order_relaxed); }

void set_max_threads(int n) noexcept {
  if (n < 1) n = 1;
  g_max_threads.store(n, std::memory_order_relaxed);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = max_threads();
  if (workers <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // Chunk size is a function of n only, never of the worker count.
  const std::int64_t chunk = std::max<std::int64_t>(1, n / 64);
  std::atomic<std::int64_t> next{0};
  auto run = [&] {
    for (;;) {
      const std::int64_t begin = next.fetch_add(chunk);
      if (begin >= n) break;
      const std::int64_t end = std::min(n, begin + chunk);
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(std::min<std::int64_t>(workers, n)) - 1;
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

}  // namespace mp
