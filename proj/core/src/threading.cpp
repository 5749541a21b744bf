#include "rootconv/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace rootconv {
namespace {
std::atomic<int> g_threads{0};
std::atomic<int> g_resolved{0};

int resolve_default() {
  if (const char* env = std::getenv("ROOTCONV_THREADS")) {
    int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void set_threads(int n) {
  g_threads.store(n < 0 ? 0 : n);
  g_resolved.store(0);
}

int threads() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n > 0) return n;
  int cached = g_resolved.load(std::memory_order_relaxed);
  if (cached > 0) return cached;
  cached = resolve_default();
  g_resolved.store(cached);
  return cached;
}

}  // namespace rootconv
