#include "edl/parallel.hpp"

namespace edl {
namespace runtime {

namespace {
int g_threads = 0;
bool g_deterministic = true;
}  // namespace

void set_threads(int n) { g_threads = n; }

int threads() {
  if (g_threads > 0) return g_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_deterministic(bool on) { g_deterministic = on; }

bool deterministic() { return g_deterministic; }

}  // namespace runtime
}  // namespace edl
