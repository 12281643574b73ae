#include <atomic>
#include <cstdlib>
#include <cstring>

#include "ppl/kernels.hpp"

namespace ppl::kernels {

#if defined(PPL_HAVE_AVX2)
const Ops* avx2_ops_impl();
#endif

const Ops* avx2_ops() {
#if defined(PPL_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_ops_impl();
#endif
  return nullptr;
}

namespace {

const Ops* pick() {
  if (const char* env = std::getenv("PPL_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(env, "avx2") == 0 && avx2_ops() != nullptr)
      return avx2_ops();
  }
  if (const Ops* v = avx2_ops()) return v;
  return &scalar_ops();
}

std::atomic<const Ops*> g_override{nullptr};

}  // namespace

const Ops& ops() {
  if (const Ops* o = g_override.load(std::memory_order_acquire)) return *o;
  static const Ops* chosen = pick();
  return *chosen;
}

void set_ops(const Ops* table) {
  g_override.store(table, std::memory_order_release);
}

}  // namespace ppl::kernels
