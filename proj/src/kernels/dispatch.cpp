#include <atomic>
#include <cstdlib>

#include "corefmt/kernels.hpp"

namespace corefmt::kernels {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("COREFMT_KERNELS")) {
    const std::string_view want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && cpu_has_avx2() && avx2_table() != nullptr) return avx2_table();
  }
  if (cpu_has_avx2() && avx2_table() != nullptr) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

bool set_active(std::string_view name) {
  if (name == "scalar") {
    slot().store(&scalar_table());
    return true;
  }
  if (name == "avx2") {
    if (!cpu_has_avx2() || avx2_table() == nullptr) return false;
    slot().store(avx2_table());
    return true;
  }
  if (name == "auto") {
    slot().store(cpu_has_avx2() && avx2_table() ? avx2_table() : &scalar_table());
    return true;
  }
  return false;
}

std::vector<std::string> available() {
  std::vector<std::string> out{"scalar"};
  if (cpu_has_avx2() && avx2_table() != nullptr) out.emplace_back("avx2");
  return out;
}

}  // namespace corefmt::kernels
