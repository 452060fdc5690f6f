#include <atomic>
#include <cstdlib>
#include <string>

#include "refinet/backend/kernels.hpp"
#include "refinet/backend/kernels_scalar.hpp"

namespace refinet::kernels {

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",
      scalar::conv3x3_forward<float>,
      scalar::conv3x3_backward_input<float>,
      scalar::conv3x3_backward_weight<float>,
      scalar::dot<float>,
      scalar::axpy<float>,
      scalar::abs_diff_sum<float>,
      scalar::abs_diff_backward<float>,
      scalar::adam_update,
  };
  return table;
}

#ifndef REFINET_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

const KernelTable* best_available() {
  if (const char* env = std::getenv("REFINET_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2_table() != nullptr && cpu_has_avx2()) return avx2_table();
  }
  if (avx2_table() != nullptr && cpu_has_avx2()) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{best_available()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  if (name == "scalar") {
    current().store(&scalar_table());
    return true;
  }
  if (name == "avx2" && avx2_table() != nullptr && cpu_has_avx2()) {
    current().store(avx2_table());
    return true;
  }
  return false;
}

}  // namespace refinet::kernels
