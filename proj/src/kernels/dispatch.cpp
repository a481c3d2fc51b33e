#include <atomic>
#include <cstdlib>
#include <string>

#include "cxr/error.hpp"
#include "cxr/kernels.hpp"

namespace cxr::kernels {

#if defined(CXR_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(CXR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* best = avx2_table();
  if (const char* env = std::getenv("CXR_KERNELS"); env != nullptr && *env != '\0') {
    const std::string name(env);
    if (name == "scalar") return &scalar_table();
    if (name == "avx2" && best != nullptr) return best;
  }
  return best != nullptr ? best : &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{initial_table()};
  return current;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(CXR_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const KernelTable* t = avx2_table()) out.push_back(t);
  return out;
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void select_backend(Backend backend) {
  const KernelTable* table = nullptr;
  switch (backend) {
    case Backend::Scalar:
      table = &scalar_table();
      break;
    case Backend::Avx2:
      table = avx2_table();
      break;
  }
  if (table == nullptr) throw UsageError("kernel backend not available on this machine");
  slot().store(table, std::memory_order_release);
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::Scalar;
  if (name == "avx2") return Backend::Avx2;
  throw UsageError("unknown kernel backend '" + std::string(name) + "' (expected scalar|avx2)");
}

}  // namespace cxr::kernels
