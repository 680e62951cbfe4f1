#include <atomic>
#include <cstdlib>
#include <cstring>

#include "sra/kernels.hpp"

namespace sra::kernels {
namespace {

const Table* detect() {
  const char* env = std::getenv("SRA_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar();
  if (avx2_supported()) return &avx2();
  return &scalar();
}

std::atomic<const Table*>& slot() {
  static std::atomic<const Table*> table{detect()};
  return table;
}

}  // namespace

const Table& active() { return *slot().load(std::memory_order_relaxed); }

bool select(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    slot().store(&scalar());
    return true;
  }
  if (std::strcmp(name, "avx2") == 0 && avx2_supported()) {
    slot().store(&avx2());
    return true;
  }
  return false;
}

}  // namespace sra::kernels
