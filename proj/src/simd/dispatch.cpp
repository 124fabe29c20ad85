#include <atomic>

#include "spatialmn/common.hpp"
#include "spatialmn/simd.hpp"

namespace smn::simd {
namespace {

const KernelTable* best_table() {
  if (const KernelTable* t = detail::avx2_table(); t != nullptr && detail::cpu_has_avx2()) return t;
  if (const KernelTable* t = detail::neon_table(); t != nullptr) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::scalar};
  if (detail::avx2_table() != nullptr && detail::cpu_has_avx2()) out.push_back(Isa::avx2);
  if (detail::neon_table() != nullptr) out.push_back(Isa::neon);
  return out;
}

const KernelTable& table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar: return detail::kScalarTable;
    case Isa::avx2:
      if (detail::avx2_table() != nullptr && detail::cpu_has_avx2()) return *detail::avx2_table();
      break;
    case Isa::neon:
      if (detail::neon_table() != nullptr) return *detail::neon_table();
      break;
  }
  throw ValidationError("instruction set '" + std::string(isa_name(isa)) +
                        "' is not available on this machine");
}

const KernelTable& kernels() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = best_table();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void force_isa(Isa isa) { g_active.store(&table_for(isa), std::memory_order_release); }

void reset_isa() { g_active.store(nullptr, std::memory_order_release); }

}  // namespace smn::simd
