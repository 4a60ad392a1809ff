#include "rolegraph/kernels.hpp"

#include "rolegraph/error.hpp"

namespace rolegraph::kernels {
namespace {

Isa g_active = detail::cpu_has_avx2_fma() ? Isa::avx2 : Isa::scalar;

const OpsTable* table_for(Isa isa) {
  if (isa == Isa::avx2) return detail::avx2_table();
  return &detail::scalar_table;
}

}  // namespace

const OpsTable& ops() { return *table_for(g_active); }

Isa active() { return g_active; }

bool supported(Isa isa) {
  if (isa == Isa::scalar) return true;
  return detail::avx2_table() != nullptr && detail::cpu_has_avx2_fma();
}

void force(Isa isa) {
  require(supported(isa), Errc::config_error,
          std::string("ISA not supported on this machine: ") + std::string(isa_name(isa)));
  g_active = isa;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace rolegraph::kernels
