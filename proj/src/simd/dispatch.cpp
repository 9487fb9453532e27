#include <cstdlib>
#include <stdexcept>
#include <string>

#include "oocqr/simd.hpp"

namespace oocqr::simd {

bool cpu_supports(Level level) {
  switch (level) {
    case Level::scalar:
      return true;
    case Level::avx2:
#if defined(__x86_64__) || defined(__i386__)
      __builtin_cpu_init();
      return avx2_primitives() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Level parse_level(std::string_view name) {
  if (name == "scalar") return Level::scalar;
  if (name == "avx2") return Level::avx2;
  throw std::invalid_argument("unknown SIMD level '" + std::string(name) + "'");
}

const Primitives& select(Level level) {
  if (!cpu_supports(level)) throw std::runtime_error("requested SIMD level unavailable on this CPU/build");
  return level == Level::avx2 ? *avx2_primitives() : scalar_primitives();
}

const Primitives& active() {
  static const Primitives& chosen = [] () -> const Primitives& {
    if (const char* env = std::getenv("OOCQR_SIMD"); env && *env) return select(parse_level(env));
    return cpu_supports(Level::avx2) ? *avx2_primitives() : scalar_primitives();
  }();
  return chosen;
}

}  // namespace oocqr::simd
