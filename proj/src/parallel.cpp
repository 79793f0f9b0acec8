#include "wrinkle/parallel.hpp"

#include <atomic>

namespace wrinkle::par {

namespace {
std::atomic<Mode> g_mode{
#if defined(_OPENMP)
    Mode::OpenMP
#else
    Mode::Serial
#endif
};
}

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

bool openmp_compiled() {
#if defined(_OPENMP)
    return true;
#else
    return false;
#endif
}

int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace wrinkle::par
