#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace wrinkle::par {

enum class Mode { Serial, OpenMP };

// Process-wide execution mode. Results are identical either way: parallel
// loops write per-index slots and all reductions are combined in index order,
// so sums do not depend on the thread count.
Mode mode();
void set_mode(Mode m);
bool openmp_compiled();
int max_threads();

// Apply fn(i) for i in [0, n). fn must only write to per-index state.
template <class F>
void for_each_index(std::size_t n, F&& fn) {
#if defined(_OPENMP)
    if (mode() == Mode::OpenMP) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < (long long)n; ++i) fn((std::size_t)i);
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

// Ordered reduction: sums slots[0..n) left to right.
inline double ordered_sum(const std::vector<double>& slots) {
    double s = 0.0;
    for (double v : slots) s += v;
    return s;
}

}  // namespace wrinkle::par
