#pragma once

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>

namespace irn {

// Worker-thread cap. Resolved once from the IRN_THREADS environment variable;
// 0 or unset means "whatever OpenMP gives us".
inline int max_threads() {
    static const int cap = [] {
        const char* env = std::getenv("IRN_THREADS");
        int hw = omp_get_max_threads();
        if (env == nullptr || *env == '\0') return hw;
        int v = std::atoi(env);
        if (v <= 0) return hw;
        return std::min(v, hw);
    }();
    return cap;
}

// Static partition of [0, n) across worker threads. Every index is computed
// by exactly one thread with a fixed per-index evaluation order, so results
// are bit-identical for any thread count.
template <typename Fn>
inline void parallel_for(long n, Fn&& fn) {
    if (n <= 0) return;
    int nt = std::min<long>(max_threads(), n);
    if (nt <= 1 || n < 256) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long i = 0; i < n; ++i) fn(i);
}

// Same, but hands each worker a contiguous [begin, end) slab.
template <typename Fn>
inline void parallel_blocks(long n, Fn&& fn) {
    if (n <= 0) return;
    int nt = std::min<long>(max_threads(), n);
    if (nt <= 1) {
        fn(0L, n);
        return;
    }
#pragma omp parallel num_threads(nt)
    {
        int t = omp_get_thread_num();
        int total = omp_get_num_threads();
        long chunk = (n + total - 1) / total;
        long begin = t * chunk;
        long end = std::min(n, begin + chunk);
        if (begin < end) fn(begin, end);
    }
}

}  // namespace irn
