#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cloudlab {

// Parallel sum with a run-to-run reproducible result for a fixed thread
// count: each thread accumulates a statically scheduled contiguous chunk and
// the per-thread partials are combined in thread order.  A plain OpenMP
// reduction leaves the combination order to the runtime, which breaks
// bitwise reproducibility of diagnostics.
template <class F>
double deterministic_sum(long n, F&& term)
{
#ifdef _OPENMP
    int nt = omp_get_max_threads();
    std::vector<double> partial(nt, 0.0);
#pragma omp parallel num_threads(nt)
    {
        int tid = omp_get_thread_num();
        double acc = 0.0;
#pragma omp for schedule(static) nowait
        for (long i = 0; i < n; ++i)
            acc += term(i);
        partial[tid] = acc;
    }
    double total = 0.0;
    for (double p : partial)
        total += p;
    return total;
#else
    double total = 0.0;
    for (long i = 0; i < n; ++i)
        total += term(i);
    return total;
#endif
}

// Parallel max; exact max is order-independent, so a plain reduction is safe.
template <class F>
double parallel_max(long n, F&& term, double init = 0.0)
{
    double m = init;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(max : m)
#endif
    for (long i = 0; i < n; ++i) {
        double t = term(i);
        if (t > m)
            m = t;
    }
    return m;
}

} // namespace cloudlab
