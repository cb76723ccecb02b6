#include "idr/kernels.hpp"

#include <atomic>
#include <thread>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace idr::kernels {

namespace {
std::atomic<int> g_threads{1};
}

int threads() { return g_threads.load(std::memory_order_relaxed); }

void set_threads(int n) {
    if (n <= 0) {
#if defined(_OPENMP)
        n = omp_get_max_threads();
#else
        n = static_cast<int>(std::thread::hardware_concurrency());
#endif
        if (n < 1) n = 1;
    }
    g_threads.store(n, std::memory_order_relaxed);
}

#if defined(_OPENMP)
namespace detail {
void run_tasks_omp(std::int64_t count, int nthreads, void* ctx, void (*body)(void*, std::int64_t)) {
#pragma omp parallel for num_threads(nthreads) schedule(static)
    for (std::int64_t i = 0; i < count; ++i) body(ctx, i);
}
}  // namespace detail
#endif

}  // namespace idr::kernels
