#include "compenkit/tensor.hpp"
#include "compenkit/threading.hpp"

#include <atomic>
#include <thread>

namespace compenkit {

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<int> g_num_threads{0};
} // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

void set_num_threads(int n) { g_num_threads.store(n < 0 ? 0 : n); }

int num_threads() {
    int n = g_num_threads.load();
    if (n == 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n == 0) n = 1;
    }
    return n;
}

int effective_threads(std::int64_t n) {
#ifdef _OPENMP
    const int t = num_threads();
    if (n < 2 || t < 2) return 1;
    return static_cast<int>(std::min<std::int64_t>(t, n));
#else
    (void)n;
    return 1;
#endif
}

} // namespace compenkit
