// Compares the OpenMP kernels against the serial reference implementations at
// the default editing sizes. Build with a multi-core machine and OMP_NUM_THREADS
// set to see the spread; results must agree bitwise for the element-wise
// kernels regardless of thread count.

#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fpedit/editing.hpp"
#include "fpedit/linalg.hpp"
#include "fpedit/rng.hpp"

using namespace fpedit;
using clock_type = std::chrono::steady_clock;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

template <typename F>
double time_ms(F&& f, int reps) {
    // One warmup, then the best of `reps`.
    f();
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = clock_type::now();
        f();
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial_ms, double parallel_ms, bool bit_equal) {
    std::printf("%-28s %10.2f ms %10.2f ms %8.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, bit_equal ? "bitwise-equal" : "tolerance-equal");
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled at build time; both columns run serially\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    Rng rng(20240817);
    const Matrix a = random_matrix(256, 256, rng);
    const Matrix b = random_matrix(256, 1000, rng);
    const Matrix keys = random_matrix(256, 1000, rng);
    const Matrix w = random_matrix(128, 256, rng);

    {
        Matrix rs, rp;
        const double ts = time_ms([&] { rs = linalg::serial::multiply(a, b); }, 3);
        const double tp = time_ms([&] { rp = linalg::multiply(a, b); }, 3);
        row("multiply 256x256x1000", ts, tp, rs.data() == rp.data());
    }
    {
        Matrix rs, rp;
        const double ts = time_ms([&] { rs = linalg::serial::multiply_abt(keys, keys); }, 3);
        const double tp = time_ms([&] { rp = linalg::multiply_abt(keys, keys); }, 3);
        row("gram K K^T (1000 keys)", ts, tp, rs.data() == rp.data());
    }
    {
        const Matrix gram = linalg::multiply_abt(keys, keys);
        EighResult es, ep;
        const double ts = time_ms([&] { es = linalg::serial::eigh(gram); }, 2);
        const double tp = time_ms([&] { ep = linalg::eigh(gram); }, 2);
        row("eigh 256x256", ts, tp,
            es.values == ep.values && es.vectors.data() == ep.vectors.data());
    }
    {
        Matrix sys = linalg::multiply_abt(keys, keys);
        linalg::add_identity(sys, 1.0);
        Matrix rs, rp;
        const double ts = time_ms([&] { rs = linalg::serial::solve_right(sys, w); }, 3);
        const double tp = time_ms([&] { rp = linalg::solve_right(sys, w); }, 3);
        row("solve_right 256, 128 rhs", ts, tp, rs.data() == rp.data());
    }
    {
        // Whole edit solve at default scenario shape.
        Rng r2(7);
        const Matrix k1 = random_matrix(256, 100, r2);
        const Matrix v1 = random_matrix(128, 100, r2);
        const OldKnowledgeStats stats = estimate_old_stats(keys);
        const Projector proj = compute_projector(stats, 1e-6);
        const MemoryLayer layer{w};
        const KnowledgeBank bank{k1, v1};
        EditSolution sol;
        const double tp = time_ms([&] { sol = solve_perturbation(layer, bank, stats, proj); }, 2);
        std::printf("%-28s %13s %10.2f ms\n", "solve_perturbation default", "-", tp);
    }
    return 0;
}
