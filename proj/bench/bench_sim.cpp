// Compares the OpenMP trial kernel against the serial reference on identical
// workloads, verifying agreement and reporting the speedup.
//
//   ./bench_sim [trials] [n_paths]

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "rrmp/sim.hpp"

using namespace rrmp::sim;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    const long trials = argc > 1 ? std::atol(argv[1]) : 2000000;
    const long n_paths = argc > 2 ? std::atol(argv[2]) : 64;
    const double t = 0.05;
    const long long seed = 99;

#ifdef _OPENMP
    std::printf("openmp: %d threads available\n", omp_get_max_threads());
#else
    std::printf("openmp: compiled without OpenMP, kernel runs serially\n");
#endif
    std::printf("workload: %ld trials x %ld draws (%.1fM samples)\n", trials, n_paths,
                trials * static_cast<double>(n_paths) / 1e6);

    auto model = make_utility_model(BernoulliUtility{0.5}, n_paths,
                                    Aggregator::MeanOfUtilities);

    auto t0 = std::chrono::steady_clock::now();
    SimReport serial = simulate_concentration_serial(model, t, trials, seed);
    double serial_s = seconds_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    SimReport parallel = simulate_concentration(model, t, trials, seed);
    double parallel_s = seconds_since(t1);

    std::printf("serial:   %.3fs  freq=%.6f  mean_abs_dev=%.9f\n", serial_s,
                serial.empirical_deviation_freq, serial.mean_abs_deviation);
    std::printf("parallel: %.3fs  freq=%.6f  mean_abs_dev=%.9f\n", parallel_s,
                parallel.empirical_deviation_freq, parallel.mean_abs_deviation);
    std::printf("speedup:  %.2fx\n", serial_s / parallel_s);

    bool counts_match =
        serial.empirical_deviation_freq == parallel.empirical_deviation_freq;
    double rel = std::abs(serial.mean_abs_deviation - parallel.mean_abs_deviation) /
                 serial.mean_abs_deviation;
    std::printf("agreement: deviation counts %s, mean abs deviation rel diff %.2e\n",
                counts_match ? "identical" : "DIFFER", rel);
    if (!counts_match || rel > 1e-12) {
        std::printf("MISMATCH between kernel and reference\n");
        return 1;
    }
    return 0;
}
