// Times the contrast kernels: serial reference loop vs the chunked OpenMP
// path, plus the simulator. Usage: bench_contrast [n] [repeats]

#include "hypoql/contrast.hpp"
#include "hypoql/models.hpp"
#include "hypoql/simulate.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>

using namespace hypoql;

namespace {

template <typename F>
double time_best_ms(int repeats, F&& fn) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const long n = argc > 1 ? std::atol(argv[1]) : 200000;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

    LinearOscillatorModel model;
    const ThetaPoint theta = LinearOscillatorModel::default_truth();

    SimConfig sim;
    sim.n = n;
    sim.h = 0.005;
    sim.substeps = 10;
    sim.seed = 1;
    ObservationGrid grid;
    const double t_sim = time_best_ms(std::min(repeats, 2),
                                      [&] { grid = simulate_path(model, theta, sim); });
    std::printf("simulate_path        n=%-8ld %10.2f ms\n", n, t_sim);

    volatile double sink = 0.0;
    for (const bool with_grad : {false, true}) {
        ContrastOptions ser, par;
        ser.exec = Exec::serial;
        par.exec = Exec::parallel;
        ser.want_gradient = par.want_gradient = with_grad;

        const double t_ser =
            time_best_ms(repeats, [&] { sink = joint_contrast(model, grid, theta, ser).value; });
        const double t_par =
            time_best_ms(repeats, [&] { sink = joint_contrast(model, grid, theta, par).value; });
        std::printf("joint %-14s serial %10.2f ms | omp(%d) %10.2f ms | speedup %.2fx\n",
                    with_grad ? "value+grad" : "value", t_ser, omp_get_max_threads(), t_par,
                    t_ser / t_par);
    }

    {
        ContrastOptions ser, par;
        ser.exec = Exec::serial;
        par.exec = Exec::parallel;
        const double t_ser = time_best_ms(repeats, [&] {
            sink = adaptive_theta3_contrast(model, grid, theta.theta3, theta.theta1, theta.theta2,
                                            ser)
                       .value;
        });
        const double t_par = time_best_ms(repeats, [&] {
            sink = adaptive_theta3_contrast(model, grid, theta.theta3, theta.theta1, theta.theta2,
                                            par)
                       .value;
        });
        std::printf("theta3 value+grad    serial %10.2f ms | omp(%d) %10.2f ms | speedup %.2fx\n",
                    t_ser, omp_get_max_threads(), t_par, t_ser / t_par);
    }
    (void)sink;
    return 0;
}
