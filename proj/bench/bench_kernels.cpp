// Serial reference kernels against their OpenMP counterparts: wall time and
// agreement of the results.

#include "hecke/amplifier.hpp"
#include "hecke/archimedean.hpp"
#include "hecke/hecke_local.hpp"
#include "hecke/parallel.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace hecke;

namespace {

struct Kernel {
    std::string name;
    // Runs once in the given mode and returns a fingerprint of the result.
    std::function<double(Exec)> run;
    // Largest admissible fingerprint difference; zero for exact kernels.
    double tolerance = 0;
};

double best_of(const Kernel& k, Exec exec, int repeat, double& fingerprint) {
    double best = 1e300;
    for (int i = 0; i < repeat; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fingerprint = k.run(exec);
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial versus parallel kernel timings", "bench_kernels"};
    int repeat = 3, threads = 0;
    std::string only;
    app.add_option("--repeat", repeat, "Timed runs per mode; the best is reported")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "OpenMP threads for the parallel mode (0: all cores)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--only", only, "Run kernels whose name contains this text");
    CLI11_PARSE(app, argc, argv);
    set_threads(threads);

    using lattice::Cotype;
    using lattice::PrimeContext;
    const std::vector<Kernel> kernels = {
        {"pair integral p=13 (2,1,0)x(2,1,0)",
         [](Exec e) {
             const auto r = local::torus_orbital_pair(PrimeContext(13, 3, 2), Cotype::parse("2,1,0"),
                                                      Cotype::parse("2,1,0"), {}, e);
             return static_cast<double>(r.total);
         }},
        {"key-bound sweep p<=7 entries<=2",
         [](Exec e) {
             const auto rows = local::key_bound_sweep({2, 3, 5, 7}, 3, 2, {}, e);
             double s = 0;
             for (const auto& r : rows) s += r.bound.squared.get_d();
             return s;
         }},
        {"amplifier ratio M=1e5",
         [](Exec e) {
             amp::AmplifierConfig cfg;
             cfg.c1 = 4;
             cfg.M = 100000;
             return amp::amplifier_ratio(cfg, e).ratio.get_d();
         }},
        {"SL(3) spherical function",
         [](Exec e) {
             const arch::GroupModel m(3);
             const arch::Vec nu = (arch::Vec(2) << 6.0, -2.0).finished();
             const arch::Mat g = m.exp_a((arch::Vec(2) << 1.0, 0.5).finished());
             arch::QuadratureSpec q;
             q.rel_tol = 1e-10;
             return std::abs(arch::spherical_function(m, nu, g, q, e).value);
         },
         1e-9},
        {"SL(3) model integral t=16",
         [](Exec e) {
             const arch::GroupModel m(3);
             const arch::Vec h0 = (arch::Vec(2) << std::cos(0.6), std::sin(0.6)).finished();
             arch::QuadratureSpec q;
             q.rel_tol = 1e-3;
             return arch::model_integral_I(m, {h0, 16.0}, arch::BumpFunction{1.0}, q, e).scaled;
         },
         1e-6},
        {"SL(3) critical set, 64 seeds",
         [](Exec e) {
             const arch::GroupModel m(3);
             const arch::Vec h0 = (arch::Vec(2) << std::cos(0.6), std::sin(0.6)).finished();
             return static_cast<double>(arch::critical_set_solve(m, h0, {}, e).size());
         }},
    };

    std::printf("openmp %s, %d thread(s), best of %d\n", openmp_enabled() ? "on" : "off", max_threads(), repeat);
    std::printf("%-40s %12s %12s %8s  %s\n", "kernel", "serial ms", "parallel ms", "speedup", "agree");
    bool all_agree = true;
    for (const auto& k : kernels) {
        if (!only.empty() && k.name.find(only) == std::string::npos) continue;
        double fs = 0, fp = 0;
        const double ts = best_of(k, Exec::serial, repeat, fs);
        const double tp = best_of(k, Exec::parallel, repeat, fp);
        const bool agree = std::fabs(fs - fp) <= k.tolerance * std::max(1.0, std::fabs(fs));
        all_agree = all_agree && agree;
        std::printf("%-40s %12.2f %12.2f %8.2f  %s\n", k.name.c_str(), ts, tp, ts / tp, agree ? "yes" : "NO");
        std::fflush(stdout);
    }
    return all_agree ? 0 : 1;
}
