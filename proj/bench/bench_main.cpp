// Timing comparison of the OpenMP kernels against their serial reference
// paths. Each kernel is checked for identical output before the speedup is
// reported.

#include <cmath>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "ghzsim/compensation.hpp"
#include "ghzsim/polarization.hpp"
#include "ghzsim/rng.hpp"
#include "ghzsim/source.hpp"
#include "ghzsim/tomography.hpp"

namespace {

double timed(const std::function<void()>& fn) {
    const double t0 = omp_get_wtime();
    fn();
    return omp_get_wtime() - t0;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-24s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n", name,
                serial_s, parallel_s, serial_s / parallel_s,
                identical ? "outputs identical" : "OUTPUT MISMATCH");
}

}  // namespace

int main() {
    using namespace ghzsim;
    std::printf("threads: %d\n", omp_get_max_threads());

    {
        PumpEnvelope pump;
        PhaseMatching pm;
        GridAxes axes;
        axes.step_nm = 0.004;
        SpectralGrid serial = build_jsa(pump, pm, axes, ExecPolicy::serial);
        SpectralGrid parallel = build_jsa(pump, pm, axes, ExecPolicy::parallel);
        const bool same = serial.amplitude() == parallel.amplitude();
        const double ts = timed([&] { build_jsa(pump, pm, axes, ExecPolicy::serial); });
        const double tp = timed([&] { build_jsa(pump, pm, axes, ExecPolicy::parallel); });
        report("build_jsa", ts, tp, same);
    }

    {
        SourceConfig cfg;
        cfg.p_top = cfg.p_bottom = 0.02;
        cfg.overlap_v = 0.9;
        cfg.arm_efficiency = {0.26, 0.26, 0.26, 0.26};
        const DensityMatrix rho = contaminated_state(cfg);
        const Efficiencies eff{0.9, 1.1, 0.95, 1.05};
        std::vector<CountRecord> records;
        const auto settings = settings_97();
        for (size_t i = 0; i < settings.size(); ++i) {
            records.push_back(simulate_counts(rho, settings[i], 2000.0, eff,
                                              derive_seed(11, "bench-counts", i)));
            records.back().acquisition_s = 600.0;
        }
        const PureState ghz = ghz_state(4, 0.0);
        const int n = 100;
        const double sigma = 0.1 * 3.14159265358979323846 / 180.0;
        MonteCarloResult ms, mp;
        const double ts = timed(
            [&] { ms = monte_carlo_errors(records, ghz, n, sigma, 5, ExecPolicy::serial); });
        const double tp = timed(
            [&] { mp = monte_carlo_errors(records, ghz, n, sigma, 5, ExecPolicy::parallel); });
        const bool same = ms.fidelity_mean == mp.fidelity_mean &&
                          ms.fidelity_std == mp.fidelity_std && ms.n_failed == mp.n_failed;
        report("monte_carlo_errors", ts, tp, same);
    }

    {
        const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.0));
        std::vector<LocalUnitary> us{
            LocalUnitary(),
            LocalUnitary(WaveplateSetting{0.31, -0.42, 0.18}.unitary()),
            LocalUnitary(WaveplateSetting{-0.12, 0.57, -0.33}.unitary()),
            LocalUnitary(WaveplateSetting{0.44, 0.09, 0.51}.unitary()),
        };
        const DensityMatrix rotated = apply_local_unitaries(ghz, us);
        CompensationOptions opts;
        opts.n_starts = 24;
        CompensationPlan ps{}, pp{};
        const double ts = timed([&] {
            CompensationOptions o = opts;
            o.policy = ExecPolicy::serial;
            ps = optimize_compensation(rotated, o);
        });
        const double tp = timed([&] {
            CompensationOptions o = opts;
            o.policy = ExecPolicy::parallel;
            pp = optimize_compensation(rotated, o);
        });
        const bool same = ps.achieved_fidelity == pp.achieved_fidelity;
        report("optimize_compensation", ts, tp, same);
        std::printf("  achieved fidelity %.9f\n", pp.achieved_fidelity);
    }

    return 0;
}
