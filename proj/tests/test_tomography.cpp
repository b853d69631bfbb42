#include <doctest.h>

#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <ghzsim/polarization.hpp>
#include <ghzsim/rng.hpp>
#include <ghzsim/tomography.hpp>

#include "oracles.hpp"

using namespace ghzsim;

namespace {

const double kPi = std::acos(-1.0);

DensityMatrix random_density_dm(int n_qubits, double min_purity, std::mt19937_64& rng) {
    return DensityMatrix(n_qubits, oracle::random_density(1 << n_qubits, min_purity, rng));
}

// expected outcome values Tr(Pi_o rho) for every setting, scaled by eta(o)
std::vector<std::array<double, 16>> expected_values(
    const std::vector<MeasurementSetting>& settings, const DensityMatrix& rho,
    const Efficiencies& eff) {
    std::vector<std::array<double, 16>> values(settings.size());
    for (size_t is = 0; is < settings.size(); ++is)
        for (int o = 0; o < 16; ++o)
            values[is][o] =
                (outcome_projector(settings[is], o, eff) * rho.matrix()).trace().real();
    return values;
}

int parity(int outcome) {
    int b = 0;
    for (int k = 0; k < 4; ++k) b ^= (outcome >> k) & 1;
    return b;
}

}  // namespace

TEST_CASE("the 97-setting plan lists XYZ products then the Z block") {
    const auto settings = settings_97();
    REQUIRE(settings.size() == 97);

    for (int i = 0; i < 81; ++i) {
        int code = i;
        std::array<Basis, 4> want{};
        for (int k = 3; k >= 0; --k) {
            const int d = code % 3;
            code /= 3;
            want[k] = (d == 0) ? Basis::X : (d == 1) ? Basis::Y : Basis::Z;
        }
        CHECK(settings[i].basis == want);
        for (int k = 0; k < 4; ++k) {
            const auto [h, q] = analyzer_angles(settings[i].basis[k]);
            CHECK(settings[i].hwp_rad[k] == doctest::Approx(h));
            CHECK(settings[i].qwp_rad[k] == doctest::Approx(q));
        }
    }
    for (int i = 81; i < 97; ++i) {
        const int bits = i - 81;
        for (int k = 0; k < 4; ++k) {
            const Basis want = ((bits >> (3 - k)) & 1) ? Basis::MinusZ : Basis::Z;
            CHECK(settings[i].basis[k] == want);
        }
    }
}

TEST_CASE("analyzer angles realize the intended projections") {
    using VC = Eigen::Vector2cd;
    auto overlap = [](const VC& a, const VC& b) { return std::abs(a.dot(b)); };

    const auto [hz, qz] = analyzer_angles(Basis::Z);
    auto [zp, zm] = analyzer_vectors(hz, qz);
    CHECK(overlap(VC(1, 0), zp) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(overlap(VC(0, 1), zm) == doctest::Approx(1.0).epsilon(1e-12));

    const auto [hm, qm] = analyzer_angles(Basis::MinusZ);
    CHECK(hm == doctest::Approx(kPi / 4));
    auto [mp, mm] = analyzer_vectors(hm, qm);
    CHECK(overlap(VC(0, 1), mp) == doctest::Approx(1.0).epsilon(1e-12));

    const double r = 1.0 / std::sqrt(2.0);
    const auto [hx, qx] = analyzer_angles(Basis::X);
    CHECK(hx == doctest::Approx(kPi / 8));
    CHECK(qx == doctest::Approx(kPi / 4));
    auto [xp, xm] = analyzer_vectors(hx, qx);
    CHECK(overlap(VC(r, r), xp) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(overlap(VC(r, -r), xm) == doctest::Approx(1.0).epsilon(1e-12));

    const auto [hy, qy] = analyzer_angles(Basis::Y);
    auto [yp, ym] = analyzer_vectors(hy, qy);
    CHECK(overlap(VC(r, cxd(0, r)), yp) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(overlap(VC(r, cxd(0, -r)), ym) == doctest::Approx(1.0).epsilon(1e-12));

    // any analyzer splits into an orthonormal pair
    auto rng = make_engine(2, "analyzer");
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (int i = 0; i < 100; ++i) {
        auto [vp, vm] = analyzer_vectors(ang(rng), ang(rng));
        CHECK(vp.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(vm.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(overlap(vp, vm) < 1e-12);
    }
}

TEST_CASE("outcome projectors tile the identity and encode efficiencies") {
    const auto zzzz = MeasurementSetting::from_basis(
        {Basis::Z, Basis::Z, Basis::Z, Basis::Z});
    Mat p0 = outcome_projector(zzzz, 0);
    CHECK(std::abs(p0(0, 0) - 1.0) < 1e-12);
    CHECK(p0.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-12));

    auto rng = make_engine(9, "projector");
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (int rep = 0; rep < 20; ++rep) {
        MeasurementSetting s = zzzz;
        for (int k = 0; k < 4; ++k) {
            s.hwp_rad[k] = ang(rng);
            s.qwp_rad[k] = ang(rng);
        }
        Mat sum = Mat::Zero(16, 16);
        for (int o = 0; o < 16; ++o) sum += outcome_projector(s, o);
        CHECK((sum - Mat::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-12);
    }

    // GHZ in the all-X setting populates even-parity outcomes only
    const auto xxxx = MeasurementSetting::from_basis(
        {Basis::X, Basis::X, Basis::X, Basis::X});
    const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.0));
    for (int o = 0; o < 16; ++o) {
        const double pr = (outcome_projector(xxxx, o) * ghz.matrix()).trace().real();
        if (parity(o) == 0)
            CHECK(pr == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
        else
            CHECK(std::abs(pr) < 1e-12);
    }

    // outcome 5 reads minus on arms 1 and 3: eta = eff0 * eff2
    const Efficiencies eff{0.5, 0.25, 0.8, 0.9};
    const Mat scaled = outcome_projector(zzzz, 5, eff);
    const Mat plain = outcome_projector(zzzz, 5);
    CHECK((scaled - 0.5 * 0.8 * plain).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("count simulation follows the outcome distribution") {
    Vec h = Vec::Zero(16);
    h(0) = 1.0;
    const DensityMatrix hhhh = DensityMatrix::from_pure(PureState(4, h));
    const auto zzzz = MeasurementSetting::from_basis(
        {Basis::Z, Basis::Z, Basis::Z, Basis::Z});
    const Efficiencies unit{1, 1, 1, 1};

    const CountRecord rec = simulate_counts(hhhh, zzzz, 1e4, unit, 7);
    for (int o = 1; o < 16; ++o) CHECK(rec.counts[o] == 0);
    CHECK(std::abs(static_cast<double>(rec.counts[0]) - 1e4) < 500.0);

    const CountRecord again = simulate_counts(hhhh, zzzz, 1e4, unit, 7);
    CHECK(rec.counts == again.counts);
    const CountRecord other = simulate_counts(hhhh, zzzz, 1e4, unit, 8);
    CHECK(rec.counts != other.counts);

    const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.0));
    const auto xxxx = MeasurementSetting::from_basis(
        {Basis::X, Basis::X, Basis::X, Basis::X});
    const CountRecord gx = simulate_counts(ghz, xxxx, 16000, unit, 3);
    for (int o = 0; o < 16; ++o) {
        if (parity(o) == 1)
            CHECK(gx.counts[o] == 0);
        else
            CHECK(std::abs(static_cast<double>(gx.counts[o]) - 2000.0) < 300.0);
    }
}

TEST_CASE("detector ratios are recovered from the Z block") {
    const auto settings = settings_97();
    const std::vector<MeasurementSetting> zblock(settings.begin() + 81, settings.end());
    const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.0));
    const Efficiencies truth{1.0, 0.5, 1.0, 0.8};

    // deterministic records built from exact expectations
    std::vector<CountRecord> exact;
    for (const auto& s : zblock) {
        CountRecord r;
        r.setting = s;
        for (int o = 0; o < 16; ++o) {
            const double mu =
                1e6 * (outcome_projector(s, o, truth) * ghz.matrix()).trace().real();
            r.counts[o] = static_cast<int64_t>(std::llround(mu));
        }
        exact.push_back(r);
    }
    const Efficiencies fit = calibrate_efficiencies(exact);
    for (int k = 0; k < 4; ++k) CHECK(fit[k] == doctest::Approx(truth[k]).epsilon(2e-3));

    // Poisson counts land within a couple percent
    std::vector<CountRecord> noisy;
    uint64_t seed = 100;
    for (const auto& s : zblock)
        noisy.push_back(simulate_counts(ghz, s, 1e5, truth, seed++));
    const Efficiencies nf = calibrate_efficiencies(noisy);
    for (int k = 0; k < 4; ++k) CHECK(nf[k] == doctest::Approx(truth[k]).epsilon(0.02));
}

TEST_CASE("least-squares reconstruction is exact on noiseless data") {
    const auto settings = settings_97();
    const Efficiencies unit{1, 1, 1, 1};
    auto rng = make_engine(21, "lre");

    const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.3));
    Mat back = lre_reconstruct_values(settings, expected_values(settings, ghz, unit), unit);
    CHECK((back - ghz.matrix()).cwiseAbs().maxCoeff() < 1e-10);

    for (int rep = 0; rep < 10; ++rep) {
        const DensityMatrix rho = random_density_dm(4, 0.0, rng);
        Mat m = lre_reconstruct_values(settings, expected_values(settings, rho, unit), unit);
        CHECK((m - rho.matrix()).cwiseAbs().maxCoeff() < 1e-10);
    }

    // detector-efficiency reweighting cancels exactly
    const Efficiencies skew{1.0, 0.6, 0.85, 1.0};
    const DensityMatrix rho = random_density_dm(4, 0.5, rng);
    Mat m = lre_reconstruct_values(settings, expected_values(settings, rho, skew), skew);
    CHECK((m - rho.matrix()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("finite counts push the linear estimate outside the state space") {
    const auto settings = settings_97();
    const Efficiencies unit{1, 1, 1, 1};
    const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.0));
    std::vector<CountRecord> records;
    uint64_t seed = 500;
    for (const auto& s : settings) records.push_back(simulate_counts(ghz, s, 100, unit, seed++));
    const Mat est = lre_reconstruct(records, unit);
    Eigen::SelfAdjointEigenSolver<Mat> eig(est);
    CHECK(eig.eigenvalues().minCoeff() < -1e-4);
    CHECK(std::abs(est.trace().real() - 1.0) < 1e-10);
}

TEST_CASE("state-space projection matches the simplex oracle") {
    // worked examples
    Mat d2 = Mat::Zero(2, 2);
    d2(0, 0) = 1.2;
    d2(1, 1) = -0.2;
    const Mat p2 = mle_project(d2).matrix();
    CHECK(std::abs(p2(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(p2(1, 1)) < 1e-12);

    Mat d4 = Mat::Zero(4, 4);
    d4(0, 0) = 0.7;
    d4(1, 1) = 0.5;
    d4(2, 2) = -0.1;
    d4(3, 3) = -0.1;
    const Mat p4 = mle_project(d4).matrix();
    CHECK(std::abs(p4(0, 0) - 0.6) < 1e-12);
    CHECK(std::abs(p4(1, 1) - 0.4) < 1e-12);
    CHECK(std::abs(p4(2, 2)) < 1e-12);

    auto rng = make_engine(33, "mle-fuzz");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int dim : {2, 4}) {
        for (int rep = 0; rep < 200; ++rep) {
            // random Hermitian with unit trace
            Mat g(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) g(i, j) = cxd(gauss(rng), gauss(rng));
            Mat h = 0.5 * (g + g.adjoint());
            h -= (h.trace().real() - 1.0) / dim * Mat::Identity(dim, dim);

            Eigen::SelfAdjointEigenSolver<Mat> eig(h);
            std::vector<double> mu(eig.eigenvalues().data(),
                                   eig.eigenvalues().data() + dim);
            const std::vector<double> lam = oracle::nearest_simplex_point(mu);
            Mat want = Mat::Zero(dim, dim);
            for (int i = 0; i < dim; ++i)
                want += lam[static_cast<size_t>(i)] * eig.eigenvectors().col(i) *
                        eig.eigenvectors().col(i).adjoint();

            const Mat got = mle_project(h).matrix();
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
        }
    }

    // idempotence and feasibility on 16-dim inputs
    for (int rep = 0; rep < 100; ++rep) {
        Mat g(16, 16);
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) g(i, j) = cxd(gauss(rng), gauss(rng));
        Mat h = 0.5 * (g + g.adjoint());
        h -= (h.trace().real() - 1.0) / 16.0 * Mat::Identity(16, 16);
        const DensityMatrix p = mle_project(h);
        CHECK(std::abs(p.matrix().trace().real() - 1.0) < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat> eig(p.matrix());
        CHECK(eig.eigenvalues().minCoeff() > -1e-12);
        const Mat again = mle_project(p.matrix()).matrix();
        CHECK((again - p.matrix()).cwiseAbs().maxCoeff() < 1e-10);
    }

    // a state already inside the space passes through untouched
    auto rng2 = make_engine(34, "mle-id");
    const DensityMatrix rho = random_density_dm(4, 0.0, rng2);
    CHECK((mle_project(rho.matrix()).matrix() - rho.matrix()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("full reconstruction pipeline reaches high fidelity") {
    const auto settings = settings_97();
    const Efficiencies unit{1, 1, 1, 1};
    auto rng = make_engine(55, "pipeline");
    const PureState ghz = ghz_state(4, 0.0);

    // Reconstruction infidelity at 1e4 counts/setting is dominated by shot
    // noise scrambling the truth's small eigenvalues, so the reachable bound
    // scales with purity: near-pure states clear 0.99, purity-0.9 blends sit
    // around 0.97.
    for (int rep = 0; rep < 3; ++rep) {
        const double min_purity = rep == 2 ? 0.998 : 0.9;
        const DensityMatrix truth = random_density_dm(4, min_purity, rng);
        std::vector<CountRecord> records;
        uint64_t seed = 1000 + static_cast<uint64_t>(rep) * 200;
        for (const auto& s : settings)
            records.push_back(simulate_counts(truth, s, 1e4, unit, seed++));
        ReconstructionOptions opts;
        opts.mc_samples = 0;
        const ReconstructionResult res = reconstruct(records, ghz, opts);
        CHECK(res.method == "LRE+MLE");
        const double f = oracle::uhlmann_fidelity(res.rho.matrix(), truth.matrix());
        CHECK(f > (rep == 2 ? 0.99 : 0.96));
    }

    // skewed detectors are calibrated away by the Z block
    const DensityMatrix gdm = DensityMatrix::from_pure(ghz);
    const Efficiencies skew{1.0, 0.6, 0.8, 1.0};
    std::vector<CountRecord> records;
    uint64_t seed = 4000;
    for (const auto& s : settings)
        records.push_back(simulate_counts(gdm, s, 5e3, skew, seed++));
    ReconstructionOptions opts;
    opts.mc_samples = 0;
    const ReconstructionResult res = reconstruct(records, ghz, opts);
    CHECK(res.fidelity_to_ghz > 0.97);

    opts.apply_mle = false;
    CHECK(reconstruct(records, ghz, opts).method == "LRE");
}

TEST_CASE("bootstrap error bars are deterministic and policy independent") {
    const auto settings = settings_97();
    const Efficiencies unit{1, 1, 1, 1};
    const DensityMatrix ghz = DensityMatrix::from_pure(ghz_state(4, 0.0));
    std::vector<CountRecord> records;
    uint64_t seed = 9000;
    for (const auto& s : settings)
        records.push_back(simulate_counts(ghz, s, 1000, unit, seed++));

    const PureState target = ghz_state(4, 0.0);
    const MonteCarloResult a =
        monte_carlo_errors(records, target, 20, 0.0017, 77, ExecPolicy::parallel);
    const MonteCarloResult b =
        monte_carlo_errors(records, target, 20, 0.0017, 77, ExecPolicy::serial);
    CHECK(a.fidelity_mean == b.fidelity_mean);
    CHECK(a.fidelity_std == b.fidelity_std);
    CHECK(a.n_failed == 0);
    CHECK(a.n_samples == 20);
    CHECK(a.fidelity_std > 0.0);

    // huge counts and frozen angles shrink the spread
    std::vector<CountRecord> big;
    seed = 9500;
    for (const auto& s : settings) big.push_back(simulate_counts(ghz, s, 1e7, unit, seed++));
    const MonteCarloResult tight = monte_carlo_errors(big, target, 10, 0.0, 78);
    CHECK(tight.fidelity_std < 2e-3);
    CHECK(tight.fidelity_std < a.fidelity_std);
}
