#include "ghzsim/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "ghzsim/rng.hpp"

namespace ghzsim {

namespace {

const std::array<Mat2, 4>& pauli2() {
    static const std::array<Mat2, 4> p = [] {
        std::array<Mat2, 4> q;
        q[0] = Mat2::Identity();
        q[1] << 0, 1, 1, 0;
        q[2] << 0, cxd(0, -1), cxd(0, 1), 0;
        q[3] << 1, 0, 0, -1;
        return q;
    }();
    return p;
}

// all 256 four-qubit Pauli products, index in base 4 with qubit 0 as the
// most significant digit
const std::vector<Mat>& pauli16() {
    static const std::vector<Mat> basis = [] {
        std::vector<Mat> b(256);
        for (int i = 0; i < 256; ++i) {
            Mat m = Mat::Identity(1, 1);
            for (int k = 0; k < 4; ++k) {
                const int d = (i >> (2 * (3 - k))) & 3;
                m = kron(m, pauli2()[d]);
            }
            b[i] = m;
        }
        return b;
    }();
    return basis;
}

double eta_of_outcome(int outcome, const Efficiencies& eff) {
    double eta = 1.0;
    for (int k = 0; k < 4; ++k)
        if (((outcome >> (3 - k)) & 1) == 0) eta *= eff[k];
    return eta;
}

bool is_z_like(const MeasurementSetting& s) {
    return std::all_of(s.basis.begin(), s.basis.end(),
                       [](Basis b) { return b == Basis::Z || b == Basis::MinusZ; });
}

// indices of a complete 16-setting Z/-Z block inside `records`, or empty
std::vector<size_t> z_block_indices(const std::vector<CountRecord>& records) {
    std::vector<size_t> idx;
    std::set<int> combos;
    for (size_t i = 0; i < records.size(); ++i) {
        if (!is_z_like(records[i].setting)) continue;
        int c = 0;
        for (int k = 0; k < 4; ++k)
            c |= (records[i].setting.basis[k] == Basis::MinusZ) << (3 - k);
        if (combos.insert(c).second) idx.push_back(i);
    }
    if (combos.size() != 16) return {};
    return idx;
}

}  // namespace

std::pair<double, double> analyzer_angles(Basis b) {
    switch (b) {
        case Basis::Z:
            return {0.0, 0.0};
        case Basis::MinusZ:
            return {M_PI / 4, 0.0};
        case Basis::X:
            return {M_PI / 8, M_PI / 4};
        case Basis::Y:
            return {0.0, M_PI / 4};
    }
    throw std::invalid_argument("analyzer_angles: unknown basis");
}

MeasurementSetting MeasurementSetting::from_basis(const std::array<Basis, 4>& b) {
    MeasurementSetting s;
    s.basis = b;
    for (int k = 0; k < 4; ++k) {
        auto [h, q] = analyzer_angles(b[k]);
        s.hwp_rad[k] = h;
        s.qwp_rad[k] = q;
    }
    return s;
}

std::pair<Eigen::Vector2cd, Eigen::Vector2cd> analyzer_vectors(double hwp_rad, double qwp_rad) {
    const Mat2 u = waveplate_jones(WaveplateKind::half, hwp_rad).matrix() *
                   waveplate_jones(WaveplateKind::quarter, qwp_rad).matrix();
    const Mat2 ud = u.adjoint();
    return {ud.col(0), ud.col(1)};
}

std::vector<MeasurementSetting> settings_97() {
    std::vector<MeasurementSetting> out;
    out.reserve(97);
    const std::array<Basis, 3> xyz{Basis::X, Basis::Y, Basis::Z};
    for (int i = 0; i < 81; ++i) {
        std::array<Basis, 4> b;
        int rem = i;
        for (int k = 3; k >= 0; --k) {
            b[k] = xyz[rem % 3];
            rem /= 3;
        }
        out.push_back(MeasurementSetting::from_basis(b));
    }
    for (int i = 0; i < 16; ++i) {
        std::array<Basis, 4> b;
        for (int k = 0; k < 4; ++k)
            b[k] = ((i >> (3 - k)) & 1) ? Basis::MinusZ : Basis::Z;
        out.push_back(MeasurementSetting::from_basis(b));
    }
    return out;
}

Mat outcome_projector(const MeasurementSetting& setting, int outcome,
                      const std::optional<Efficiencies>& efficiencies) {
    if (outcome < 0 || outcome > 15)
        throw std::invalid_argument("outcome_projector: outcome outside [0,15]");
    Mat proj = Mat::Identity(1, 1);
    for (int k = 0; k < 4; ++k) {
        auto [vp, vm] = analyzer_vectors(setting.hwp_rad[k], setting.qwp_rad[k]);
        const Eigen::Vector2cd& v = ((outcome >> (3 - k)) & 1) ? vm : vp;
        proj = kron(proj, v * v.adjoint());
    }
    if (efficiencies) proj *= eta_of_outcome(outcome, *efficiencies);
    return proj;
}

CountRecord simulate_counts(const DensityMatrix& rho, const MeasurementSetting& setting,
                            double mean_total, const Efficiencies& efficiencies, uint64_t seed) {
    if (rho.n_qubits() != 4) throw std::invalid_argument("simulate_counts: need 4 qubits");
    if (mean_total < 0) throw std::invalid_argument("simulate_counts: negative mean");
    std::mt19937_64 rng = make_engine(seed, "counts", 0);
    CountRecord rec;
    rec.setting = setting;
    for (int o = 0; o < 16; ++o) {
        const Mat proj = outcome_projector(setting, o);
        const double mu =
            mean_total * eta_of_outcome(o, efficiencies) * (proj * rho.matrix()).trace().real();
        if (mu <= 0) {
            rec.counts[o] = 0;
        } else {
            std::poisson_distribution<int64_t> pd(mu);
            rec.counts[o] = pd(rng);
        }
    }
    return rec;
}

Efficiencies calibrate_efficiencies(const std::vector<CountRecord>& z_block) {
    if (z_block.size() != 16)
        throw std::invalid_argument("calibrate_efficiencies: need the 16 Z/-Z settings");
    std::set<int> combos;
    for (const auto& rec : z_block) {
        if (!is_z_like(rec.setting))
            throw std::invalid_argument("calibrate_efficiencies: non Z/-Z setting in block");
        int c = 0;
        for (int k = 0; k < 4; ++k)
            c |= (rec.setting.basis[k] == Basis::MinusZ) << (3 - k);
        combos.insert(c);
    }
    if (combos.size() != 16)
        throw std::invalid_argument("calibrate_efficiencies: block must cover all 16 combinations");
    Efficiencies eff{};
    for (int k = 0; k < 4; ++k) {
        double plus = 0.0, minus = 0.0;
        for (const auto& rec : z_block) {
            for (int o = 0; o < 16; ++o) {
                if ((o >> (3 - k)) & 1)
                    minus += static_cast<double>(rec.counts[o]);
                else
                    plus += static_cast<double>(rec.counts[o]);
            }
        }
        if (minus <= 0)
            throw std::runtime_error("calibrate_efficiencies: no minus counts on an arm");
        eff[k] = plus / minus;
    }
    return eff;
}

LreDesign::LreDesign(const std::vector<MeasurementSetting>& settings,
                     const Efficiencies& efficiencies)
    : n_settings_(settings.size()), eff_(efficiencies) {
    if (settings.empty()) throw std::invalid_argument("LreDesign: no settings");
    for (double e : eff_)
        if (e <= 0) throw std::invalid_argument("LreDesign: nonpositive efficiency");
    rows_.resize(static_cast<Eigen::Index>(16 * n_settings_), 255);
    for (size_t s = 0; s < n_settings_; ++s) {
        // per arm: expectation of each Pauli in each analyzer outcome state
        double table[4][4][2];
        for (int k = 0; k < 4; ++k) {
            auto [vp, vm] = analyzer_vectors(settings[s].hwp_rad[k], settings[s].qwp_rad[k]);
            for (int d = 0; d < 4; ++d) {
                table[k][d][0] = (vp.adjoint() * pauli2()[d] * vp).real()(0);
                table[k][d][1] = (vm.adjoint() * pauli2()[d] * vm).real()(0);
            }
        }
        for (int o = 0; o < 16; ++o) {
            const Eigen::Index row = static_cast<Eigen::Index>(16 * s + o);
            for (int i = 1; i < 256; ++i) {
                double t = 1.0;
                for (int k = 0; k < 4; ++k) {
                    const int d = (i >> (2 * (3 - k))) & 3;
                    t *= table[k][d][(o >> (3 - k)) & 1];
                }
                rows_(row, i - 1) = t / 16.0;
            }
        }
    }
    normal_.compute(rows_.transpose() * rows_);
    if (normal_.info() != Eigen::Success || !normal_.isPositive())
        throw std::runtime_error("LreDesign: settings do not determine the state");
}

Mat LreDesign::solve(const std::vector<std::array<double, 16>>& values) const {
    if (values.size() != n_settings_)
        throw std::invalid_argument("LreDesign::solve: value count mismatch");
    Eigen::VectorXd y(static_cast<Eigen::Index>(16 * n_settings_));
    for (size_t s = 0; s < n_settings_; ++s) {
        std::array<double, 16> w;
        double total = 0.0;
        for (int o = 0; o < 16; ++o) {
            if (values[s][o] < 0)
                throw std::invalid_argument("LreDesign::solve: negative value");
            w[o] = values[s][o] / eta_of_outcome(o, eff_);
            total += w[o];
        }
        for (int o = 0; o < 16; ++o) {
            const double f = total > 0 ? w[o] / total : 1.0 / 16.0;
            y(static_cast<Eigen::Index>(16 * s + o)) = f - 1.0 / 16.0;
        }
    }
    const Eigen::VectorXd c = normal_.solve(rows_.transpose() * y);
    Mat rho = Mat::Identity(16, 16);
    for (int i = 1; i < 256; ++i) rho += c(i - 1) * pauli16()[i];
    return rho / 16.0;
}

Mat lre_reconstruct_values(const std::vector<MeasurementSetting>& settings,
                           const std::vector<std::array<double, 16>>& values,
                           const Efficiencies& efficiencies) {
    return LreDesign(settings, efficiencies).solve(values);
}

Mat lre_reconstruct(const std::vector<CountRecord>& records, const Efficiencies& efficiencies) {
    std::vector<MeasurementSetting> settings;
    std::vector<std::array<double, 16>> values;
    settings.reserve(records.size());
    values.reserve(records.size());
    for (const auto& rec : records) {
        settings.push_back(rec.setting);
        std::array<double, 16> v;
        for (int o = 0; o < 16; ++o) v[o] = static_cast<double>(rec.counts[o]);
        values.push_back(v);
    }
    return lre_reconstruct_values(settings, values, efficiencies);
}

DensityMatrix mle_project(const Mat& hermitian) {
    const Eigen::Index d = hermitian.rows();
    if (d != hermitian.cols() || d < 2)
        throw std::invalid_argument("mle_project: need a square matrix");
    int n = 0;
    while ((Eigen::Index(1) << (n + 1)) <= d) ++n;
    if ((Eigen::Index(1) << n) != d)
        throw std::invalid_argument("mle_project: dimension is not a power of two");
    Mat h = 0.5 * (hermitian + hermitian.adjoint());
    const double tr = h.trace().real();
    if (tr <= 0) throw std::runtime_error("mle_project: nonpositive trace");
    h /= tr;
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("mle_project: eigensolver failed");
    Eigen::VectorXd lam = es.eigenvalues();
    std::vector<bool> active(d, true);
    int n_active = static_cast<int>(d);
    while (true) {
        int worst = -1;
        for (Eigen::Index i = 0; i < d; ++i)
            if (active[i] && lam(i) < 0 && (worst < 0 || lam(i) < lam(worst)))
                worst = static_cast<int>(i);
        if (worst < 0) break;
        const double deficit = lam(worst);
        lam(worst) = 0.0;
        active[worst] = false;
        --n_active;
        for (Eigen::Index i = 0; i < d; ++i)
            if (active[i]) lam(i) += deficit / n_active;
    }
    Mat rho = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        if (lam(i) > 0) rho += lam(i) * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace().real();
    return DensityMatrix(n, rho);
}

MonteCarloResult monte_carlo_errors(const std::vector<CountRecord>& records,
                                    const PureState& target, int n_samples,
                                    double angle_sigma_rad, uint64_t seed, ExecPolicy policy) {
    if (n_samples < 2) throw std::invalid_argument("monte_carlo_errors: need >= 2 samples");
    if (records.empty()) throw std::invalid_argument("monte_carlo_errors: no records");
    const std::vector<size_t> zidx = z_block_indices(records);

    std::vector<double> fvals(n_samples, 0.0);
    std::vector<char> ok(n_samples, 0);
    auto run = [&](int i) {
        try {
            std::mt19937_64 rng = make_engine(seed, "mc", static_cast<uint64_t>(i));
            std::normal_distribution<double> ang(0.0, angle_sigma_rad);
            std::vector<CountRecord> res = records;
            for (auto& rec : res) {
                for (int k = 0; k < 4; ++k) {
                    rec.setting.hwp_rad[k] += ang(rng);
                    rec.setting.qwp_rad[k] += ang(rng);
                }
                for (int o = 0; o < 16; ++o) {
                    if (rec.counts[o] > 0) {
                        std::poisson_distribution<int64_t> pd(
                            static_cast<double>(rec.counts[o]));
                        rec.counts[o] = pd(rng);
                    }
                }
            }
            Efficiencies eff{1, 1, 1, 1};
            if (!zidx.empty()) {
                std::vector<CountRecord> zb;
                zb.reserve(16);
                for (size_t j : zidx) zb.push_back(res[j]);
                eff = calibrate_efficiencies(zb);
            }
            const DensityMatrix rho = mle_project(lre_reconstruct(res, eff));
            fvals[i] = fidelity(rho, target);
            ok[i] = 1;
        } catch (const std::exception&) {
            ok[i] = 0;
        }
    };
    if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n_samples; ++i) run(i);
    } else {
        for (int i = 0; i < n_samples; ++i) run(i);
    }

    MonteCarloResult out;
    out.n_samples = n_samples;
    double mean = 0.0;
    int m = 0;
    for (int i = 0; i < n_samples; ++i) {
        if (ok[i]) {
            mean += fvals[i];
            ++m;
        } else {
            ++out.n_failed;
        }
    }
    if (out.n_failed > 0.01 * n_samples)
        throw std::runtime_error("monte_carlo_errors: more than 1% of samples failed");
    mean /= m;
    double var = 0.0;
    for (int i = 0; i < n_samples; ++i)
        if (ok[i]) var += (fvals[i] - mean) * (fvals[i] - mean);
    out.fidelity_mean = mean;
    out.fidelity_std = m > 1 ? std::sqrt(var / (m - 1)) : 0.0;
    return out;
}

ReconstructionResult reconstruct(const std::vector<CountRecord>& records, const PureState& target,
                                 const ReconstructionOptions& options) {
    if (records.empty()) throw std::invalid_argument("reconstruct: no records");
    Efficiencies eff{1, 1, 1, 1};
    const std::vector<size_t> zidx = z_block_indices(records);
    if (!zidx.empty()) {
        std::vector<CountRecord> zb;
        zb.reserve(16);
        for (size_t j : zidx) zb.push_back(records[j]);
        eff = calibrate_efficiencies(zb);
    }
    const Mat h = lre_reconstruct(records, eff);
    const DensityMatrix rho = mle_project(h);
    ReconstructionResult out{rho, 0.0, 0.0, options.apply_mle ? "LRE+MLE" : "LRE", 0};
    if (options.apply_mle) {
        out.fidelity_to_ghz = fidelity(rho, target);
    } else {
        // fidelity straight from the linear estimate; rho stays the closest
        // physical state
        out.fidelity_to_ghz =
            std::clamp((target.amplitudes().adjoint() * h * target.amplitudes()).real()(0), 0.0,
                       1.0);
    }
    if (options.mc_samples >= 2) {
        MonteCarloResult mc = monte_carlo_errors(records, target, options.mc_samples,
                                                 options.angle_sigma_rad, options.seed,
                                                 options.policy);
        out.fidelity_err = mc.fidelity_std;
        out.mc_samples = options.mc_samples;
    }
    return out;
}

}  // namespace ghzsim
