#include "ghzsim/spectral.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ghzsim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kC_nm_per_ps = 299792.458;  // speed of light

double omega(double lambda_nm) { return 2.0 * kPi * kC_nm_per_ps / lambda_nm; }  // rad/ps

double sinc(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

// Gaussian amplitude envelope exp(-a^2 W^2 / 2) for a transform-limited pulse
// with intensity-FWHM duration T: a = T / (2 sqrt(ln 2)).
double pump_time_const_ps(const PumpEnvelope& p) {
    return p.pulse_duration_fwhm_ps / (2.0 * std::sqrt(std::numbers::ln2));
}

std::vector<double> make_axis(const GridAxes& axes) {
    if (axes.step_nm <= 0 || axes.max_nm <= axes.min_nm) {
        throw std::invalid_argument("build_jsa: bad grid axes");
    }
    const int n = static_cast<int>(std::floor((axes.max_nm - axes.min_nm) / axes.step_nm + 0.5)) + 1;
    std::vector<double> ax(n);
    for (int k = 0; k < n; ++k) ax[k] = axes.min_nm + k * axes.step_nm;
    return ax;
}

double filter_amplitude(const FilterSpec& f, double lambda_nm) {
    const double d = lambda_nm - f.center_nm;
    if (f.shape == FilterShape::rectangular) {
        return std::abs(d) <= f.fwhm_nm / 2.0 ? 1.0 : 0.0;
    }
    // intensity transmission exp(-4 ln2 d^2 / fwhm^2); amplitude is its sqrt
    return std::exp(-2.0 * std::numbers::ln2 * d * d / (f.fwhm_nm * f.fwhm_nm));
}

// Reduced density matrix of the idler photon heralded by the signal,
// rho_i = M M^dagger / ||M||_F^2 (rows of M indexed by idler wavelength).
Eigen::MatrixXcd heralded_marginal(const SpectralGrid& g) {
    const Eigen::MatrixXcd& m = g.amplitude();
    double n2 = m.squaredNorm();
    if (n2 <= 0) throw std::invalid_argument("spectral: all-zero grid");
    return (m * m.adjoint()) / n2;
}

}  // namespace

SpectralGrid::SpectralGrid(std::vector<double> lambda_s_nm, std::vector<double> lambda_i_nm,
                           Eigen::MatrixXcd amplitude)
    : ls_(std::move(lambda_s_nm)), li_(std::move(lambda_i_nm)), amp_(std::move(amplitude)) {
    if (amp_.rows() != static_cast<Eigen::Index>(li_.size()) ||
        amp_.cols() != static_cast<Eigen::Index>(ls_.size())) {
        throw std::invalid_argument("SpectralGrid: amplitude shape does not match axes");
    }
    for (const auto* ax : {&ls_, &li_}) {
        if (ax->size() < 2) throw std::invalid_argument("SpectralGrid: axis too short");
        const double step = (*ax)[1] - (*ax)[0];
        if (step <= 0) throw std::invalid_argument("SpectralGrid: axis not increasing");
        for (size_t k = 1; k < ax->size(); ++k) {
            if (std::abs((*ax)[k] - (*ax)[k - 1] - step) > 1e-9) {
                throw std::invalid_argument("SpectralGrid: axis step not uniform");
            }
        }
    }
    if (amp_.squaredNorm() <= 0.0) {
        throw std::invalid_argument("SpectralGrid: zero total intensity");
    }
}

SpectralGrid build_jsa(const PumpEnvelope& pump, const PhaseMatching& pm,
                       const GridAxes& axes, ExecPolicy policy) {
    if (pm.crystal_length_mm <= 0 || pm.poling_period_um <= 0) {
        throw std::invalid_argument("build_jsa: bad phase matching parameters");
    }
    if (pm.pm_center_nm < axes.min_nm || pm.pm_center_nm > axes.max_nm) {
        throw std::invalid_argument("build_jsa: grid does not cover pm_center");
    }
    auto ls = make_axis(axes);
    auto li = make_axis(axes);

    const double a = pump_time_const_ps(pump);
    // amplitude-bandwidth check: reject grids coarser than the pump envelope
    const double step_w = omega(pm.pm_center_nm) - omega(pm.pm_center_nm + axes.step_nm);
    const double pump_fwhm_w = 2.0 * std::sqrt(std::numbers::ln2) / a;  // intensity FWHM
    if (step_w > pump_fwhm_w) {
        throw std::invalid_argument("build_jsa: grid step exceeds pump bandwidth");
    }

    const double w0 = omega(pm.pm_center_nm);
    const double wp = omega(pump.center_wavelength_nm);
    const double half_lg = 0.5 * pm.crystal_length_mm * pm.gvm_ps_per_mm;

    const int nr = static_cast<int>(li.size());
    const int nc = static_cast<int>(ls.size());
    Eigen::MatrixXcd amp(nr, nc);

    auto fill_row = [&](int r) {
        const double nu_i = omega(li[r]) - w0;
        for (int c = 0; c < nc; ++c) {
            const double ws = omega(ls[c]);
            const double nu_s = ws - w0;
            const double mismatch = nu_s + nu_i + 2.0 * w0 - wp;  // energy conservation
            const double alpha = std::exp(-0.5 * a * a * mismatch * mismatch);
            const double phi = sinc(half_lg * (nu_s - pm.group_velocity_slope * nu_i));
            amp(r, c) = alpha * phi;
        }
    };

    if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < nr; ++r) fill_row(r);
    } else {
        for (int r = 0; r < nr; ++r) fill_row(r);
    }
    return SpectralGrid(std::move(ls), std::move(li), std::move(amp));
}

SpectralGrid apply_filter(const SpectralGrid& grid, const FilterSpec& signal_filter,
                          const FilterSpec& idler_filter) {
    const auto& ls = grid.lambda_s();
    const auto& li = grid.lambda_i();
    for (const auto& [f, ax] : {std::pair{&signal_filter, &ls}, std::pair{&idler_filter, &li}}) {
        if (f->fwhm_nm <= 0) throw std::invalid_argument("apply_filter: fwhm must be positive");
        if (f->center_nm < ax->front() || f->center_nm > ax->back()) {
            throw std::invalid_argument("apply_filter: filter center outside grid");
        }
    }
    Eigen::MatrixXcd amp = grid.amplitude();
    for (Eigen::Index r = 0; r < amp.rows(); ++r) {
        const double fi = filter_amplitude(idler_filter, li[r]);
        for (Eigen::Index c = 0; c < amp.cols(); ++c) {
            amp(r, c) *= fi * filter_amplitude(signal_filter, ls[c]);
        }
    }
    return SpectralGrid(ls, li, std::move(amp));
}

double schmidt_purity(const SpectralGrid& grid) {
    Eigen::MatrixXcd m = grid.amplitude();
    const double n = m.norm();
    if (n <= 0) throw std::invalid_argument("schmidt_purity: all-zero grid");
    m /= n;
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
    double p = 0.0;
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
        const double s2 = svd.singularValues()(k) * svd.singularValues()(k);
        p += s2 * s2;
    }
    return p;
}

double hom_visibility(const SpectralGrid& grid_a, const SpectralGrid& grid_b,
                      double jitter_sigma_ps) {
    if (grid_a.lambda_s() != grid_b.lambda_s() || grid_a.lambda_i() != grid_b.lambda_i()) {
        throw std::invalid_argument("hom_visibility: grids must share axes");
    }
    if (jitter_sigma_ps < 0) throw std::invalid_argument("hom_visibility: negative jitter");

    Eigen::MatrixXcd ra = heralded_marginal(grid_a);
    Eigen::MatrixXcd rb = heralded_marginal(grid_b);
    double overlap = (ra * rb).trace().real();
    if (overlap < 0 && overlap > -1e-12) overlap = 0;
    if (overlap > 1 && overlap < 1 + 1e-9) overlap = 1;

    // rms width of the mean heralded marginal spectral intensity
    const auto& li = grid_a.lambda_i();
    double wsum = 0, mean = 0, var = 0;
    std::vector<double> wi(li.size());
    for (size_t k = 0; k < li.size(); ++k) {
        wi[k] = 0.5 * (ra(k, k).real() + rb(k, k).real());
        wsum += wi[k];
    }
    for (size_t k = 0; k < li.size(); ++k) mean += omega(li[k]) * wi[k] / wsum;
    for (size_t k = 0; k < li.size(); ++k) {
        const double d = omega(li[k]) - mean;
        var += d * d * wi[k] / wsum;
    }
    const double sigma_w = std::sqrt(var);
    if (sigma_w <= 0) return overlap;
    const double tau_c = 1.0 / (2.0 * sigma_w);  // rms coherence time, ps
    const double r = jitter_sigma_ps / tau_c;
    const double v_jitter = 1.0 / std::sqrt(1.0 + r * r);
    return overlap * v_jitter;
}

double dip_sigma_ps(const SpectralGrid& grid) {
    const Eigen::MatrixXcd rho = heralded_marginal(grid);
    const auto& li = grid.lambda_i();
    double wsum = 0, mean = 0, var = 0;
    for (size_t k = 0; k < li.size(); ++k) wsum += rho(k, k).real();
    for (size_t k = 0; k < li.size(); ++k) mean += omega(li[k]) * rho(k, k).real() / wsum;
    for (size_t k = 0; k < li.size(); ++k) {
        const double d = omega(li[k]) - mean;
        var += d * d * rho(k, k).real() / wsum;
    }
    if (var <= 0) throw std::invalid_argument("dip_sigma_ps: zero spectral width");
    return 1.0 / (std::sqrt(2.0) * std::sqrt(var));
}

HomScan hom_curve(double v, double sigma_ps, double c0, const std::vector<double>& delays_ps,
                  std::optional<uint64_t> noise_seed) {
    if (v < 0 || v > 1) throw std::invalid_argument("hom_curve: visibility outside [0,1]");
    if (sigma_ps <= 0) throw std::invalid_argument("hom_curve: sigma must be positive");
    if (c0 <= 0) throw std::invalid_argument("hom_curve: baseline must be positive");
    HomScan scan;
    scan.delays_ps = delays_ps;
    scan.coincidences.resize(delays_ps.size());
    std::mt19937_64 rng(noise_seed.value_or(0));
    for (size_t k = 0; k < delays_ps.size(); ++k) {
        const double t = delays_ps[k];
        const double mu = c0 * (1.0 - v * std::exp(-t * t / (2.0 * sigma_ps * sigma_ps)));
        if (noise_seed) {
            std::poisson_distribution<long> pd(mu);
            scan.coincidences[k] = static_cast<double>(pd(rng));
        } else {
            scan.coincidences[k] = mu;
        }
    }
    return scan;
}

HomFit fit_hom(const HomScan& scan) {
    const size_t n = scan.delays_ps.size();
    if (n != scan.coincidences.size()) throw std::invalid_argument("fit_hom: length mismatch");
    if (n < 5) throw std::invalid_argument("fit_hom: need at least 5 points");
    for (double c : scan.coincidences) {
        if (c < 0) throw std::invalid_argument("fit_hom: negative counts");
    }

    // initial guesses: baseline from the scan edges, dip depth from minimum,
    // sigma from the width at half depth
    const double span = std::abs(scan.delays_ps.back() - scan.delays_ps.front());
    double c0 = 0.0;
    {
        size_t ne = std::max<size_t>(1, n / 10);
        for (size_t k = 0; k < ne; ++k) c0 += scan.coincidences[k] + scan.coincidences[n - 1 - k];
        c0 /= 2.0 * ne;
    }
    double cmin = scan.coincidences[0], tmin = scan.delays_ps[0];
    for (size_t k = 0; k < n; ++k) {
        if (scan.coincidences[k] < cmin) { cmin = scan.coincidences[k]; tmin = scan.delays_ps[k]; }
    }
    if (c0 <= 0) c0 = 1.0;
    double v = std::clamp(1.0 - cmin / c0, 1e-3, 1.0);
    double sigma = 0.0;
    {
        const double half = c0 - 0.5 * (c0 - cmin);
        double lo = tmin, hi = tmin;
        for (size_t k = 0; k < n; ++k) {
            if (scan.coincidences[k] < half) {
                lo = std::min(lo, scan.delays_ps[k]);
                hi = std::max(hi, scan.delays_ps[k]);
            }
        }
        sigma = (hi - lo) / 2.355;
        if (sigma <= 0) sigma = span / 10.0;
    }

    // Levenberg-Marquardt on r_k = model(t_k) - y_k, params x = (v, sigma, c0)
    Eigen::Vector3d x(v, sigma, c0);
    auto residuals = [&](const Eigen::Vector3d& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(n);
        if (jac) jac->resize(n, 3);
        for (size_t k = 0; k < n; ++k) {
            const double t = scan.delays_ps[k];
            const double g = std::exp(-t * t / (2.0 * p(1) * p(1)));
            const double model = p(2) * (1.0 - p(0) * g);
            r(k) = model - scan.coincidences[k];
            if (jac) {
                (*jac)(k, 0) = -p(2) * g;
                (*jac)(k, 1) = -p(2) * p(0) * g * t * t / (p(1) * p(1) * p(1));
                (*jac)(k, 2) = 1.0 - p(0) * g;
            }
        }
    };

    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    residuals(x, r, &J);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    int iter = 0;
    bool converged = false;
    for (; iter < 200; ++iter) {
        Eigen::Matrix3d jtj = J.transpose() * J;
        Eigen::Vector3d g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, cost)) { converged = true; break; }
        Eigen::Matrix3d aug = jtj + lambda * Eigen::Matrix3d(jtj.diagonal().asDiagonal());
        Eigen::Vector3d step = aug.ldlt().solve(-g);
        Eigen::Vector3d xn = x + step;
        xn(1) = std::max(1e-6, std::abs(xn(1)));
        xn(2) = std::max(1e-12, xn(2));
        Eigen::VectorXd rn;
        residuals(xn, rn, nullptr);
        const double cn = rn.squaredNorm();
        if (cn < cost) {
            const double rel = (cost - cn) / std::max(1.0, cost);
            x = xn;
            residuals(x, r, &J);
            cost = cn;
            lambda = std::max(1e-12, lambda * 0.3);
            if (rel < 1e-14 && step.cwiseAbs().maxCoeff() < 1e-12) { converged = true; break; }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    if (!converged && iter >= 200) {
        std::ostringstream msg;
        msg << "fit_hom: no convergence after " << iter
            << " iterations, residual norm " << std::sqrt(cost);
        throw std::runtime_error(msg.str());
    }

    HomFit fit;
    fit.visibility = x(0);
    fit.sigma_ps = std::abs(x(1));
    fit.baseline = x(2);
    fit.tau_fwhm_ps = 2.0 * std::sqrt(2.0 * std::numbers::ln2) * fit.sigma_ps;
    fit.residual_norm = std::sqrt(cost);
    fit.iterations = iter;

    // parameter standard errors from s^2 (J^T J)^{-1}
    const double dof = static_cast<double>(n) - 3.0;
    const double s2 = dof > 0 ? cost / dof : 0.0;
    Eigen::Matrix3d cov = (J.transpose() * J).inverse() * s2;
    fit.visibility_err = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.sigma_err_ps = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.baseline_err = std::sqrt(std::max(0.0, cov(2, 2)));
    fit.tau_fwhm_err_ps = 2.0 * std::sqrt(2.0 * std::numbers::ln2) * fit.sigma_err_ps;
    return fit;
}

std::string grid_to_csv(const SpectralGrid& grid) {
    std::ostringstream out;
    out.precision(10);
    out << "idler_nm";
    for (double s : grid.lambda_s()) out << ',' << s;
    out << '\n';
    const Eigen::MatrixXd inten = grid.intensity();
    for (Eigen::Index r = 0; r < inten.rows(); ++r) {
        out << grid.lambda_i()[r];
        for (Eigen::Index c = 0; c < inten.cols(); ++c) out << ',' << inten(r, c);
        out << '\n';
    }
    return out.str();
}

std::string hom_scan_to_csv(const HomScan& scan) {
    std::ostringstream out;
    out.precision(10);
    out << "delay_ps,counts\n";
    for (size_t k = 0; k < scan.delays_ps.size(); ++k) {
        out << scan.delays_ps[k] << ',' << scan.coincidences[k] << '\n';
    }
    return out.str();
}

HomScan hom_scan_from_csv(const std::string& text) {
    HomScan scan;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("hom csv: empty");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("hom csv: bad row");
        scan.delays_ps.push_back(std::stod(line.substr(0, comma)));
        scan.coincidences.push_back(std::stod(line.substr(comma + 1)));
    }
    return scan;
}

}  // namespace ghzsim
