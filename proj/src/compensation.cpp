#include "ghzsim/compensation.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "ghzsim/rng.hpp"
#include "nelder_mead.hpp"

namespace ghzsim {

namespace {

// QWP(a) HWP(b) QWP(c) = exp(-i a Y) exp(+i alpha X) exp(+i c Y) exactly,
// with alpha = 2b - a - c (the waveplate determinant phases cancel).
// Writing an SU(2) target as w I + i (x X + y Y + z Z):
//   w - i y = cos(alpha) e^{i (a - c)}
//   x - i z = sin(alpha) e^{i (a + c)}
// which inverts in closed form.
WaveplateSetting decompose_normalized(const Mat2& su2) {
    const cxd m00 = su2(0, 0), m01 = su2(0, 1), m10 = su2(1, 0), m11 = su2(1, 1);
    const double w = 0.5 * (m00.real() + m11.real());
    const double z = 0.5 * (m00.imag() - m11.imag());
    const double x = 0.5 * (m01.imag() + m10.imag());
    const double y = 0.5 * (m01.real() - m10.real());

    const cxd A(w, -y);  // cos(alpha) e^{i delta}
    const cxd B(x, -z);  // sin(alpha) e^{i sigma}
    const double alpha = std::atan2(std::abs(B), std::abs(A));
    const double delta = std::abs(A) > 1e-15 ? std::arg(A) : 0.0;
    const double sigma = std::abs(B) > 1e-15 ? std::arg(B) : 0.0;

    WaveplateSetting s;
    s.x0 = normalize_axis_angle(0.5 * (sigma + delta));           // a
    s.x2 = normalize_axis_angle(0.5 * (sigma - delta));           // c
    s.x1 = normalize_axis_angle(0.5 * (alpha + sigma));           // b
    return s;
}

Vec plan_target_vector(const std::array<Mat2, 3>& us) {
    // (1 x U1 x U2 x U3) |GHZ_0>
    Vec vh = Vec::Ones(1), vv = Vec::Ones(1);
    const Eigen::Vector2cd eh(1, 0), ev(0, 1);
    auto extend = [](const Vec& v, const Eigen::Vector2cd& a) {
        Vec next(v.size() * 2);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            next(2 * i) = v(i) * a(0);
            next(2 * i + 1) = v(i) * a(1);
        }
        return next;
    };
    vh = extend(vh, eh);
    vv = extend(vv, ev);
    for (int k = 0; k < 3; ++k) {
        vh = extend(vh, us[k].col(0));
        vv = extend(vv, us[k].col(1));
    }
    return (vh + vv) / std::sqrt(2.0);
}

double plan_fidelity(const Mat& rho, const Eigen::VectorXd& angles) {
    std::array<Mat2, 3> us;
    for (int k = 0; k < 3; ++k)
        us[k] = WaveplateSetting{angles(3 * k), angles(3 * k + 1), angles(3 * k + 2)}.unitary();
    const Vec v = plan_target_vector(us);
    return std::clamp((v.adjoint() * rho * v).real()(0), 0.0, 1.0);
}

}  // namespace

WaveplateSetting decompose_su2(const LocalUnitary& u) {
    const Mat2& m = u.matrix();
    const cxd det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const cxd root = std::sqrt(det);
    WaveplateSetting s = decompose_normalized(m / root);
    // the SU(2) lift is unique only up to sign; verify and take the other
    // branch when the first misses
    const Mat2 rec = s.unitary();
    const double overlap = std::abs((rec.adjoint() * m).trace());
    if (overlap < 2.0 - 1e-9) {
        WaveplateSetting alt = decompose_normalized(-(m / root));
        const Mat2 rec2 = alt.unitary();
        if (std::abs((rec2.adjoint() * m).trace()) > overlap) return alt;
    }
    return s;
}

CompensationPlan optimize_compensation(const DensityMatrix& rho,
                                       const CompensationOptions& options) {
    if (rho.n_qubits() != 4)
        throw std::invalid_argument("optimize_compensation: need a 4-qubit state");
    if (options.n_starts < 1)
        throw std::invalid_argument("optimize_compensation: need at least one start");
    const Mat& r = rho.matrix();

    const int n_starts = options.n_starts;
    std::vector<Eigen::VectorXd> best_x(n_starts);
    std::vector<double> best_f(n_starts);

    auto run_start = [&](int s) {
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(9);
        if (s > 0) {
            std::mt19937_64 rng = make_engine(options.seed, "compensation", s);
            std::uniform_real_distribution<double> u(-M_PI / 2, M_PI / 2);
            for (int i = 0; i < 9; ++i) x0(i) = u(rng);
        }
        Eigen::VectorXd step = Eigen::VectorXd::Constant(9, 0.35);
        detail::NmResult nm = detail::nelder_mead(
            [&](const Eigen::VectorXd& x) { return -plan_fidelity(r, x); }, x0, step,
            options.max_iter, options.tol * 1e-2, -1.0 + 1e-13);
        // polish with a tighter simplex around the found optimum
        detail::NmResult fine = detail::nelder_mead(
            [&](const Eigen::VectorXd& x) { return -plan_fidelity(r, x); }, nm.x,
            Eigen::VectorXd::Constant(9, 0.02), options.max_iter, options.tol * 1e-4,
            -1.0 + 1e-13);
        best_x[s] = fine.f < nm.f ? fine.x : nm.x;
        best_f[s] = std::min(fine.f, nm.f);
    };
    if (options.policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int s = 0; s < n_starts; ++s) run_start(s);
    } else {
        for (int s = 0; s < n_starts; ++s) run_start(s);
    }

    int winner = 0;
    for (int s = 1; s < n_starts; ++s)
        if (best_f[s] < best_f[winner]) winner = s;

    // never fall below leaving the plates at zero
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(9);
    const double f_identity = plan_fidelity(r, zero);
    Eigen::VectorXd x = -best_f[winner] >= f_identity ? best_x[winner] : zero;

    CompensationPlan plan;
    plan.achieved_fidelity = plan_fidelity(r, x);
    for (int k = 0; k < 3; ++k) {
        WaveplateSetting ws{normalize_axis_angle(x(3 * k)), normalize_axis_angle(x(3 * k + 1)),
                            normalize_axis_angle(x(3 * k + 2))};
        plan.waveplates[k] = ws;
        plan.unitaries[k] = LocalUnitary(ws.unitary());
    }
    return plan;
}

DensityMatrix apply_plan(const DensityMatrix& rho, const CompensationPlan& plan) {
    if (rho.n_qubits() != 4) throw std::invalid_argument("apply_plan: need a 4-qubit state");
    return apply_local_unitaries(rho, {LocalUnitary::identity(), plan.unitaries[0],
                                       plan.unitaries[1], plan.unitaries[2]});
}

}  // namespace ghzsim
