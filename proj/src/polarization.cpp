#include "ghzsim/polarization.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ghzsim {

namespace {
constexpr double kPi = std::numbers::pi;
}

double normalize_axis_angle(double theta) {
    double t = std::fmod(theta + kPi / 2.0, kPi);
    if (t < 0.0) t += kPi;
    return t - kPi / 2.0;
}

LocalUnitary::LocalUnitary() : m_(Mat2::Identity()) {}

LocalUnitary::LocalUnitary(const Mat2& m) : m_(m) {
    Mat2 dev = m.adjoint() * m - Mat2::Identity();
    if (dev.cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("LocalUnitary: matrix is not unitary");
    }
}

LocalUnitary LocalUnitary::identity() {
    return LocalUnitary(Mat2::Identity());
}

PureState::PureState(int n_qubits, Vec amplitudes) : n_(n_qubits), amps_(std::move(amplitudes)) {
    if (n_ < 1 || n_ > kMaxQubits) {
        throw std::invalid_argument("PureState: qubit count out of range");
    }
    if (amps_.size() != (1 << n_)) {
        throw std::invalid_argument("PureState: amplitude vector has wrong dimension");
    }
    if (std::abs(amps_.norm() - 1.0) > 1e-12) {
        throw std::invalid_argument("PureState: amplitudes are not normalized");
    }
}

DensityMatrix::DensityMatrix(int n_qubits, Mat rho) : n_(n_qubits), rho_(std::move(rho)) {
    if (n_ < 1 || n_ > kMaxQubits) {
        throw std::invalid_argument("DensityMatrix: qubit count out of range");
    }
    const int d = 1 << n_;
    if (rho_.rows() != d || rho_.cols() != d) {
        throw std::invalid_argument("DensityMatrix: wrong dimension");
    }
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("DensityMatrix: not Hermitian");
    }
    if (std::abs(rho_.trace().real() - 1.0) > 1e-10 || std::abs(rho_.trace().imag()) > 1e-10) {
        throw std::invalid_argument("DensityMatrix: trace is not 1");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(rho_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9) {
        throw std::invalid_argument("DensityMatrix: negative eigenvalue beyond tolerance");
    }
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
    const Vec& a = psi.amplitudes();
    return DensityMatrix(psi.n_qubits(), a * a.adjoint());
}

Mat2 WaveplateSetting::unitary() const {
    return waveplate_jones(WaveplateKind::quarter, x0).matrix() *
           waveplate_jones(WaveplateKind::half, x1).matrix() *
           waveplate_jones(WaveplateKind::quarter, x2).matrix();
}

LocalUnitary waveplate_jones(WaveplateKind kind, double theta) {
    const double c = std::cos(2.0 * theta);
    const double s = std::sin(2.0 * theta);
    Mat2 m;
    if (kind == WaveplateKind::half) {
        m << c, s, s, -c;
    } else {
        // R(t) diag(1, i) R(-t)
        const double ct = std::cos(theta), st = std::sin(theta);
        Mat2 r, d;
        r << ct, -st, st, ct;
        d << cxd(1, 0), cxd(0, 0), cxd(0, 0), cxd(0, 1);
        m = r * d * r.transpose();
    }
    return LocalUnitary(m);
}

PureState ghz_state(int n_qubits, double delta) {
    if (n_qubits < 2 || n_qubits > kMaxQubits) {
        throw std::invalid_argument("ghz_state: qubit count out of range");
    }
    const int d = 1 << n_qubits;
    Vec a = Vec::Zero(d);
    const double r = 1.0 / std::sqrt(2.0);
    a(0) = r;
    a(d - 1) = std::polar(r, delta);
    return PureState(n_qubits, std::move(a));
}

PureState bell_pair_state(double theta) {
    Vec a = Vec::Zero(4);
    const double r = 1.0 / std::sqrt(2.0);
    a(1) = r;                       // |HV>
    a(2) = std::polar(r, theta);    // |VH>
    return PureState(2, std::move(a));
}

double fidelity(const DensityMatrix& rho, const PureState& target) {
    if (rho.n_qubits() != target.n_qubits()) {
        throw std::invalid_argument("fidelity: dimension mismatch");
    }
    const Vec& psi = target.amplitudes();
    double f = (psi.adjoint() * rho.matrix() * psi)(0).real();
    if (f < 0.0 && f > -1e-9) f = 0.0;
    if (f > 1.0 && f < 1.0 + 1e-9) f = 1.0;
    return f;
}

DensityMatrix apply_local_unitaries(const DensityMatrix& rho,
                                    const std::vector<LocalUnitary>& us) {
    if (static_cast<int>(us.size()) != rho.n_qubits()) {
        throw std::invalid_argument("apply_local_unitaries: need one unitary per qubit");
    }
    Mat u = us[0].matrix();
    for (size_t k = 1; k < us.size(); ++k) u = kron(u, us[k].matrix());
    return DensityMatrix(rho.n_qubits(), u.adjoint() * rho.matrix() * u);
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Vec kron_vec(const Vec& a, const Vec& b) {
    Vec out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

}  // namespace ghzsim
