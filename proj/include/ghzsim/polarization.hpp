#pragma once

// Polarization-qubit state types and Jones-calculus building blocks.
//
// Conventions (fixed for the whole library):
//   |H> -> basis index 0, |V> -> index 1.
//   Multi-qubit basis order is big-endian: qubit 0 is the most significant
//   bit of the computational index, so |HHVV> on 4 qubits is index 0b0011.
//   HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
//   QWP(t) = R(t) diag(1, i) R(-t),  R(t) = [[cos t, -sin t], [sin t, cos t]]
//   (fast axis at angle t from horizontal, angles in radians).
//   Fidelity against a pure target is the linear form F = <psi|rho|psi>.

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ghzsim {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using Mat2 = Eigen::Matrix2cd;

constexpr int kMaxQubits = 5;

// Wraps an angle to the canonical waveplate range [-pi/2, pi/2).
// Waveplate Jones matrices are pi-periodic in the axis angle.
double normalize_axis_angle(double theta);

class LocalUnitary {
public:
    LocalUnitary();  // identity
    explicit LocalUnitary(const Mat2& m);  // throws if not unitary to 1e-12
    static LocalUnitary identity();
    const Mat2& matrix() const { return m_; }

private:
    Mat2 m_;
};

class PureState {
public:
    PureState(int n_qubits, Vec amplitudes);  // throws unless norm == 1 to 1e-12
    int n_qubits() const { return n_; }
    const Vec& amplitudes() const { return amps_; }
    int dim() const { return static_cast<int>(amps_.size()); }

private:
    int n_;
    Vec amps_;
};

class DensityMatrix {
public:
    // Validates Hermiticity (1e-10), unit trace (1e-10) and positive
    // semidefiniteness (min eigenvalue >= -1e-9).
    DensityMatrix(int n_qubits, Mat rho);
    static DensityMatrix from_pure(const PureState& psi);
    int n_qubits() const { return n_; }
    const Mat& matrix() const { return rho_; }
    int dim() const { return static_cast<int>(rho_.rows()); }

private:
    int n_;
    Mat rho_;
};

// Compensation-plate triple: U = QWP(x0) * HWP(x1) * QWP(x2)
// (the x2 plate acts first on the state). Angles in radians,
// stored in [-pi/2, pi/2).
struct WaveplateSetting {
    double x0 = 0.0;
    double x1 = 0.0;
    double x2 = 0.0;
    Mat2 unitary() const;
};

enum class WaveplateKind { half, quarter };

// Jones matrix of a half- or quarter-wave plate with fast axis at `theta`.
LocalUnitary waveplate_jones(WaveplateKind kind, double theta);

// (|H..H> + e^{i delta} |V..V>)/sqrt(2) on n qubits, 2 <= n <= kMaxQubits.
PureState ghz_state(int n_qubits, double delta);

// (|HV> + e^{i theta} |VH>)/sqrt(2).
PureState bell_pair_state(double theta);

// F = <psi|rho|psi>, real scalar clamped to [0, 1] within tolerance.
double fidelity(const DensityMatrix& rho, const PureState& target);

// (U0 x U1 x ...)^dagger rho (U0 x U1 x ...); one unitary per qubit.
DensityMatrix apply_local_unitaries(const DensityMatrix& rho,
                                    const std::vector<LocalUnitary>& us);

// Kronecker product helpers (big-endian: first factor is most significant).
Mat kron(const Mat& a, const Mat& b);
Vec kron_vec(const Vec& a, const Vec& b);

}  // namespace ghzsim
