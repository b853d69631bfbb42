#pragma once

// Four-qubit polarization state tomography: measurement settings, synthetic
// Poisson counts, detector-imbalance calibration, linear-regression
// reconstruction, physical projection, and Monte Carlo error bars.
//
// Analyzer convention per arm: the photon passes QWP(q) then HWP(h) then a
// polarizing beam splitter; the transmitted (H) output is detector "plus",
// the reflected (V) output "minus". Outcome plus therefore projects onto
// |v+> = (HWP(h) QWP(q))^dag |H>. Angle table:
//   Z:  h = 0,    q = 0      (plus = |H>)
//   -Z: h = pi/4, q = 0      (plus = |V>)
//   X:  h = pi/8, q = pi/4   (plus = |+>)
//   Y:  h = 0,    q = pi/4   (plus = (|H> + i|V>)/sqrt(2))
//
// Detector imbalance: efficiencies is a 4-vector of plus-detector
// efficiencies relative to the minus detector of the same arm (minus = 1);
// an outcome o is attenuated by eta(o) = prod over plus-arms of
// efficiencies[arm]. Only these ratios are identifiable from count data.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ghzsim/polarization.hpp"
#include "ghzsim/spectral.hpp"  // ExecPolicy

namespace ghzsim {

enum class Basis { X, Y, Z, MinusZ };

struct MeasurementSetting {
    std::array<Basis, 4> basis;
    std::array<double, 4> hwp_rad;
    std::array<double, 4> qwp_rad;

    static MeasurementSetting from_basis(const std::array<Basis, 4>& b);
};

// analyzer angles realizing one basis
std::pair<double, double> analyzer_angles(Basis b);  // (hwp, qwp)

// projection vectors (v_plus, v_minus) of an analyzer at the given angles
std::pair<Eigen::Vector2cd, Eigen::Vector2cd> analyzer_vectors(double hwp_rad,
                                                               double qwp_rad);

// all 81 XYZ combinations followed by all 16 Z/-Z combinations
std::vector<MeasurementSetting> settings_97();

using Efficiencies = std::array<double, 4>;

// tensor product of per-arm outcome projectors, scaled by eta(outcome) when
// efficiencies are supplied; bit k of outcome (big-endian, qubit 0 first)
// selects plus (0) or minus (1) on arm k
Mat outcome_projector(const MeasurementSetting& setting, int outcome,
                      const std::optional<Efficiencies>& efficiencies = {});

struct CountRecord {
    MeasurementSetting setting;
    std::array<int64_t, 16> counts;
    double acquisition_s = 0.0;
};

// expected count for outcome o is mean_total * eta(o) * Tr(Pi_o rho),
// each drawn Poisson independently
CountRecord simulate_counts(const DensityMatrix& rho, const MeasurementSetting& setting,
                            double mean_total, const Efficiencies& efficiencies,
                            uint64_t seed);

// per-arm plus/minus detector ratios from the 16 Z/-Z settings; exact in
// expectation for any state (the block averages both assignments per arm)
Efficiencies calibrate_efficiencies(const std::vector<CountRecord>& z_block);

// Least-squares design for a fixed set of settings and efficiencies: rows are
// per-setting outcome frequencies, unknowns the 255 non-identity Pauli
// coefficients. Building the normal equations once amortizes repeated solves
// over different count vectors (calibration fits, sweeps).
class LreDesign {
public:
    LreDesign(const std::vector<MeasurementSetting>& settings,
              const Efficiencies& efficiencies);
    // counts (or expected values) per setting, outcome-indexed; counts are
    // reweighted by 1/eta(o) and normalized per setting before the fit
    Mat solve(const std::vector<std::array<double, 16>>& values) const;

private:
    size_t n_settings_;
    Efficiencies eff_;
    Eigen::MatrixXd rows_;  // (16 * n_settings) x 255
    Eigen::LDLT<Eigen::MatrixXd> normal_;
};

// least-squares estimate in the Pauli basis; Hermitian, trace 1, possibly
// not positive semidefinite
Mat lre_reconstruct(const std::vector<CountRecord>& records,
                    const Efficiencies& efficiencies);

// same estimate from real-valued per-outcome data (corrected counts,
// noiseless expectations)
Mat lre_reconstruct_values(const std::vector<MeasurementSetting>& settings,
                           const std::vector<std::array<double, 16>>& values,
                           const Efficiencies& efficiencies);

// eigenvalue truncate-and-redistribute projection to the closest density
// matrix: repeatedly zero the most negative eigenvalue and spread it
// uniformly over the remaining nonzero ones
DensityMatrix mle_project(const Mat& hermitian);

struct MonteCarloResult {
    double fidelity_mean = 0.0;
    double fidelity_std = 0.0;
    int n_failed = 0;
    int n_samples = 0;
};

// Poisson-resamples counts and Gaussian-perturbs both waveplate angles per
// sample, re-runs calibration + LRE + MLE, and reports mean/std of fidelity
// to the target. Deterministic and policy-independent for a fixed seed.
// Throws if more than 1% of samples fail to reconstruct.
MonteCarloResult monte_carlo_errors(const std::vector<CountRecord>& records,
                                    const PureState& target, int n_samples,
                                    double angle_sigma_rad, uint64_t seed,
                                    ExecPolicy policy = ExecPolicy::parallel);

struct ReconstructionResult {
    DensityMatrix rho;
    double fidelity_to_ghz = 0.0;
    double fidelity_err = 0.0;
    std::string method;  // "LRE" or "LRE+MLE"
    int mc_samples = 0;
};

struct ReconstructionOptions {
    bool apply_mle = true;
    int mc_samples = 500;
    double angle_sigma_rad = 0.0017453292519943295;  // 0.1 degrees
    uint64_t seed = 1;
    ExecPolicy policy = ExecPolicy::parallel;
};

// full pipeline: calibrate from the Z/-Z block when present, reweight,
// LRE, optional MLE, Monte Carlo error bar
ReconstructionResult reconstruct(const std::vector<CountRecord>& records,
                                 const PureState& target,
                                 const ReconstructionOptions& options);

}  // namespace ghzsim
