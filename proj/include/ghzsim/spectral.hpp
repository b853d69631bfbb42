#pragma once

// Joint spectral amplitude model for a pulsed type-II down-conversion source:
// JSA(w_s, w_i) = alpha(w_s + w_i) * sinc(L*dk/2), with alpha the Gaussian
// energy-conservation envelope of the transform-limited pump and dk linearized
// in the detunings (nu_s, nu_i) from the phase-matched degenerate frequency:
//   dk = gvm_ps_per_mm * (nu_s - group_velocity_slope * nu_i).
// slope = 1 puts the phase-matching ridge on the main diagonal; slope = 0
// makes the sinc depend on nu_s alone. Also: Gaussian/rect filtering, Schmidt
// purity, and Hong-Ou-Mandel dip generation + fitting.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ghzsim/polarization.hpp"

namespace ghzsim {

enum class ExecPolicy { serial, parallel };

struct PumpEnvelope {
    double center_wavelength_nm = 774.75;  // ~775 nm; 2x this sets degeneracy
    double pulse_duration_fwhm_ps = 2.0;   // intensity FWHM, transform limited
    double repetition_rate_mhz = 76.0;
};

struct PhaseMatching {
    double crystal_length_mm = 30.0;
    double poling_period_um = 46.2;
    double group_velocity_slope = 1.0;  // ridge orientation in (nu_s, nu_i)
    double gvm_ps_per_mm = 0.173;       // group-velocity-mismatch scale of dk
    double pm_center_nm = 1549.5;       // degenerate phase-matched wavelength
};

enum class FilterShape { gaussian, rectangular };

struct FilterSpec {
    double center_nm = 1549.5;
    double fwhm_nm = 1.3;  // intensity-transmission FWHM
    FilterShape shape = FilterShape::gaussian;
};

struct GridAxes {
    double min_nm = 1546.0;
    double max_nm = 1553.0;
    double step_nm = 0.02;  // 20 pm
};

class SpectralGrid {
public:
    // rows = idler wavelengths, cols = signal wavelengths
    SpectralGrid(std::vector<double> lambda_s_nm, std::vector<double> lambda_i_nm,
                 Eigen::MatrixXcd amplitude);
    const std::vector<double>& lambda_s() const { return ls_; }
    const std::vector<double>& lambda_i() const { return li_; }
    const Eigen::MatrixXcd& amplitude() const { return amp_; }
    Eigen::MatrixXd intensity() const { return amp_.cwiseAbs2(); }

private:
    std::vector<double> ls_, li_;
    Eigen::MatrixXcd amp_;
};

struct HomScan {
    std::vector<double> delays_ps;
    std::vector<double> coincidences;
};

struct HomFit {
    double visibility = 0.0;
    double sigma_ps = 0.0;
    double baseline = 0.0;
    double tau_fwhm_ps = 0.0;  // 2*sqrt(2 ln 2)*sigma
    double visibility_err = 0.0;
    double sigma_err_ps = 0.0;
    double baseline_err = 0.0;
    double tau_fwhm_err_ps = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
};

// Rejects grids whose angular-frequency step exceeds the pump bandwidth.
SpectralGrid build_jsa(const PumpEnvelope& pump, const PhaseMatching& pm,
                       const GridAxes& axes, ExecPolicy policy = ExecPolicy::parallel);

SpectralGrid apply_filter(const SpectralGrid& grid, const FilterSpec& signal_filter,
                          const FilterSpec& idler_filter);

// P = sum of s_k^4 for the unit-Frobenius-norm amplitude; 1 iff rank one.
double schmidt_purity(const SpectralGrid& grid);

// V = P_overlap * V_jitter. P_overlap = Tr(rho_a rho_b) of the heralded
// marginal spectral states (equals schmidt_purity for grid_a == grid_b).
// V_jitter = 1/sqrt(1 + (jitter_sigma/tau_c)^2) with tau_c the rms coherence
// time implied by the mean marginal spectral intensity width (a calibrated
// stand-in for the jitter penalty, not a detector model).
double hom_visibility(const SpectralGrid& grid_a, const SpectralGrid& grid_b,
                      double jitter_sigma_ps);

// Gaussian dip width implied by the heralded marginal spectral width of the
// grid: sigma_tau = 1/(sqrt(2) sigma_omega), so the dip between two photons
// from this grid follows C(tau) = c0*(1 - v*exp(-tau^2/(2 sigma_tau^2))).
double dip_sigma_ps(const SpectralGrid& grid);

// C(tau) = c0 * (1 - v*exp(-tau^2/(2 sigma^2))); Poisson-sampled when seeded.
HomScan hom_curve(double v, double sigma_ps, double c0, const std::vector<double>& delays_ps,
                  std::optional<uint64_t> noise_seed = std::nullopt);

// Levenberg-Marquardt fit of the dip model above; standard errors from the
// fit covariance s^2 (J^T J)^-1. Throws on non-convergence (message carries
// the residual norm).
HomFit fit_hom(const HomScan& scan);

// CSV round trip. Grid format: header row = signal wavelengths (first cell
// "idler_nm"), then one row per idler wavelength, cells = |amplitude|^2.
std::string grid_to_csv(const SpectralGrid& grid);
std::string hom_scan_to_csv(const HomScan& scan);
HomScan hom_scan_from_csv(const std::string& text);

}  // namespace ghzsim
