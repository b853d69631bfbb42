#pragma once

// Photon-pair emission statistics, entanglement fusion of two pair sources on
// a fiber polarizing beam splitter, coincidence rates, and the subtraction
// scheme that corrects fourfold data for double-pair emission.
//
// Mode-level model. Each pair source emits into a signal arm and an idler
// arm; the two idlers meet on a PBS whose outputs C and D are detected
// together with the two signals, giving four detection arms in qubit order
// (signal_top, signal_bottom, port_C, port_D).
//
// PBS convention (per polarization, inputs a = top idler, b = bottom idler):
//   a_H -> sqrt(1-e) C_H - sqrt(e) D_H      b_H -> sqrt(e) C_H + sqrt(1-e) D_H
//   a_V -> sqrt(e) C_V + sqrt(1-e) D_V      b_V -> sqrt(1-e) C_V - sqrt(e) D_V
// with e = 10^(-extinction_db/10). At e = 0 this transmits H, swaps V, and the
// post-selected one-photon-per-port state of two Bell pairs with zero phases
// is exactly (|HHHH> + |VVVV>)/sqrt(2) with success probability 1/2.
//
// Partial distinguishability: the bottom idler occupies a temporal mode
// phi = sqrt(v) e0 + sqrt(1-v) e1 while all other photons occupy e0; tracing
// the temporal tags after fusion scales the GHZ coherence by overlap_v.
//
// Double-pair emission: per pulse each layer emits k pairs with the truncated
// geometric law P(k) proportional to p^k. Patterns (1,1), (2,1) and (1,2) are
// propagated exactly through the PBS, the per-arm collection-fiber unitaries
// and per-arm loss, then classified by surviving photons per arm:
//   (1,1,1,1) -> fourfold (clean or contaminated),
//   one arm doubled, the rest single -> fivefold (stored as a five-qubit
//     state: four arms plus the doubled arm's second photon),
// six survivors are discarded as negligible higher-fold events.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ghzsim/polarization.hpp"
#include "ghzsim/spectral.hpp"  // ExecPolicy

namespace ghzsim {

struct SourceConfig {
    double p_top = 0.01;             // per-pulse pair probability, top layer
    double p_bottom = 0.01;
    double theta_top = 0.0;          // Bell phase per layer, rad
    double theta_bottom = 0.0;
    double overlap_v = 1.0;          // idler temporal-mode overlap in [0,1]
    double extinction_db = 30.0;     // PBS extinction ratio, dB
    std::array<double, 4> arm_efficiency{1.0, 1.0, 1.0, 1.0};
    std::array<LocalUnitary, 4> fiber_unitaries{};  // collection fibers, detected arms
    double pulse_rate_hz = 76e6;
    int n_max = 3;                   // emission-number cutoff per layer
    bool double_pair_white_noise = false;  // replace contamination states by white noise

    void validate() const;  // throws std::invalid_argument
};

struct EmissionStats {
    std::vector<double> distribution;  // P(0..n_max)
};

// P(k) proportional to p^k for k = 0..n_max; consecutive ratio is exactly p.
EmissionStats emission_distribution(double p, int n_max);

struct FusionOutcome {
    DensityMatrix rho4;          // post-selected single-pair-per-layer state
    double success_probability;  // one photon per PBS port, before loss
    double fourfold_rate_hz;
    double fivefold_rate_hz;
};

FusionOutcome fuse_pairs(const SourceConfig& cfg);

enum class EventClass { fourfold_clean, fourfold_contaminated, fivefold };

struct RateEntry {
    std::string pattern;      // emitted pairs per layer, e.g. "2+1"
    EventClass cls;
    int doubled_arm;          // 0..3 for fivefold entries, else -1
    double weight_per_pulse;  // probability per pulse
    double rate_hz;
};

struct RateReport {
    // fourfold rate counts every pulse with at least one surviving photon in
    // each arm once; fivefold rate is the five-survivor envelope (actual
    // recorded fivefolds per setting are at most this)
    double fourfold_rate_hz = 0.0;
    double fivefold_rate_hz = 0.0;
    std::vector<RateEntry> entries;
};

RateReport coincidence_rates(const SourceConfig& cfg);

// Mixture of the clean fusion state and the states produced by double-pair
// events whose surviving photons look like a fourfold (five-survivor events
// enter through the doubled arm's one-photon marginal).
DensityMatrix contaminated_state(const SourceConfig& cfg);

// Event-level description used by the count simulators: weights are
// probabilities per pulse, states are exact for each surviving-photon class.
struct EventEnsemble {
    double w_clean = 0.0;
    DensityMatrix rho_clean;                 // 4 qubits
    double w_contaminated = 0.0;
    std::optional<DensityMatrix> rho_contaminated;  // 4 qubits
    std::array<double, 4> w_fivefold{0, 0, 0, 0};
    std::array<std::optional<DensityMatrix>, 4> rho_fivefold;  // 5 qubits each
};

EventEnsemble event_ensemble(const SourceConfig& cfg);

// Setting-independent fourfold summary of an ensemble (fivefold states enter
// through their one-photon marginals). The sweep's expected counts further
// resolve whether a doubled arm's pair merged onto one detector or split.
DensityMatrix contaminated_state_from(const EventEnsemble& ensemble);

// Outcome of a five-detector coincidence: the doubled arm fired both
// detectors, the other three arms have definite signs. signs[doubled_arm]
// is ignored. Marginalizes to the two fourfold outcomes that agree with it
// on the three single arms.
struct FivefoldOutcome {
    int doubled_arm;
    std::array<int, 4> signs;  // 0 = plus detector, 1 = minus
};

struct CorrectionResult {
    std::vector<double> corrected;   // 16 entries
    std::vector<bool> clamped;       // outcome hit the zero floor
};

// corrected(o) = max(0, fourfold(o) - alpha * sum of fivefold counts whose
// three single-arm signs match o)
CorrectionResult higher_order_correction(
    const std::vector<double>& fourfold_counts,
    const std::vector<std::pair<FivefoldOutcome, double>>& fivefold_counts,
    double alpha);

struct SweepOptions {
    uint64_t seed = 1;
    double seconds_per_setting = 600.0;
    int mc_samples = 100;          // error-bar resamples per point; 0 disables
    double angle_sigma_rad = 0.0017453292519943295;  // 0.1 degrees
    // Subtraction weight for the fivefold correction. At 1, each recorded
    // fivefold removes exactly its own pair of double-booked fourfold
    // subsets; merged same-detector pairs and events whose fifth photon
    // escaped detection stay in the histogram, so the correction recovers
    // only part of the fidelity drop.
    double alpha = 1.0;
    bool noiseless = false;        // expected counts instead of Poisson draws
    ExecPolicy policy = ExecPolicy::parallel;
};

struct SweepRow {
    double p = 0.0;
    double rate_hz = 0.0;
    double fidelity_raw = 0.0;
    double fidelity_raw_err = 0.0;
    double fidelity_corrected = 0.0;
    double fidelity_corrected_err = 0.0;
};

std::vector<SweepRow> fidelity_rate_sweep(const SourceConfig& cfg_template,
                                          const std::vector<double>& p_values,
                                          const SweepOptions& options);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

struct CalibrationAnchor {
    double rate_hz;
    double fidelity;
    bool corrected;  // anchor refers to the corrected curve
};

struct CalibrationResult {
    SourceConfig cfg;               // fitted efficiency scale, overlap, extinction
    double efficiency_scale = 1.0;
    double residual = 0.0;          // rms fidelity mismatch over anchors
    std::vector<double> p_at_anchor;
};

std::vector<CalibrationAnchor> reference_anchors();

// Fits (efficiency scale, overlap_v, extinction_db) so the noiseless raw and
// corrected fidelity curves pass through the anchors; per anchor the emission
// probability is solved from the rate.
CalibrationResult calibrate_to_anchors(const SourceConfig& cfg_template,
                                       const std::vector<CalibrationAnchor>& anchors);

// emission probability whose fourfold rate matches the target, by bisection
double p_for_rate(const SourceConfig& cfg_template, double rate_hz);

}  // namespace ghzsim
