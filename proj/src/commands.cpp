#include "ghzsim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <utility>

#include <json.hpp>

#include "ghzsim/compensation.hpp"
#include "ghzsim/rng.hpp"

namespace ghzsim {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

fs::path prepare_out_dir(const std::string& out_dir) {
    fs::path dir(out_dir.empty() ? "." : out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory: " + dir.string());
    return dir;
}

// model-construction failures are configuration problems, not numerical ones
template <class F>
auto config_errors(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

std::string write_artifact(const fs::path& dir, const char* name, const std::string& content,
                           std::vector<std::string>& files) {
    const std::string path = (dir / name).string();
    write_file(path, content);
    files.push_back(path);
    return path;
}

std::vector<double> delay_axis(const SpectralConfig& s) {
    std::vector<double> delays;
    const int n = static_cast<int>(std::floor((s.delay_max_ps - s.delay_min_ps) /
                                                  s.delay_step_ps +
                                              1e-9)) +
                  1;
    delays.reserve(n);
    for (int k = 0; k < n; ++k) delays.push_back(s.delay_min_ps + k * s.delay_step_ps);
    return delays;
}

}  // namespace

CommandResult cmd_tomography(const AppConfig& cfg, const std::string& out_dir,
                             const std::optional<std::string>& input_counts) {
    const fs::path dir = prepare_out_dir(out_dir);
    CommandResult result;

    std::vector<CountRecord> records;
    bool simulated = false;
    if (input_counts) {
        records = count_records_from_jsonl(read_file(*input_counts));
        if (records.empty()) throw ConfigError("tomography: input has no count records");
    } else {
        simulated = true;
        const DensityMatrix rho_true =
            config_errors("source", [&] { return contaminated_state(cfg.source); });
        const auto settings = settings_97();
        records.reserve(settings.size());
        for (size_t i = 0; i < settings.size(); ++i) {
            CountRecord rec = simulate_counts(rho_true, settings[i],
                                              cfg.tomography.mean_counts_per_setting,
                                              cfg.tomography.efficiencies,
                                              derive_seed(cfg.root_seed, "tomography", i));
            rec.acquisition_s = cfg.tomography.acquisition_s;
            records.push_back(std::move(rec));
        }
    }

    ReconstructionOptions opts;
    opts.apply_mle = true;
    opts.mc_samples = cfg.tomography.mc_samples;
    opts.angle_sigma_rad = cfg.tomography.angle_sigma_deg * std::numbers::pi / 180.0;
    opts.seed = derive_seed(cfg.root_seed, "tomography-mc", 0);
    const ReconstructionResult rec = reconstruct(records, ghz_state(4, 0.0), opts);

    write_artifact(dir, "rho.json", density_matrix_to_json(rec.rho), result.files);

    ojson rj;
    rj["fidelity_to_ghz"] = rec.fidelity_to_ghz;
    rj["fidelity_err"] = rec.fidelity_err;
    rj["method"] = rec.method;
    rj["mc_samples"] = rec.mc_samples;
    rj["n_settings"] = records.size();
    int64_t total = 0;
    for (const auto& r : records) {
        for (int64_t c : r.counts) total += c;
    }
    rj["total_counts"] = total;
    write_artifact(dir, "result.json", rj.dump(2) + "\n", result.files);

    std::string csv;
    const Mat& m = rec.rho.matrix();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) csv += ',';
            csv += format_double(m(r, c).real());
        }
        csv += '\n';
    }
    write_artifact(dir, "rho_real.csv", csv, result.files);

    if (simulated) {
        write_artifact(dir, "counts.jsonl", count_records_to_jsonl(records), result.files);
    }

    result.summary = fmt("tomography: fidelity to GHZ %.4f +/- %.4f (%s, %zu settings)",
                         rec.fidelity_to_ghz, rec.fidelity_err, rec.method.c_str(),
                         records.size());
    return result;
}

CommandResult cmd_sweep(const AppConfig& cfg, const std::string& out_dir) {
    const fs::path dir = prepare_out_dir(out_dir);

    SweepOptions opts;
    opts.seed = derive_seed(cfg.root_seed, "sweep", 0);
    opts.seconds_per_setting = cfg.sweep.seconds_per_setting;
    opts.mc_samples = cfg.sweep.mc_samples;
    opts.angle_sigma_rad = cfg.tomography.angle_sigma_deg * std::numbers::pi / 180.0;
    opts.alpha = cfg.sweep.correction_alpha;
    opts.noiseless = cfg.sweep.noiseless;
    const std::vector<SweepRow> rows = config_errors(
        "sweep", [&] { return fidelity_rate_sweep(cfg.source, cfg.sweep.p_values, opts); });

    CommandResult result;
    write_artifact(dir, "sweep.csv", sweep_to_csv(rows), result.files);
    if (rows.empty()) {
        result.summary = "sweep: 0 points (empty p_values), header-only table";
        return result;
    }
    double lo = rows.front().rate_hz, hi = rows.front().rate_hz;
    for (const auto& r : rows) {
        lo = std::min(lo, r.rate_hz);
        hi = std::max(hi, r.rate_hz);
    }
    result.summary = fmt("sweep: %zu points, fourfold rate %.3g..%.3g Hz", rows.size(), lo, hi);
    return result;
}

CommandResult cmd_hom(const AppConfig& cfg, const std::string& out_dir) {
    const fs::path dir = prepare_out_dir(out_dir);
    const SpectralConfig& s = cfg.spectral;

    const SpectralGrid filtered = config_errors("spectral", [&] {
        const SpectralGrid grid = build_jsa(s.pump, s.phase_matching, s.grid);
        return apply_filter(grid, s.signal_filter, s.idler_filter);
    });
    const double v = hom_visibility(filtered, filtered, s.jitter_sigma_ps);
    const double sigma = dip_sigma_ps(filtered);

    const HomScan scan = hom_curve(v, sigma, s.baseline_counts, delay_axis(s),
                                   derive_seed(cfg.root_seed, "hom", 0));
    const HomFit fit = fit_hom(scan);

    CommandResult result;
    write_artifact(dir, "hom_scan.csv", hom_scan_to_csv(scan), result.files);

    ojson fj;
    fj["visibility"] = fit.visibility;
    fj["visibility_err"] = fit.visibility_err;
    fj["sigma_ps"] = fit.sigma_ps;
    fj["sigma_err_ps"] = fit.sigma_err_ps;
    fj["tau_fwhm_ps"] = fit.tau_fwhm_ps;
    fj["tau_fwhm_err_ps"] = fit.tau_fwhm_err_ps;
    fj["baseline"] = fit.baseline;
    fj["baseline_err"] = fit.baseline_err;
    fj["residual_norm"] = fit.residual_norm;
    fj["iterations"] = fit.iterations;
    ojson model;
    model["visibility"] = v;
    model["sigma_ps"] = sigma;
    model["heralded_purity"] = schmidt_purity(filtered);
    fj["model"] = std::move(model);
    write_artifact(dir, "hom_fit.json", fj.dump(2) + "\n", result.files);

    result.summary = fmt("hom: visibility %.2f%% +/- %.2f%%, dip FWHM %.2f ps",
                         100.0 * fit.visibility, 100.0 * fit.visibility_err, fit.tau_fwhm_ps);
    return result;
}

CommandResult cmd_jsi(const AppConfig& cfg, const std::string& out_dir) {
    const fs::path dir = prepare_out_dir(out_dir);
    const SpectralConfig& s = cfg.spectral;

    // the two layers are nominally identical pair sources
    const auto [top, bottom, top_filtered] = config_errors("spectral", [&] {
        SpectralGrid t = build_jsa(s.pump, s.phase_matching, s.grid);
        SpectralGrid b = build_jsa(s.pump, s.phase_matching, s.grid);
        SpectralGrid f = apply_filter(t, s.signal_filter, s.idler_filter);
        return std::tuple{std::move(t), std::move(b), std::move(f)};
    });

    CommandResult result;
    write_artifact(dir, "jsi_top_unfiltered.csv", grid_to_csv(top), result.files);
    write_artifact(dir, "jsi_bottom_unfiltered.csv", grid_to_csv(bottom), result.files);
    write_artifact(dir, "jsi_top_filtered.csv", grid_to_csv(top_filtered), result.files);

    const Eigen::MatrixXd inten = top.intensity();
    Eigen::Index pr = 0, pc = 0;
    inten.maxCoeff(&pr, &pc);

    // largest secondary maximum on the antidiagonal through the peak,
    // relative to the peak (the phase-matching side lobe)
    double side = 0.0;
    for (const int step : {-1, 1}) {
        double prev = inten(pr, pc);
        bool past_min = false;
        for (int k = 1;; ++k) {
            const Eigen::Index r = pr + step * k, c = pc - step * k;
            if (r < 0 || c < 0 || r >= inten.rows() || c >= inten.cols()) break;
            const double cur = inten(r, c);
            if (!past_min && cur > prev) past_min = true;
            if (past_min) side = std::max(side, cur);
            prev = cur;
        }
    }
    const double sidelobe_ratio = side / inten(pr, pc);

    ojson sj;
    sj["purity_unfiltered"] = schmidt_purity(top);
    sj["purity_filtered"] = schmidt_purity(top_filtered);
    sj["peak_signal_nm"] = top.lambda_s()[static_cast<size_t>(pc)];
    sj["peak_idler_nm"] = top.lambda_i()[static_cast<size_t>(pr)];
    sj["sidelobe_ratio"] = sidelobe_ratio;
    sj["grid_points_signal"] = top.lambda_s().size();
    sj["grid_points_idler"] = top.lambda_i().size();
    write_artifact(dir, "jsi_summary.json", sj.dump(2) + "\n", result.files);

    result.summary = fmt("jsi: peak at (%.2f, %.2f) nm, purity %.3f -> %.3f after filtering",
                         top.lambda_s()[static_cast<size_t>(pc)],
                         top.lambda_i()[static_cast<size_t>(pr)], schmidt_purity(top),
                         schmidt_purity(top_filtered));
    return result;
}

CommandResult cmd_compensate(const AppConfig& cfg, const std::string& out_dir,
                             const std::string& input_rho) {
    const fs::path dir = prepare_out_dir(out_dir);
    const DensityMatrix rho = density_matrix_from_json(read_file(input_rho));
    if (rho.n_qubits() != 4) throw ConfigError("compensate: input must be a 4-qubit state");

    CompensationOptions opts;
    opts.seed = derive_seed(cfg.root_seed, "compensation", 0);
    const CompensationPlan plan = optimize_compensation(rho, opts);

    CommandResult result;
    write_artifact(dir, "compensation_plan.json", compensation_plan_to_json(plan), result.files);
    result.summary = fmt("compensate: fidelity %.6f -> %.6f", fidelity(rho, ghz_state(4, 0.0)),
                         plan.achieved_fidelity);
    return result;
}

CommandResult cmd_calibrate(const AppConfig& cfg, const std::string& out_dir) {
    const fs::path dir = prepare_out_dir(out_dir);
    const auto anchors = reference_anchors();
    const CalibrationResult cal = config_errors(
        "calibrate", [&] { return calibrate_to_anchors(cfg.source, anchors); });

    AppConfig out = cfg;
    out.source = cal.cfg;

    CommandResult result;
    write_artifact(dir, "calibrated_config.json", config_to_json(out), result.files);

    ojson rj;
    ojson aj = ojson::array();
    for (size_t k = 0; k < anchors.size(); ++k) {
        ojson a;
        a["rate_hz"] = anchors[k].rate_hz;
        a["fidelity"] = anchors[k].fidelity;
        a["corrected"] = anchors[k].corrected;
        a["p"] = k < cal.p_at_anchor.size() ? cal.p_at_anchor[k] : 0.0;
        aj.push_back(std::move(a));
    }
    rj["anchors"] = std::move(aj);
    rj["overlap_v"] = cal.cfg.overlap_v;
    rj["extinction_db"] = cal.cfg.extinction_db;
    rj["efficiency_scale"] = cal.efficiency_scale;
    rj["arm_efficiency"] = cal.cfg.arm_efficiency;
    rj["residual_rms"] = cal.residual;
    write_artifact(dir, "calibration_report.json", rj.dump(2) + "\n", result.files);

    result.summary = fmt("calibrate: residual %.2e over %zu anchors, overlap %.4f, "
                         "extinction %.1f dB",
                         cal.residual, anchors.size(), cal.cfg.overlap_v, cal.cfg.extinction_db);
    return result;
}

}  // namespace ghzsim
