#include "ghzsim/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ghzsim/compensation.hpp"

namespace ghzsim {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

void require_object(const ojson& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const ojson& obj, const std::string& path,
                    std::initializer_list<const char*> keys) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : keys) {
            if (item.key() == k) { known = true; break; }
        }
        if (!known) fail(path + "." + item.key(), "unknown key");
    }
}

const ojson* find(const ojson& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void get_number(const ojson& obj, const std::string& path, const char* key, double& dst) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number()) fail(path + "." + key, "expected a number");
        dst = v->get<double>();
    }
}

void get_int(const ojson& obj, const std::string& path, const char* key, int& dst) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
        dst = v->get<int>();
    }
}

void get_uint64(const ojson& obj, const std::string& path, const char* key, uint64_t& dst) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                        v->get<int64_t>() < 0)) {
            fail(path + "." + key, "expected a non-negative integer");
        }
        dst = v->get<uint64_t>();
    }
}

void get_bool(const ojson& obj, const std::string& path, const char* key, bool& dst) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
        dst = v->get<bool>();
    }
}

void get_array4(const ojson& obj, const std::string& path, const char* key,
                std::array<double, 4>& dst) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_array() || v->size() != 4) fail(path + "." + key, "expected an array of 4 numbers");
        for (size_t k = 0; k < 4; ++k) {
            if (!(*v)[k].is_number()) fail(path + "." + key, "expected an array of 4 numbers");
            dst[k] = (*v)[k].get<double>();
        }
    }
}

void get_number_vector(const ojson& obj, const std::string& path, const char* key,
                       std::vector<double>& dst) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_array()) fail(path + "." + key, "expected an array of numbers");
        dst.clear();
        for (size_t k = 0; k < v->size(); ++k) {
            if (!(*v)[k].is_number()) fail(path + "." + key, "expected an array of numbers");
            dst.push_back((*v)[k].get<double>());
        }
    }
}

Mat2 matrix2_from_json(const ojson& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) fail(path, "expected a 2x2 matrix of [re, im] pairs");
    Mat2 m;
    for (int r = 0; r < 2; ++r) {
        const ojson& row = v[r];
        if (!row.is_array() || row.size() != 2) fail(path, "expected a 2x2 matrix of [re, im] pairs");
        for (int c = 0; c < 2; ++c) {
            const ojson& cell = row[c];
            if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number() ||
                !cell[1].is_number()) {
                fail(path, "expected a 2x2 matrix of [re, im] pairs");
            }
            m(r, c) = std::complex<double>(cell[0].get<double>(), cell[1].get<double>());
        }
    }
    return m;
}

ojson matrix2_to_json(const Mat2& m) {
    ojson rows = ojson::array();
    for (int r = 0; r < 2; ++r) {
        ojson row = ojson::array();
        for (int c = 0; c < 2; ++c) {
            row.push_back(ojson::array({m(r, c).real(), m(r, c).imag()}));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void parse_source(const ojson& j, const std::string& path, SourceConfig& s) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"p_top", "p_bottom", "theta_top", "theta_bottom", "overlap_v",
                    "extinction_db", "arm_efficiency", "fiber_unitaries", "pulse_rate_hz",
                    "n_max", "double_pair_white_noise"});
    get_number(j, path, "p_top", s.p_top);
    get_number(j, path, "p_bottom", s.p_bottom);
    get_number(j, path, "theta_top", s.theta_top);
    get_number(j, path, "theta_bottom", s.theta_bottom);
    get_number(j, path, "overlap_v", s.overlap_v);
    get_number(j, path, "extinction_db", s.extinction_db);
    get_array4(j, path, "arm_efficiency", s.arm_efficiency);
    get_number(j, path, "pulse_rate_hz", s.pulse_rate_hz);
    get_int(j, path, "n_max", s.n_max);
    get_bool(j, path, "double_pair_white_noise", s.double_pair_white_noise);
    if (const ojson* v = find(j, "fiber_unitaries")) {
        if (!v->is_array() || v->size() != 4) {
            fail(path + ".fiber_unitaries", "expected an array of 4 matrices");
        }
        for (size_t k = 0; k < 4; ++k) {
            const std::string p = path + ".fiber_unitaries[" + std::to_string(k) + "]";
            try {
                s.fiber_unitaries[k] = LocalUnitary(matrix2_from_json((*v)[k], p));
            } catch (const std::invalid_argument& e) {
                fail(p, e.what());
            }
        }
    }
}

void parse_pump(const ojson& j, const std::string& path, PumpEnvelope& p) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"center_wavelength_nm", "pulse_duration_fwhm_ps", "repetition_rate_mhz"});
    get_number(j, path, "center_wavelength_nm", p.center_wavelength_nm);
    get_number(j, path, "pulse_duration_fwhm_ps", p.pulse_duration_fwhm_ps);
    get_number(j, path, "repetition_rate_mhz", p.repetition_rate_mhz);
}

void parse_phase_matching(const ojson& j, const std::string& path, PhaseMatching& p) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"crystal_length_mm", "poling_period_um", "group_velocity_slope",
                    "gvm_ps_per_mm", "pm_center_nm"});
    get_number(j, path, "crystal_length_mm", p.crystal_length_mm);
    get_number(j, path, "poling_period_um", p.poling_period_um);
    get_number(j, path, "group_velocity_slope", p.group_velocity_slope);
    get_number(j, path, "gvm_ps_per_mm", p.gvm_ps_per_mm);
    get_number(j, path, "pm_center_nm", p.pm_center_nm);
}

void parse_grid(const ojson& j, const std::string& path, GridAxes& g) {
    require_object(j, path);
    reject_unknown(j, path, {"min_nm", "max_nm", "step_nm"});
    get_number(j, path, "min_nm", g.min_nm);
    get_number(j, path, "max_nm", g.max_nm);
    get_number(j, path, "step_nm", g.step_nm);
}

void parse_filter(const ojson& j, const std::string& path, FilterSpec& f) {
    require_object(j, path);
    reject_unknown(j, path, {"center_nm", "fwhm_nm", "shape"});
    get_number(j, path, "center_nm", f.center_nm);
    get_number(j, path, "fwhm_nm", f.fwhm_nm);
    if (const ojson* v = find(j, "shape")) {
        if (!v->is_string()) fail(path + ".shape", "expected \"gaussian\" or \"rectangular\"");
        const std::string s = v->get<std::string>();
        if (s == "gaussian") f.shape = FilterShape::gaussian;
        else if (s == "rectangular") f.shape = FilterShape::rectangular;
        else fail(path + ".shape", "expected \"gaussian\" or \"rectangular\"");
    }
}

void parse_spectral(const ojson& j, const std::string& path, SpectralConfig& s) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"pump", "phase_matching", "grid", "signal_filter", "idler_filter",
                    "jitter_sigma_ps", "delay_min_ps", "delay_max_ps", "delay_step_ps",
                    "baseline_counts"});
    if (const ojson* v = find(j, "pump")) parse_pump(*v, path + ".pump", s.pump);
    if (const ojson* v = find(j, "phase_matching")) {
        parse_phase_matching(*v, path + ".phase_matching", s.phase_matching);
    }
    if (const ojson* v = find(j, "grid")) parse_grid(*v, path + ".grid", s.grid);
    if (const ojson* v = find(j, "signal_filter")) {
        parse_filter(*v, path + ".signal_filter", s.signal_filter);
    }
    if (const ojson* v = find(j, "idler_filter")) {
        parse_filter(*v, path + ".idler_filter", s.idler_filter);
    }
    get_number(j, path, "jitter_sigma_ps", s.jitter_sigma_ps);
    get_number(j, path, "delay_min_ps", s.delay_min_ps);
    get_number(j, path, "delay_max_ps", s.delay_max_ps);
    get_number(j, path, "delay_step_ps", s.delay_step_ps);
    get_number(j, path, "baseline_counts", s.baseline_counts);
}

void parse_tomography(const ojson& j, const std::string& path, TomographyConfig& t) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"mean_counts_per_setting", "acquisition_s", "angle_sigma_deg", "mc_samples",
                    "efficiencies"});
    get_number(j, path, "mean_counts_per_setting", t.mean_counts_per_setting);
    get_number(j, path, "acquisition_s", t.acquisition_s);
    get_number(j, path, "angle_sigma_deg", t.angle_sigma_deg);
    get_int(j, path, "mc_samples", t.mc_samples);
    get_array4(j, path, "efficiencies", t.efficiencies);
}

void parse_sweep(const ojson& j, const std::string& path, SweepConfig& s) {
    require_object(j, path);
    reject_unknown(j, path,
                   {"p_values", "seconds_per_setting", "mc_samples", "correction_alpha",
                    "noiseless"});
    get_number_vector(j, path, "p_values", s.p_values);
    get_number(j, path, "seconds_per_setting", s.seconds_per_setting);
    get_int(j, path, "mc_samples", s.mc_samples);
    get_number(j, path, "correction_alpha", s.correction_alpha);
    get_bool(j, path, "noiseless", s.noiseless);
}

void check(bool ok, const std::string& path, const std::string& what) {
    if (!ok) fail(path, what);
}

const char* basis_name(Basis b) {
    switch (b) {
        case Basis::X: return "X";
        case Basis::Y: return "Y";
        case Basis::Z: return "Z";
        case Basis::MinusZ: return "-Z";
    }
    return "?";
}

Basis basis_from_name(const std::string& s, const std::string& path) {
    if (s == "X") return Basis::X;
    if (s == "Y") return Basis::Y;
    if (s == "Z") return Basis::Z;
    if (s == "-Z") return Basis::MinusZ;
    fail(path, "expected one of \"X\", \"Y\", \"Z\", \"-Z\"");
}

ojson filter_to_json(const FilterSpec& f) {
    ojson j;
    j["center_nm"] = f.center_nm;
    j["fwhm_nm"] = f.fwhm_nm;
    j["shape"] = f.shape == FilterShape::gaussian ? "gaussian" : "rectangular";
    return j;
}

}  // namespace

void AppConfig::validate() const {
    check(schema_version == 1, "schema_version", "unsupported schema version");
    try {
        source.validate();
    } catch (const std::invalid_argument& e) {
        fail("source", e.what());
    }
    check(spectral.pump.center_wavelength_nm > 0, "spectral.pump.center_wavelength_nm",
          "must be positive");
    check(spectral.pump.pulse_duration_fwhm_ps > 0, "spectral.pump.pulse_duration_fwhm_ps",
          "must be positive");
    check(spectral.pump.repetition_rate_mhz > 0, "spectral.pump.repetition_rate_mhz",
          "must be positive");
    check(spectral.phase_matching.crystal_length_mm > 0,
          "spectral.phase_matching.crystal_length_mm", "must be positive");
    check(spectral.phase_matching.poling_period_um > 0,
          "spectral.phase_matching.poling_period_um", "must be positive");
    check(spectral.phase_matching.gvm_ps_per_mm > 0, "spectral.phase_matching.gvm_ps_per_mm",
          "must be positive");
    check(spectral.grid.step_nm > 0, "spectral.grid.step_nm", "must be positive");
    check(spectral.grid.min_nm < spectral.grid.max_nm, "spectral.grid", "min_nm must be below max_nm");
    check(spectral.signal_filter.fwhm_nm > 0, "spectral.signal_filter.fwhm_nm",
          "must be positive");
    check(spectral.idler_filter.fwhm_nm > 0, "spectral.idler_filter.fwhm_nm", "must be positive");
    check(spectral.jitter_sigma_ps >= 0, "spectral.jitter_sigma_ps", "must be non-negative");
    check(spectral.delay_step_ps > 0, "spectral.delay_step_ps", "must be positive");
    check(spectral.delay_min_ps < spectral.delay_max_ps, "spectral",
          "delay_min_ps must be below delay_max_ps");
    check(spectral.baseline_counts > 0, "spectral.baseline_counts", "must be positive");
    check(tomography.mean_counts_per_setting > 0, "tomography.mean_counts_per_setting",
          "must be positive");
    check(tomography.acquisition_s > 0, "tomography.acquisition_s", "must be positive");
    check(tomography.angle_sigma_deg >= 0, "tomography.angle_sigma_deg", "must be non-negative");
    check(tomography.mc_samples >= 0, "tomography.mc_samples", "must be non-negative");
    for (int k = 0; k < 4; ++k) {
        check(tomography.efficiencies[k] > 0, "tomography.efficiencies", "must be positive");
    }
    for (size_t k = 0; k < sweep.p_values.size(); ++k) {
        check(sweep.p_values[k] >= 0 && sweep.p_values[k] < 1,
              "sweep.p_values[" + std::to_string(k) + "]", "must lie in [0, 1)");
    }
    check(sweep.seconds_per_setting > 0, "sweep.seconds_per_setting", "must be positive");
    check(sweep.mc_samples >= 0, "sweep.mc_samples", "must be non-negative");
    check(sweep.correction_alpha >= 0, "sweep.correction_alpha", "must be non-negative");
}

// source values fitted so the noiseless raw and corrected fidelity curves
// pass through the reference anchors (94.73% at 1.7 Hz raw; 89.71% raw and
// 92.14% corrected at 152 Hz); the pair probability sits at the 1.7 Hz
// operating point
AppConfig default_config() {
    AppConfig cfg;
    cfg.source.p_top = cfg.source.p_bottom = 0.00191;
    cfg.source.overlap_v = 0.9095;
    cfg.source.arm_efficiency = {0.332, 0.332, 0.332, 0.332};
    cfg.source.extinction_db = 45.0;
    cfg.sweep.p_values = {0.0005, 0.00191, 0.004, 0.008, 0.0131, 0.0174};
    return cfg;
}

AppConfig config_from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    require_object(j, "$");
    reject_unknown(j, "$",
                   {"schema_version", "root_seed", "source", "spectral", "tomography", "sweep"});
    AppConfig cfg = default_config();
    get_int(j, "$", "schema_version", cfg.schema_version);
    get_uint64(j, "$", "root_seed", cfg.root_seed);
    if (const ojson* v = find(j, "source")) parse_source(*v, "source", cfg.source);
    if (const ojson* v = find(j, "spectral")) parse_spectral(*v, "spectral", cfg.spectral);
    if (const ojson* v = find(j, "tomography")) parse_tomography(*v, "tomography", cfg.tomography);
    if (const ojson* v = find(j, "sweep")) parse_sweep(*v, "sweep", cfg.sweep);
    cfg.validate();
    return cfg;
}

AppConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

std::string config_to_json(const AppConfig& cfg) {
    ojson j;
    j["schema_version"] = cfg.schema_version;
    j["root_seed"] = cfg.root_seed;

    ojson src;
    src["p_top"] = cfg.source.p_top;
    src["p_bottom"] = cfg.source.p_bottom;
    src["theta_top"] = cfg.source.theta_top;
    src["theta_bottom"] = cfg.source.theta_bottom;
    src["overlap_v"] = cfg.source.overlap_v;
    src["extinction_db"] = cfg.source.extinction_db;
    src["arm_efficiency"] = cfg.source.arm_efficiency;
    ojson fibers = ojson::array();
    for (const auto& u : cfg.source.fiber_unitaries) fibers.push_back(matrix2_to_json(u.matrix()));
    src["fiber_unitaries"] = std::move(fibers);
    src["pulse_rate_hz"] = cfg.source.pulse_rate_hz;
    src["n_max"] = cfg.source.n_max;
    src["double_pair_white_noise"] = cfg.source.double_pair_white_noise;
    j["source"] = std::move(src);

    ojson spec;
    ojson pump;
    pump["center_wavelength_nm"] = cfg.spectral.pump.center_wavelength_nm;
    pump["pulse_duration_fwhm_ps"] = cfg.spectral.pump.pulse_duration_fwhm_ps;
    pump["repetition_rate_mhz"] = cfg.spectral.pump.repetition_rate_mhz;
    spec["pump"] = std::move(pump);
    ojson pm;
    pm["crystal_length_mm"] = cfg.spectral.phase_matching.crystal_length_mm;
    pm["poling_period_um"] = cfg.spectral.phase_matching.poling_period_um;
    pm["group_velocity_slope"] = cfg.spectral.phase_matching.group_velocity_slope;
    pm["gvm_ps_per_mm"] = cfg.spectral.phase_matching.gvm_ps_per_mm;
    pm["pm_center_nm"] = cfg.spectral.phase_matching.pm_center_nm;
    spec["phase_matching"] = std::move(pm);
    ojson grid;
    grid["min_nm"] = cfg.spectral.grid.min_nm;
    grid["max_nm"] = cfg.spectral.grid.max_nm;
    grid["step_nm"] = cfg.spectral.grid.step_nm;
    spec["grid"] = std::move(grid);
    spec["signal_filter"] = filter_to_json(cfg.spectral.signal_filter);
    spec["idler_filter"] = filter_to_json(cfg.spectral.idler_filter);
    spec["jitter_sigma_ps"] = cfg.spectral.jitter_sigma_ps;
    spec["delay_min_ps"] = cfg.spectral.delay_min_ps;
    spec["delay_max_ps"] = cfg.spectral.delay_max_ps;
    spec["delay_step_ps"] = cfg.spectral.delay_step_ps;
    spec["baseline_counts"] = cfg.spectral.baseline_counts;
    j["spectral"] = std::move(spec);

    ojson tomo;
    tomo["mean_counts_per_setting"] = cfg.tomography.mean_counts_per_setting;
    tomo["acquisition_s"] = cfg.tomography.acquisition_s;
    tomo["angle_sigma_deg"] = cfg.tomography.angle_sigma_deg;
    tomo["mc_samples"] = cfg.tomography.mc_samples;
    tomo["efficiencies"] = cfg.tomography.efficiencies;
    j["tomography"] = std::move(tomo);

    ojson sweep;
    sweep["p_values"] = cfg.sweep.p_values;
    sweep["seconds_per_setting"] = cfg.sweep.seconds_per_setting;
    sweep["mc_samples"] = cfg.sweep.mc_samples;
    sweep["correction_alpha"] = cfg.sweep.correction_alpha;
    sweep["noiseless"] = cfg.sweep.noiseless;
    j["sweep"] = std::move(sweep);

    return j.dump(2) + "\n";
}

std::string count_records_to_jsonl(const std::vector<CountRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        ojson j;
        ojson setting = ojson::array();
        for (int k = 0; k < 4; ++k) setting.push_back(basis_name(rec.setting.basis[k]));
        j["setting"] = std::move(setting);
        j["counts"] = rec.counts;
        j["acquisition_s"] = rec.acquisition_s;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<CountRecord> count_records_from_jsonl(const std::string& text) {
    std::vector<CountRecord> records;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string path = "records line " + std::to_string(lineno);
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(path, std::string("invalid JSON: ") + e.what());
        }
        require_object(j, path);
        reject_unknown(j, path, {"setting", "counts", "acquisition_s"});
        const ojson* setting = find(j, "setting");
        const ojson* counts = find(j, "counts");
        const ojson* acq = find(j, "acquisition_s");
        if (!setting || !setting->is_array() || setting->size() != 4) {
            fail(path + ".setting", "expected an array of 4 basis names");
        }
        if (!counts || !counts->is_array() || counts->size() != 16) {
            fail(path + ".counts", "expected an array of 16 integers");
        }
        if (!acq || !acq->is_number()) fail(path + ".acquisition_s", "expected a number");
        std::array<Basis, 4> basis;
        for (int k = 0; k < 4; ++k) {
            const ojson& b = (*setting)[k];
            if (!b.is_string()) fail(path + ".setting", "expected an array of 4 basis names");
            basis[k] = basis_from_name(b.get<std::string>(),
                                       path + ".setting[" + std::to_string(k) + "]");
        }
        CountRecord rec;
        rec.setting = MeasurementSetting::from_basis(basis);
        for (int k = 0; k < 16; ++k) {
            const ojson& c = (*counts)[k];
            if (!c.is_number_integer()) fail(path + ".counts", "expected an array of 16 integers");
            const int64_t n = c.get<int64_t>();
            if (n < 0) fail(path + ".counts[" + std::to_string(k) + "]", "must be non-negative");
            rec.counts[k] = n;
        }
        rec.acquisition_s = acq->get<double>();
        if (rec.acquisition_s <= 0) fail(path + ".acquisition_s", "must be positive");
        records.push_back(std::move(rec));
    }
    return records;
}

std::string density_matrix_to_json(const DensityMatrix& rho) {
    ojson j;
    j["n_qubits"] = rho.n_qubits();
    const Mat& m = rho.matrix();
    ojson re = ojson::array(), im = ojson::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ojson rrow = ojson::array(), irow = ojson::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            rrow.push_back(m(r, c).real());
            irow.push_back(m(r, c).imag());
        }
        re.push_back(std::move(rrow));
        im.push_back(std::move(irow));
    }
    j["real"] = std::move(re);
    j["imag"] = std::move(im);
    return j.dump(2) + "\n";
}

DensityMatrix density_matrix_from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("rho: invalid JSON: ") + e.what());
    }
    require_object(j, "rho");
    reject_unknown(j, "rho", {"n_qubits", "real", "imag"});
    int n = 0;
    get_int(j, "rho", "n_qubits", n);
    if (n < 1 || n > kMaxQubits) fail("rho.n_qubits", "must lie in 1..5");
    const Eigen::Index dim = Eigen::Index(1) << n;
    const ojson* re = find(j, "real");
    const ojson* im = find(j, "imag");
    auto check_shape = [&](const ojson* part, const char* name) {
        if (!part || !part->is_array() || part->size() != static_cast<size_t>(dim)) {
            fail(std::string("rho.") + name, "expected a " + std::to_string(dim) + "x" +
                                                 std::to_string(dim) + " array");
        }
        for (const auto& row : *part) {
            if (!row.is_array() || row.size() != static_cast<size_t>(dim)) {
                fail(std::string("rho.") + name, "expected a " + std::to_string(dim) + "x" +
                                                     std::to_string(dim) + " array");
            }
            for (const auto& cell : row) {
                if (!cell.is_number()) fail(std::string("rho.") + name, "expected numbers");
            }
        }
    };
    check_shape(re, "real");
    check_shape(im, "imag");
    Mat m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) {
            m(r, c) = std::complex<double>((*re)[r][c].get<double>(), (*im)[r][c].get<double>());
        }
    }
    try {
        return DensityMatrix(n, std::move(m));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("rho: ") + e.what());
    }
}

std::string compensation_plan_to_json(const CompensationPlan& plan) {
    ojson j;
    j["achieved_fidelity"] = plan.achieved_fidelity;
    ojson plates = ojson::array();
    const double deg = 180.0 / std::numbers::pi;
    auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };
    for (const auto& w : plan.waveplates) {
        ojson p;
        p["x0_qwp_deg"] = round2(w.x0 * deg);
        p["x1_hwp_deg"] = round2(w.x1 * deg);
        p["x2_qwp_deg"] = round2(w.x2 * deg);
        p["x0_qwp_rad"] = w.x0;
        p["x1_hwp_rad"] = w.x1;
        p["x2_qwp_rad"] = w.x2;
        plates.push_back(std::move(p));
    }
    j["waveplates"] = std::move(plates);
    ojson us = ojson::array();
    for (const auto& u : plan.unitaries) us.push_back(matrix2_to_json(u.matrix()));
    j["unitaries"] = std::move(us);
    return j.dump(2) + "\n";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) throw ConfigError("cannot read file: " + path);
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open file for writing: " + path);
    out << content;
    out.flush();
    if (!out.good()) throw ConfigError("cannot write file: " + path);
}

}  // namespace ghzsim
