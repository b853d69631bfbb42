#pragma once

// Versioned JSON configuration schema and serialization of result artifacts.
// Parsing is strict: unknown keys and out-of-range values are rejected with
// a ConfigError naming the offending path.

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "ghzsim/source.hpp"
#include "ghzsim/spectral.hpp"
#include "ghzsim/tomography.hpp"

namespace ghzsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpectralConfig {
    PumpEnvelope pump;
    PhaseMatching phase_matching;
    GridAxes grid;
    FilterSpec signal_filter;
    FilterSpec idler_filter;
    double jitter_sigma_ps = 0.691;
    // HOM scan layout and scale
    double delay_min_ps = -20.0;
    double delay_max_ps = 20.0;
    double delay_step_ps = 0.5;
    double baseline_counts = 2000.0;
};

struct TomographyConfig {
    double mean_counts_per_setting = 1000.0;
    double acquisition_s = 600.0;
    double angle_sigma_deg = 0.1;
    int mc_samples = 500;
    Efficiencies efficiencies{1.0, 1.0, 1.0, 1.0};
};

struct SweepConfig {
    std::vector<double> p_values;
    double seconds_per_setting = 600.0;
    int mc_samples = 100;
    double correction_alpha = 1.0;  // fivefold subtraction weight
    bool noiseless = false;
};

struct AppConfig {
    int schema_version = 1;
    uint64_t root_seed = 1;
    SourceConfig source;
    SpectralConfig spectral;
    TomographyConfig tomography;
    SweepConfig sweep;

    void validate() const;  // throws ConfigError
};

AppConfig default_config();

AppConfig config_from_json(const std::string& text);
AppConfig load_config(const std::string& path);
std::string config_to_json(const AppConfig& cfg);

// CountRecord set as JSON lines:
// {"setting": ["X","Y","Z","-Z"], "counts": [16 ints], "acquisition_s": t}
std::string count_records_to_jsonl(const std::vector<CountRecord>& records);
std::vector<CountRecord> count_records_from_jsonl(const std::string& text);

// density matrix as JSON with row-major real/imag arrays
std::string density_matrix_to_json(const DensityMatrix& rho);
DensityMatrix density_matrix_from_json(const std::string& text);

struct CompensationPlan;  // compensation.hpp
std::string compensation_plan_to_json(const CompensationPlan& plan);

// fixed-format float used by every emitted artifact so reruns are
// byte-identical across platforms
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace ghzsim
