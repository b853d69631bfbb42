#pragma once

// Batch command implementations behind the CLI subcommands. Each command
// reads an AppConfig, writes its artifacts under out_dir, and returns the
// list of files written. Errors surface as ConfigError (bad configuration
// or input) or std::runtime_error (numerical failure); the CLI maps these
// to exit codes 2 and 3.

#include <optional>
#include <string>
#include <vector>

#include "ghzsim/config.hpp"

namespace ghzsim {

struct CommandResult {
    std::vector<std::string> files;
    std::string summary;  // one-line human-readable outcome
};

// simulate counts end-to-end (or replay input_counts), reconstruct, write
// rho.json, result.json, rho_real.csv and counts.jsonl when simulated
CommandResult cmd_tomography(const AppConfig& cfg, const std::string& out_dir,
                             const std::optional<std::string>& input_counts);

// fidelity-vs-rate table -> sweep.csv
CommandResult cmd_sweep(const AppConfig& cfg, const std::string& out_dir);

// synthetic dip scan + fit -> hom_scan.csv, hom_fit.json
CommandResult cmd_hom(const AppConfig& cfg, const std::string& out_dir);

// joint spectra -> jsi_top_unfiltered.csv, jsi_bottom_unfiltered.csv,
// jsi_top_filtered.csv, jsi_summary.json
CommandResult cmd_jsi(const AppConfig& cfg, const std::string& out_dir);

// read a density matrix, optimize plates -> compensation_plan.json
CommandResult cmd_compensate(const AppConfig& cfg, const std::string& out_dir,
                             const std::string& input_rho);

// fit source parameters to the reference anchors -> calibrated_config.json,
// calibration_report.json
CommandResult cmd_calibrate(const AppConfig& cfg, const std::string& out_dir);

}  // namespace ghzsim
