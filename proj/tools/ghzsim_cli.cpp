#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ghzsim/commands.hpp"

namespace {

void print_error(const char* type, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"]["type"] = type;
    j["error"]["message"] = message;
    std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"four-photon GHZ source simulator and analysis toolkit"};
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    std::string input;
    uint64_t seed = 0;
    auto* opt_config = app.add_option("--config", config_path, "JSON configuration file");
    auto* opt_seed = app.add_option("--seed", seed, "override root_seed from the configuration");
    app.add_option("--out", out_dir, "output directory (created if missing)");
    auto* opt_input =
        app.add_option("--input", input, "input file (counts JSONL or density-matrix JSON)");

    app.require_subcommand(1);
    auto* c_tomo = app.add_subcommand(
        "tomography", "simulate (or replay --input) counts and reconstruct the state");
    auto* c_sweep = app.add_subcommand("sweep", "fidelity-versus-rate table over p_values");
    auto* c_hom = app.add_subcommand("hom", "two-photon interference dip scan and fit");
    auto* c_jsi = app.add_subcommand("jsi", "joint spectral intensity maps and purity summary");
    auto* c_comp = app.add_subcommand(
        "compensate", "fit compensation waveplates for a measured state (--input required)");
    auto* c_cal =
        app.add_subcommand("calibrate", "fit source parameters to the reference anchors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("config", e.what());
        return 2;
    }

    try {
        ghzsim::AppConfig cfg =
            opt_config->count() ? ghzsim::load_config(config_path) : ghzsim::default_config();
        if (opt_seed->count()) cfg.root_seed = seed;
        cfg.validate();

        ghzsim::CommandResult res;
        if (c_tomo->parsed()) {
            std::optional<std::string> in;
            if (opt_input->count()) in = input;
            res = ghzsim::cmd_tomography(cfg, out_dir, in);
        } else if (c_sweep->parsed()) {
            res = ghzsim::cmd_sweep(cfg, out_dir);
        } else if (c_hom->parsed()) {
            res = ghzsim::cmd_hom(cfg, out_dir);
        } else if (c_jsi->parsed()) {
            res = ghzsim::cmd_jsi(cfg, out_dir);
        } else if (c_comp->parsed()) {
            if (!opt_input->count()) {
                throw ghzsim::ConfigError("compensate: --input density-matrix JSON is required");
            }
            res = ghzsim::cmd_compensate(cfg, out_dir, input);
        } else if (c_cal->parsed()) {
            res = ghzsim::cmd_calibrate(cfg, out_dir);
        }

        std::cout << res.summary << '\n';
        for (const auto& f : res.files) std::cout << "wrote " << f << '\n';
        return 0;
    } catch (const ghzsim::ConfigError& e) {
        print_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("runtime", e.what());
        return 3;
    }
}
