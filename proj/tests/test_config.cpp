#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include <ghzsim/compensation.hpp>
#include <ghzsim/config.hpp>
#include <ghzsim/polarization.hpp>
#include <ghzsim/tomography.hpp>

using namespace ghzsim;

TEST_CASE("defaults are valid and round trip through json") {
    const AppConfig cfg = default_config();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.source.p_top == doctest::Approx(0.00191));
    CHECK(cfg.source.overlap_v == doctest::Approx(0.9095));
    CHECK(cfg.source.arm_efficiency[0] == doctest::Approx(0.332));
    CHECK(cfg.source.extinction_db == doctest::Approx(45.0));
    CHECK(cfg.sweep.correction_alpha == doctest::Approx(1.0));
    CHECK(!cfg.sweep.p_values.empty());

    const AppConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.schema_version == cfg.schema_version);
    CHECK(back.root_seed == cfg.root_seed);
    CHECK(back.source.p_top == cfg.source.p_top);
    CHECK(back.source.extinction_db == cfg.source.extinction_db);
    CHECK(back.spectral.jitter_sigma_ps == cfg.spectral.jitter_sigma_ps);
    CHECK(back.spectral.phase_matching.gvm_ps_per_mm ==
          cfg.spectral.phase_matching.gvm_ps_per_mm);
    CHECK(back.tomography.mc_samples == cfg.tomography.mc_samples);
    CHECK(back.sweep.p_values == cfg.sweep.p_values);
    CHECK(back.sweep.correction_alpha == cfg.sweep.correction_alpha);
}

TEST_CASE("partial configs overlay the defaults") {
    const AppConfig cfg = config_from_json(R"({"source": {"p_top": 0.005}})");
    CHECK(cfg.source.p_top == doctest::Approx(0.005));
    CHECK(cfg.source.p_bottom == doctest::Approx(default_config().source.p_bottom));
    CHECK(cfg.spectral.grid.step_nm == doctest::Approx(0.02));
}

TEST_CASE("unknown keys are rejected with their path") {
    CHECK_THROWS_WITH_AS(config_from_json(R"({"sources": {}})"),
                         doctest::Contains("$.sources"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"sweep": {"alpha": 1.0}})"),
                         doctest::Contains("sweep.alpha"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"spectral": {"pump": {"power_w": 1}}})"),
                         doctest::Contains("spectral.pump.power_w"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{broken"), ConfigError);
    CHECK_THROWS_AS(config_from_json("[1, 2]"), ConfigError);
}

TEST_CASE("range violations name the offending field") {
    CHECK_THROWS_WITH_AS(config_from_json(R"({"source": {"p_top": 1.0}})"),
                         doctest::Contains("source"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"source": {"overlap_v": 1.5}})"),
                         doctest::Contains("source"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"sweep": {"correction_alpha": -0.2}})"),
                         doctest::Contains("correction_alpha"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"sweep": {"p_values": [0.1, 1.2]}})"),
                         doctest::Contains("p_values[1]"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"schema_version": 2})"),
                         doctest::Contains("schema_version"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"spectral": {"grid": {"step_nm": -1}}})"),
                         doctest::Contains("step_nm"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"tomography": {"mc_samples": -1}})"),
                         doctest::Contains("mc_samples"), ConfigError);
}

TEST_CASE("typed accessors catch wrong json types") {
    CHECK_THROWS_WITH_AS(config_from_json(R"({"source": {"p_top": "big"}})"),
                         doctest::Contains("expected a number"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"source": {"n_max": 2.5}})"),
                         doctest::Contains("expected an integer"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"sweep": {"noiseless": 1}})"),
                         doctest::Contains("expected a boolean"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"source": {"arm_efficiency": [1, 1]}})"),
                         doctest::Contains("array of 4"), ConfigError);
    CHECK_THROWS_WITH_AS(
        config_from_json(R"({"spectral": {"signal_filter": {"shape": "boxcar"}}})"),
        doctest::Contains("gaussian"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"root_seed": -4})"), ConfigError);
}

TEST_CASE("fiber unitaries parse from [re, im] cell pairs") {
    const std::string text = R"({"source": {"fiber_unitaries": [
        [[[0,0],[1,0]],[[1,0],[0,0]]],
        [[[1,0],[0,0]],[[0,0],[1,0]]],
        [[[1,0],[0,0]],[[0,0],[1,0]]],
        [[[1,0],[0,0]],[[0,0],[1,0]]]]}})";
    const AppConfig cfg = config_from_json(text);
    CHECK(std::abs(cfg.source.fiber_unitaries[0].matrix()(0, 1) - cxd(1.0)) < 1e-15);
    CHECK(std::abs(cfg.source.fiber_unitaries[1].matrix()(0, 0) - cxd(1.0)) < 1e-15);

    // non-unitary matrices are rejected with the element path
    CHECK_THROWS_WITH_AS(
        config_from_json(R"({"source": {"fiber_unitaries": [
            [[[2,0],[0,0]],[[0,0],[1,0]]],
            [[[1,0],[0,0]],[[0,0],[1,0]]],
            [[[1,0],[0,0]],[[0,0],[1,0]]],
            [[[1,0],[0,0]],[[0,0],[1,0]]]]}})"),
        doctest::Contains("fiber_unitaries[0]"), ConfigError);
}

TEST_CASE("count records survive a jsonl round trip") {
    std::vector<CountRecord> records;
    CountRecord a;
    a.setting = MeasurementSetting::from_basis({Basis::X, Basis::Y, Basis::Z, Basis::MinusZ});
    for (int k = 0; k < 16; ++k) a.counts[k] = k * 7;
    a.acquisition_s = 600.0;
    records.push_back(a);
    CountRecord b;
    b.setting = MeasurementSetting::from_basis({Basis::Z, Basis::Z, Basis::Z, Basis::Z});
    b.counts.fill(3);
    b.acquisition_s = 1.5;
    records.push_back(b);

    const std::string text = count_records_to_jsonl(records);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find("\"-Z\"") != std::string::npos);

    const auto back = count_records_from_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].setting.basis == a.setting.basis);
    CHECK(back[0].counts == a.counts);
    CHECK(back[0].acquisition_s == doctest::Approx(600.0));
    CHECK(back[1].setting.basis == b.setting.basis);
    // angles are rebuilt from the basis labels
    CHECK(back[0].setting.hwp_rad == a.setting.hwp_rad);

    CHECK(count_records_from_jsonl("\n  \n").empty());
    CHECK_THROWS_WITH_AS(
        count_records_from_jsonl(R"({"setting": ["Q","Z","Z","Z"], "counts": )"
                                 R"([0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0], "acquisition_s": 1})"
               "\n"),
        doctest::Contains("setting[0]"), ConfigError);
    CHECK_THROWS_AS(
        count_records_from_jsonl(R"({"setting": ["Z","Z","Z","Z"], "counts": [1, 2], )"
                                 R"("acquisition_s": 1})"
               "\n"),
        ConfigError);
    CHECK_THROWS_WITH_AS(
        count_records_from_jsonl(
            R"({"setting": ["Z","Z","Z","Z"], "counts": )"
            R"([-1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0], "acquisition_s": 1})"
            "\n"),
        doctest::Contains("counts[0]"), ConfigError);
}

TEST_CASE("density matrices survive a json round trip") {
    const DensityMatrix rho = DensityMatrix::from_pure(ghz_state(4, 0.4));
    const DensityMatrix back = density_matrix_from_json(density_matrix_to_json(rho));
    CHECK(back.n_qubits() == 4);
    CHECK((back.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_WITH_AS(density_matrix_from_json(R"({"n_qubits": 9, "real": [], "imag": []})"),
                         doctest::Contains("n_qubits"), ConfigError);
    CHECK_THROWS_WITH_AS(
        density_matrix_from_json(R"({"n_qubits": 1, "real": [[1, 0]], "imag": [[0, 0]]})"),
        doctest::Contains("real"), ConfigError);
    // a non-state matrix fails validation on load
    CHECK_THROWS_AS(density_matrix_from_json(
                        R"({"n_qubits": 1, "real": [[2, 0], [0, 0]], "imag": )"
                        R"([[0, 0], [0, 0]]})"),
                    ConfigError);
}

TEST_CASE("compensation plans serialize angles in both units") {
    CompensationPlan plan;
    plan.achieved_fidelity = 0.9876;
    plan.waveplates[0] = WaveplateSetting{0.5, -0.25, 0.125};
    const std::string text = compensation_plan_to_json(plan);
    const auto j = nlohmann::json::parse(text);
    CHECK(j["achieved_fidelity"].get<double>() == doctest::Approx(0.9876));
    REQUIRE(j["waveplates"].size() == 3);
    REQUIRE(j["unitaries"].size() == 3);
    const auto& w = j["waveplates"][0];
    CHECK(w["x0_qwp_rad"].get<double>() == doctest::Approx(0.5));
    // degree fields are rounded to hundredths for the bench sheet
    CHECK(w["x0_qwp_deg"].get<double>() ==
          doctest::Approx(std::round(0.5 * 180.0 / 3.14159265358979 * 100) / 100));
    CHECK(w["x1_hwp_deg"].get<double>() * 100 ==
          doctest::Approx(std::round(w["x1_hwp_deg"].get<double>() * 100)));
    // identity unitaries serialize as [re, im] pairs
    CHECK(j["unitaries"][0][0][0][0].get<double>() == doctest::Approx(1.0));
    CHECK(j["unitaries"][0][0][0][1].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("doubles print with full precision") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(1.0) == "1");
    const double v = 0.123456789012345678;
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("missing files raise config errors") {
    CHECK_THROWS_AS(load_config("/nonexistent/me.json"), ConfigError);
    CHECK_THROWS_AS(read_file("/nonexistent/me.json"), ConfigError);
}
