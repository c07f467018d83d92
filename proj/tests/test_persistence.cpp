// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "beamprobe/codebook.hpp"
#include "beamprobe/dataset.hpp"
#include "beamprobe/empirical_model.hpp"
#include "beamprobe/errors.hpp"
#include "beamprobe/training.hpp"
#include "predictor_oracle.hpp"

using namespace beamprobe;
using namespace beamprobe::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir
{
    fs::path path;
    explicit TempDir(const char* tag)
    {
        path = fs::temp_directory_path() / ("beamprobe_" + std::string(tag) + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Dataset small_dataset(std::size_t count)
{
    const Scene scene = build_scene(SceneConfig::urban_default());
    return generate_dataset(scene, ArrayGeometry{4, 2}, count, MeasurementNoise{}, 5);
}

void check_same(const Dataset& a, const Dataset& b)
{
    CHECK(a.geometry == b.geometry);
    CHECK(a.scene_fingerprint == b.scene_fingerprint);
    CHECK(a.noise == b.noise);
    CHECK(a.seed == b.seed);
    CHECK(a.location_area.origin == b.location_area.origin);
    CHECK(a.location_area.width == b.location_area.width);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].location == b.samples[i].location);
        CHECK(a.samples[i].rsrp_dbm == b.samples[i].rsrp_dbm);
    }
}

}  // namespace

TEST_CASE("dataset round trip")
{
    TempDir dir("ds");
    const auto ds = small_dataset(300);
    write_dataset(ds, dir.path / "data.json");
    CHECK(fs::exists(dir.path / "data.csv"));
    check_same(ds, read_dataset(dir.path / "data.json"));

    // unquantized values survive at the CSV precision
    Dataset raw = ds;
    raw.noise.rsrp_quant_db.reset();
    raw.samples[0].rsrp_dbm(0) = round_to_csv_precision(-71.1234567891);
    write_dataset(raw, dir.path / "raw.json");
    check_same(raw, read_dataset(dir.path / "raw.json"));
}

TEST_CASE("corrupt dataset files are data errors")
{
    TempDir dir("bad");
    CHECK_THROWS_AS(read_dataset(dir.path / "missing.json"), DataError);
    const auto ds = small_dataset(5);
    write_dataset(ds, dir.path / "d.json");
    {
        std::ofstream out(dir.path / "d.csv", std::ios::app);
        out << "1,2,not-a-number\n";
    }
    CHECK_THROWS_AS(read_dataset(dir.path / "d.json"), DataError);
    {
        std::ofstream out(dir.path / "e.json");
        out << "{ not json";
    }
    CHECK_THROWS_AS(read_dataset(dir.path / "e.json"), DataError);
}

TEST_CASE("empirical model round trip")
{
    TempDir dir("emp");
    const auto ds = small_dataset(2000);
    const auto model = fit_empirical_gaussian(ds, 10.0, 20);
    write_empirical_model(model, dir.path / "emp.json");
    const auto back = read_empirical_model(dir.path / "emp.json");
    CHECK(back == model);
    CHECK(back.global().sigma == model.global().sigma);
}

TEST_CASE("predictor round trip")
{
    TempDir dir("pred");
    auto c = tiny_config(PredictorKind::variance, 2);
    c.round_index = 3;
    c.variance_floor = 0.01;
    const auto m = initialize_predictor(c, tiny_norm(), 17);
    write_predictor(m, dir.path / "g.json");
    const auto back = read_predictor(dir.path / "g.json");
    CHECK(back == m);
    fs::resize_file(dir.path / "g.bin", 16);
    CHECK_THROWS_AS(read_predictor(dir.path / "g.json"), DataError);
}

TEST_CASE("predictor set round trip")
{
    TempDir dir("set");
    PredictorSet set;
    for (int k = 0; k <= 2; ++k) {
        auto cf = tiny_config(PredictorKind::mean);
        cf.round_index = k;
        auto cg = tiny_config(PredictorKind::variance);
        cg.round_index = k;
        set.mean.push_back(initialize_predictor(cf, tiny_norm(), 1));
        set.variance.push_back(initialize_predictor(cg, tiny_norm(), 1));
    }
    write_predictor_set(set, dir.path / "predictors.json");
    const auto back = read_predictor_set(dir.path / "predictors.json");
    REQUIRE(back.rounds() == 2);
    for (int k = 0; k <= 2; ++k) {
        CHECK(back.mean[static_cast<std::size_t>(k)] == set.mean[static_cast<std::size_t>(k)]);
        CHECK(back.variance[static_cast<std::size_t>(k)] == set.variance[static_cast<std::size_t>(k)]);
    }
}

TEST_CASE("codebook round trip")
{
    TempDir dir("cb");
    ProbingCodebook cb;
    cb.grid.origin = Eigen::Vector2d(-60.125, 1.5);
    cb.grid.cell = 2.0;
    cb.grid.nx = 7;
    cb.grid.ny = 3;
    cb.l1 = 3;
    for (int k = 0; k < cb.grid.cell_count(); ++k)
        cb.beams.push_back({k, k + 30, 127 - k});
    write_codebook(cb, dir.path / "codebook.json");
    CHECK(read_codebook(dir.path / "codebook.json") == cb);
    {
        std::ofstream out(dir.path / "other.json");
        out << R"({"format": "something-else"})";
    }
    CHECK_THROWS_AS(read_codebook(dir.path / "other.json"), DataError);
}
