// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "beamprobe/errors.hpp"
#include "beamprobe/json_io.hpp"

namespace beamprobe {

namespace {

constexpr const char* kDatasetFormat = "beamprobe.dataset";
constexpr int kDatasetVersion = 1;
constexpr std::uint64_t kLocationSalt = 0x10c;
constexpr std::uint64_t kChannelSalt = 0xc4a;

}  // namespace

double round_to_csv_precision(double v)
{
    return std::round(v * 1e6) / 1e6;
}

Eigen::Vector2d sample_outdoor_location(const SceneConfig& config, Rng& rng)
{
    const auto& a = config.area;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const Eigen::Vector2d p(uniform(rng, a.origin.x(), a.max().x()), uniform(rng, a.origin.y(), a.max().y()));
        bool indoor = false;
        for (const auto& b : config.blockers)
            indoor = indoor || b.contains(p);
        if (!indoor)
            return p;
    }
    throw std::runtime_error("sample_outdoor_location: blockers cover the whole area");
}

Sample generate_sample(const Scene& scene, const ArrayGeometry& geom, const ComplexMatrix& codebook,
                       const MeasurementNoise& noise, std::uint64_t seed, std::uint64_t index)
{
    Rng loc_rng = derive_stream(seed, index, kLocationSalt);
    Rng chan_rng = derive_stream(seed, index, kChannelSalt);
    const Eigen::Vector2d mu = sample_outdoor_location(scene.config, loc_rng);
    const ComplexVector h = sample_channel(scene, geom, mu, chan_rng);
    const Eigen::VectorXd power = measure_rsrp(h, codebook, noise, chan_rng);

    Sample s;
    s.rsrp_dbm = rsrp_feedback_dbm(power, noise).unaryExpr([](double v) { return round_to_csv_precision(v); });
    s.location = observe_location(scene.config.bs_location, mu, noise, loc_rng)
                     .unaryExpr([](double v) { return round_to_csv_precision(v); });
    return s;
}

Dataset generate_dataset(const Scene& scene, const ArrayGeometry& geom, std::size_t n_samples,
                         const MeasurementNoise& noise, std::uint64_t seed)
{
    if (n_samples < 1)
        throw std::invalid_argument("generate_dataset: n_samples must be at least 1");
    geom.validate();
    noise.validate();
    Dataset ds;
    ds.geometry = geom;
    ds.scene_fingerprint = scene.fingerprint();
    ds.noise = noise;
    ds.seed = seed;
    ds.location_area = scene.config.area;
    ds.location_area.origin -= scene.config.bs_location;
    const auto a = dft_codebook(geom);
    ds.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        ds.samples.push_back(generate_sample(scene, geom, a, noise, seed, i));
    return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& header_path)
{
    auto body_path = header_path;
    body_path.replace_extension(".csv");

    json header{{"format", kDatasetFormat},
                {"version", kDatasetVersion},
                {"geometry", dataset.geometry},
                {"noise", dataset.noise},
                {"seed", dataset.seed},
                {"scene_fingerprint", to_hex(dataset.scene_fingerprint)},
                {"location_area", dataset.location_area},
                {"sample_count", dataset.samples.size()},
                {"body", body_path.filename().string()}};
    write_json_file(header_path, header);

    std::ofstream out(body_path);
    if (!out)
        throw DataError("cannot write " + body_path.string());
    out << "loc_x,loc_y";
    for (int i = 0; i < dataset.n(); ++i)
        out << ",rsrp_" << i;
    out << '\n';
    char buf[64];
    for (const auto& s : dataset.samples) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.location.x(), s.location.y());
        out << buf;
        for (Eigen::Index i = 0; i < s.rsrp_dbm.size(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.6f", s.rsrp_dbm(i));
            out << buf;
        }
        out << '\n';
    }
    if (!out)
        throw DataError("write failed for " + body_path.string());
}

Dataset read_dataset(const std::filesystem::path& header_path)
{
    const json header = read_json_file(header_path);
    if (header.value("format", std::string()) != kDatasetFormat)
        throw DataError(header_path.string() + " is not a dataset header");

    Dataset ds;
    std::size_t count = 0;
    std::string body;
    try {
        ds.geometry = header.at("geometry").get<ArrayGeometry>();
        ds.noise = header.at("noise").get<MeasurementNoise>();
        ds.seed = header.at("seed").get<std::uint64_t>();
        ds.scene_fingerprint = from_hex(header.at("scene_fingerprint").get<std::string>());
        ds.location_area = header.at("location_area").get<Rect>();
        count = header.at("sample_count").get<std::size_t>();
        body = header.at("body").get<std::string>();
    } catch (const std::exception& e) {
        throw DataError("incomplete dataset header " + header_path.string() + ": " + e.what());
    }

    const auto body_path = header_path.parent_path() / body;
    std::ifstream in(body_path);
    if (!in)
        throw DataError("cannot open dataset body " + body_path.string());
    std::string line;
    std::getline(in, line);  // column names
    const int n = ds.n();
    ds.samples.reserve(count);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        Sample s;
        s.rsrp_dbm.resize(n);
        const char* p = line.c_str();
        char* end = nullptr;
        auto next = [&](const char* what) {
            const double v = std::strtod(p, &end);
            if (end == p)
                throw DataError("malformed " + std::string(what) + " in " + body_path.string());
            p = (*end == ',') ? end + 1 : end;
            return v;
        };
        s.location.x() = next("loc_x");
        s.location.y() = next("loc_y");
        for (int i = 0; i < n; ++i)
            s.rsrp_dbm(i) = next("rsrp");
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.size() != count)
        throw DataError("dataset body has " + std::to_string(ds.samples.size()) + " records, header declares " +
                        std::to_string(count));
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::size_t train_count)
{
    if (train_count > dataset.size())
        throw std::invalid_argument("split_dataset: train_count exceeds dataset size");
    Dataset train = dataset;
    Dataset test = dataset;
    train.samples.assign(dataset.samples.begin(), dataset.samples.begin() + static_cast<std::ptrdiff_t>(train_count));
    test.samples.assign(dataset.samples.begin() + static_cast<std::ptrdiff_t>(train_count), dataset.samples.end());
    return {std::move(train), std::move(test)};
}

}  // namespace beamprobe
