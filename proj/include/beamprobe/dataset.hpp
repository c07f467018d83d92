// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_DATASET_HPP
#define BEAMPROBE_DATASET_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "beamprobe/beamspace.hpp"
#include "beamprobe/channel_scene.hpp"

namespace beamprobe {

struct Sample
{
    Eigen::Vector2d location;  // observed MU position relative to the BS, m
    Eigen::VectorXd rsrp_dbm;  // full beam sweep feedback
};

struct Dataset
{
    ArrayGeometry geometry;
    std::uint64_t scene_fingerprint = 0;
    MeasurementNoise noise;
    std::uint64_t seed = 0;
    Rect location_area;  // scene area in BS-relative coordinates
    std::vector<Sample> samples;

    int n() const { return geometry.n(); }
    std::size_t size() const { return samples.size(); }
};

// Values written to the CSV body carry 6 decimals; generated values are
// rounded to that grid so that memory and disk agree bit for bit.
inline constexpr int kCsvDecimals = 6;
double round_to_csv_precision(double v);

// MU position uniform over the area outside every blocker.
Eigen::Vector2d sample_outdoor_location(const SceneConfig& config, Rng& rng);

// Sample `index` of the dataset with the given seed. Depends only on
// (scene, geom, noise, seed, index).
Sample generate_sample(const Scene& scene, const ArrayGeometry& geom, const ComplexMatrix& codebook,
                       const MeasurementNoise& noise, std::uint64_t seed, std::uint64_t index);

Dataset generate_dataset(const Scene& scene, const ArrayGeometry& geom, std::size_t n_samples,
                         const MeasurementNoise& noise, std::uint64_t seed);

// Header JSON at `header_path`, CSV body next to it (same stem, .csv).
void write_dataset(const Dataset& dataset, const std::filesystem::path& header_path);
Dataset read_dataset(const std::filesystem::path& header_path);

// Deterministic split: the first `train_count` samples and the rest.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::size_t train_count);

}  // namespace beamprobe

#endif  // BEAMPROBE_DATASET_HPP
