// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_EMPIRICAL_MODEL_HPP
#define BEAMPROBE_EMPIRICAL_MODEL_HPP

#include <filesystem>
#include <optional>
#include <vector>

#include "beamprobe/dataset.hpp"
#include "beamprobe/gaussian.hpp"
#include "beamprobe/grid.hpp"

namespace beamprobe {

// Location-binned Gaussian RSRP model: one belief per grid cell with enough
// samples, the dataset-wide belief everywhere else.
class EmpiricalGaussianModel
{
public:
    struct Cell
    {
        int index;        // flat grid index
        std::size_t count;
        GaussianBelief belief;
    };

    EmpiricalGaussianModel() = default;
    EmpiricalGaussianModel(GridSpec grid, GaussianBelief global, std::vector<Cell> cells, std::size_t min_count,
                           double jitter);

    const GaussianBelief& at(const Eigen::Vector2d& s) const;
    const GaussianBelief& global() const { return global_; }
    const GridSpec& grid() const { return grid_; }
    const std::vector<Cell>& cells() const { return cells_; }
    std::size_t min_count() const { return min_count_; }
    double jitter() const { return jitter_; }
    int n() const { return static_cast<int>(global_.dim()); }

    bool operator==(const EmpiricalGaussianModel& other) const;

private:
    GridSpec grid_;
    GaussianBelief global_;
    std::vector<Cell> cells_;
    std::vector<int> lookup_;  // flat index -> position in cells_, -1 = global
    std::size_t min_count_ = 0;
    double jitter_ = 0.0;
};

// jitter: diagonal loading added to every stored covariance. When unset,
// 1e-6 * trace / n of the dataset-wide covariance is used.
EmpiricalGaussianModel fit_empirical_gaussian(const Dataset& dataset, double cell_size, std::size_t min_count,
                                              std::optional<double> jitter = std::nullopt);

// Sample mean and unbiased sample covariance (plus jitter on the diagonal).
GaussianBelief sample_gaussian(const std::vector<const Eigen::VectorXd*>& rows, double jitter);

// JSON header + row-major float64 blob (same stem, .bin).
void write_empirical_model(const EmpiricalGaussianModel& model, const std::filesystem::path& header_path);
EmpiricalGaussianModel read_empirical_model(const std::filesystem::path& header_path);

}  // namespace beamprobe

#endif  // BEAMPROBE_EMPIRICAL_MODEL_HPP
