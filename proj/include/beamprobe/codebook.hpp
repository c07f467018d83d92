// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_CODEBOOK_HPP
#define BEAMPROBE_CODEBOOK_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "beamprobe/grid.hpp"
#include "beamprobe/probe_select.hpp"

namespace beamprobe {

// Location-specific probing codebook: one codeword of l1 beams per grid cell.
struct ProbingCodebook
{
    GridSpec grid;
    int l1 = 0;
    std::vector<std::vector<int>> beams;  // indexed by grid.flat(i, j)

    void validate() const;
    bool operator==(const ProbingCodebook&) const = default;
};

using LocationMean = std::function<Eigen::VectorXd(const Eigen::Vector2d&)>;

// Greedy masked selection per cell with the mask input held at
// location_mean(cell center) and lambda from stages[k].variance.
ProbingCodebook design_codebook(std::span<const PredictorHandle> stages, const LocationMean& location_mean,
                                const GridSpec& grid, int l1,
                                const SelectionObjective& objective = SelectionObjective::masked());

// Codeword of the cell whose center is nearest to s (clamped outside the grid).
const std::vector<int>& codebook_lookup(const ProbingCodebook& codebook, const Eigen::Vector2d& s);

struct TwoStageDecision
{
    int beam;
    std::vector<int> stage1;
    std::vector<int> stage2;
    Eigen::VectorXd estimate;  // predictions with every measured entry overwritten
};

// Stage 1 probes the codeword, stage 2 the l2 unmeasured beams with the
// largest predicted mean. Exactly two feedback calls.
TwoStageDecision two_stage_online(const ProbingCodebook& codebook, const PredictorHandle& mean_predictor,
                                  const Eigen::Vector2d& s, int l1, int l2, const FeedbackOracle& feedback);

void write_codebook(const ProbingCodebook& codebook, const std::filesystem::path& path);
ProbingCodebook read_codebook(const std::filesystem::path& path);

}  // namespace beamprobe

#endif  // BEAMPROBE_CODEBOOK_HPP
