// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_PROBE_SELECT_HPP
#define BEAMPROBE_PROBE_SELECT_HPP

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "beamprobe/empirical_model.hpp"
#include "beamprobe/gaussian.hpp"

namespace beamprobe {

struct SelectionObjective
{
    enum class Mode { plain, masked };
    Mode mode = Mode::masked;
    MaskParams mask;

    static SelectionObjective plain() { return {Mode::plain, {}}; }
    static SelectionObjective masked(MaskParams m = {}) { return {Mode::masked, m}; }
};

// Mean/variance predictors for one stage. A stage indexed k was fitted on
// measured sets of size k:
//   mean(x_q, q, s)  -> n-vector of predicted RSRP (dBm), x_q aligned with q
//   variance(q, s)   -> n-vector of predicted variances; entries outside P unused
struct PredictorHandle
{
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, std::span<const int>, const Eigen::Vector2d&)> mean;
    std::function<Eigen::VectorXd(std::span<const int>, const Eigen::Vector2d&)> variance;

    explicit operator bool() const { return mean && variance; }
};

// Stage list: entry 0 is location-only, entry k serves round k.
using PredictorStages = std::vector<PredictorHandle>;

// Measures the given beams and returns their feedback in dBm. One call is one
// BS-MU interaction.
using FeedbackOracle = std::function<Eigen::VectorXd(std::span<const int>)>;

struct ProbingPlan
{
    std::vector<int> order;        // q^{1,*}, ..., q^{L,*}
    std::vector<double> measured;  // feedback (or predicted stand-in) per probed beam
    std::vector<double> round_cost;
};

struct ExhaustiveResult
{
    std::vector<int> beams;  // ascending
    double objective;
};

// log det(D^1/2 Sigma_{P|Q} D^1/2) with D from the mask of mu_P (plain: D = I).
// Zero when Q covers every beam.
double selection_objective(const GaussianBelief& belief, std::span<const int> q, const SelectionObjective& objective);

// Global minimum of selection_objective over all C(n, l) sets; ties go to the
// lexicographically smallest set. Guarded to n <= 20.
ExhaustiveResult exhaustive_select(const GaussianBelief& belief, int l, const SelectionObjective& objective);

// Greedy one-beam-per-round selection. Round k scores every unmeasured beam q
// by sum_{i in P \ {q}} ln(d_i lambda_i), lambda from stages[k].variance on
// Q u {q}, d from the mask of stages[k-1].mean on the current measurements.
// With feedback each chosen beam is measured before the next round; without,
// the predicted mean stands in for the measurement.
ProbingPlan greedy_select(std::span<const PredictorHandle> stages, int l, const SelectionObjective& objective,
                          const Eigen::Vector2d& location, const FeedbackOracle* feedback = nullptr);

// Same, with exact conditional moments of a fixed belief.
ProbingPlan greedy_select(const GaussianBelief& belief, int l, const SelectionObjective& objective,
                          const FeedbackOracle* feedback = nullptr);

// Greedy selection where the mask input is a fixed mean vector (codebook
// design); lambda still comes from stages[k].variance.
ProbingPlan greedy_select_fixed_mask(std::span<const PredictorHandle> stages, int l,
                                     const SelectionObjective& objective, const Eigen::Vector2d& location,
                                     const Eigen::VectorXd& mask_mean);

// One greedy round: the unmeasured beam minimizing the masked log-variance
// sum over the remaining beams. Ties go to the smallest index.
int greedy_round(const Eigen::VectorXd& mask_mean, std::span<const int> q, const PredictorHandle& variance_stage,
                 const SelectionObjective& objective, const Eigen::Vector2d& location, double* cost = nullptr);

struct BeamDecision
{
    int beam;
    ProbingPlan plan;
    Eigen::VectorXd estimate;  // predictions with measured entries overwritten
};

// Online iterative probing: l feedback interactions, then the final mean
// prediction with measurements written back; returns its argmax.
BeamDecision iter_online(std::span<const PredictorHandle> stages, const Eigen::Vector2d& location, int l,
                         const SelectionObjective& objective, const FeedbackOracle& feedback);

// Stage handles backed by exact Gaussian conditioning.
PredictorHandle belief_handle(GaussianBelief belief);
PredictorHandle empirical_handle(std::shared_ptr<const EmpiricalGaussianModel> model);
PredictorStages replicate_stages(const PredictorHandle& handle, int rounds);

// Index of the largest entry; ties go to the smallest index.
int argmax_first(const Eigen::VectorXd& v);

}  // namespace beamprobe

#endif  // BEAMPROBE_PROBE_SELECT_HPP
