// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_TRAINING_HPP
#define BEAMPROBE_TRAINING_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "beamprobe/dataset.hpp"
#include "beamprobe/predictor.hpp"
#include "beamprobe/probe_select.hpp"

namespace beamprobe {

// 1/2 sum_{i in p} [ln(2 pi lambda_i) + (x_i - mu_i)^2 / lambda_i]
double nll_loss(const Eigen::VectorXd& mu, const Eigen::VectorXd& lambda, const Eigen::VectorXd& x,
                std::span<const int> p);

struct TrainingExample
{
    Eigen::VectorXd x;  // full beam sweep, dBm
    Eigen::Vector2d s;
    std::vector<int> q;  // measured beams; the loss runs over the rest
};

struct LossAndGradient
{
    double loss = 0.0;  // mean over the batch
    ParameterMap grad_mean;
    ParameterMap grad_variance;
};

// Mean-batch NLL of the (f, g) pair and its exact gradients.
LossAndGradient loss_and_gradient(const PredictorModel& f, const PredictorModel& g,
                                  std::span<const TrainingExample> batch);

// Mean-batch NLL without gradients.
double batch_loss(const PredictorModel& f, const PredictorModel& g, std::span<const TrainingExample> batch);

enum class Optimizer { sgd, momentum, adam };

struct TrainConfig
{
    int epochs = 100;
    int batch = 200;
    double lr = 0.001;
    std::uint64_t seed = 1;
    double variance_floor = 1e-3;
    Optimizer optimizer = Optimizer::sgd;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// Measured set for (sample, epoch).
using PartitionSchedule = std::function<std::vector<int>(std::size_t sample, int epoch)>;

struct TrainResult
{
    PredictorModel mean;
    PredictorModel variance;
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;  // mean over the epoch's batches
};

Normalization fit_normalization(const Dataset& dataset);

// Mini-batch descent over seeded shuffles. Throws std::runtime_error when the
// loss becomes non-finite.
TrainResult train(const Dataset& dataset, const PartitionSchedule& schedule, PredictorModel f, PredictorModel g,
                  const TrainConfig& config);

// Trained (f, g) per round; entry k was fitted on measured sets of size k.
struct PredictorSet
{
    std::vector<PredictorModel> mean;
    std::vector<PredictorModel> variance;

    int rounds() const { return static_cast<int>(mean.size()) - 1; }
};

enum class ScheduleKind {
    greedy,  // greedy prefix from earlier rounds plus one random beam per epoch
    random   // random measured set of the round's size, redrawn per epoch
};

struct IterativeTrainConfig
{
    PredictorConfig architecture;  // n, kind and round_index are overwritten
    TrainConfig train;
    int rounds = 8;
    ScheduleKind schedule = ScheduleKind::greedy;
    SelectionObjective objective = SelectionObjective::masked();
};

// Rounds 0..L of iterative training. With the greedy schedule each sample's
// prefix grows by the beam that round's predictors would select on it.
PredictorSet train_iterative(const Dataset& dataset, const IterativeTrainConfig& config,
                             const std::function<void(int, const TrainResult&)>& on_round = {});

// Mean network on a fixed measured set (uniform-probing baseline).
TrainResult train_fixed_set(const Dataset& dataset, std::span<const int> beams, const PredictorConfig& architecture,
                            const TrainConfig& config);

// Handle over one (f, g) pair: the mean carries measured entries through.
PredictorHandle neural_handle(std::shared_ptr<const PredictorModel> f, std::shared_ptr<const PredictorModel> g);
PredictorStages make_neural_stages(const PredictorSet& set);

// Directory manifest listing one (f, g) pair per round.
void write_predictor_set(const PredictorSet& set, const std::filesystem::path& manifest_path);
PredictorSet read_predictor_set(const std::filesystem::path& manifest_path);

}  // namespace beamprobe

#endif  // BEAMPROBE_TRAINING_HPP
