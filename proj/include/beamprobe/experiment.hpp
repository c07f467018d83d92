// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_EXPERIMENT_HPP
#define BEAMPROBE_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "beamprobe/codebook.hpp"
#include "beamprobe/dataset.hpp"
#include "beamprobe/json_io.hpp"
#include "beamprobe/metrics.hpp"
#include "beamprobe/probe_select.hpp"

namespace beamprobe {

struct ExperimentConfig
{
    std::string scheme = "iter_bp_pbs";  // uniform | iter_bp_pbs | two_stage | location_only
    bool mask = true;
    MaskParams mask_params;
    int l = 8;
    int l1 = 3;
    int l2 = 5;
    std::filesystem::path dataset;
    std::filesystem::path model;  // empirical Gaussian header or predictor set manifest
    std::filesystem::path codebook;
    std::filesystem::path uniform_model;  // optional predictor set for the uniform baseline
    std::uint64_t seed = 1;
    std::filesystem::path out = "out";
    EarParams ear;

    // Throws ConfigError on an unknown scheme or missing scheme parameters.
    void validate() const;
    SelectionObjective objective() const;
};

// Keys absent from j keep their defaults; relative paths resolve against base.
ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base = {});
json experiment_config_to_json(const ExperimentConfig& c);
json metrics_to_json(const MetricsReport& r);

struct SchemeRun
{
    std::vector<SamplePrediction> predictions;
    std::vector<SampleOutcome> outcomes;
    MetricsReport report;
};

// Runs one scheme over every sample of `test`, the sample's sweep serving as
// feedback. Interactions and probes are counted at the feedback oracle.
SchemeRun run_scheme(const ExperimentConfig& config, const Dataset& test, const PredictorStages& stages,
                     const ProbingCodebook* codebook = nullptr, const PredictorHandle* uniform_stage = nullptr);

// Stage list of `rounds + 1` handles from either model format.
PredictorStages load_stages(const std::filesystem::path& model_path, int rounds);

// Loads inputs, runs the scheme, writes report.json and outcomes.csv under
// config.out.
MetricsReport run_experiment(const ExperimentConfig& config);

void write_outcomes_csv(const std::vector<SampleOutcome>& outcomes, const std::filesystem::path& path);

}  // namespace beamprobe

#endif  // BEAMPROBE_EXPERIMENT_HPP
