// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

#include "beamprobe/empirical_model.hpp"
#include "beamprobe/errors.hpp"
#include "beamprobe/training.hpp"

namespace beamprobe {

namespace {

const std::vector<std::string> kSchemes{"uniform", "iter_bp_pbs", "two_stage", "location_only"};

Eigen::VectorXd gather(const Eigen::VectorXd& x, std::span<const int> idx)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
        out(static_cast<Eigen::Index>(k)) = x(idx[k]);
    return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void ExperimentConfig::validate() const
{
    if (std::find(kSchemes.begin(), kSchemes.end(), scheme) == kSchemes.end())
        throw ConfigError("unknown scheme '" + scheme + "' (expected uniform, iter_bp_pbs, two_stage or location_only)");
    if ((scheme == "uniform" || scheme == "iter_bp_pbs") && l < 1)
        throw ConfigError("scheme " + scheme + " needs l >= 1");
    if (scheme == "two_stage") {
        if (l1 < 1 || l2 < 0)
            throw ConfigError("scheme two_stage needs l1 >= 1 and l2 >= 0");
        if (codebook.empty())
            throw ConfigError("scheme two_stage needs a codebook path");
    }
    if (mask_params.beta < 0.0)
        throw ConfigError("mask beta must be non-negative");
    try {
        ear.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

SelectionObjective ExperimentConfig::objective() const
{
    return mask ? SelectionObjective::masked(mask_params) : SelectionObjective::plain();
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base)
{
    if (!j.is_object())
        throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        c.scheme = j.value("scheme", c.scheme);
        c.mask = j.value("mask", c.mask);
        if (j.contains("mask_params"))
            c.mask_params = j.at("mask_params").get<MaskParams>();
        c.l = j.value("l", c.l);
        c.l1 = j.value("l1", c.l1);
        c.l2 = j.value("l2", c.l2);
        if (j.contains("dataset"))
            c.dataset = resolve(base, j.at("dataset").get<std::string>());
        if (j.contains("model"))
            c.model = resolve(base, j.at("model").get<std::string>());
        if (j.contains("codebook"))
            c.codebook = resolve(base, j.at("codebook").get<std::string>());
        if (j.contains("uniform_model"))
            c.uniform_model = resolve(base, j.at("uniform_model").get<std::string>());
        c.seed = j.value("seed", c.seed);
        if (j.contains("out"))
            c.out = resolve(base, j.at("out").get<std::string>());
        if (j.contains("ear")) {
            const auto& e = j.at("ear");
            c.ear.t_symbol_s = e.value("t_symbol_s", c.ear.t_symbol_s);
            c.ear.t_slot_s = e.value("t_slot_s", c.ear.t_slot_s);
            c.ear.noise_psd_dbm_hz = e.value("noise_psd_dbm_hz", c.ear.noise_psd_dbm_hz);
            c.ear.bandwidth_hz = e.value("bandwidth_hz", c.ear.bandwidth_hz);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
    return c;
}

json experiment_config_to_json(const ExperimentConfig& c)
{
    return {{"scheme", c.scheme},
            {"mask", c.mask},
            {"mask_params", c.mask_params},
            {"l", c.l},
            {"l1", c.l1},
            {"l2", c.l2},
            {"dataset", c.dataset.string()},
            {"model", c.model.string()},
            {"codebook", c.codebook.string()},
            {"uniform_model", c.uniform_model.string()},
            {"seed", c.seed},
            {"ear",
             {{"t_symbol_s", c.ear.t_symbol_s},
              {"t_slot_s", c.ear.t_slot_s},
              {"noise_psd_dbm_hz", c.ear.noise_psd_dbm_hz},
              {"bandwidth_hz", c.ear.bandwidth_hz}}}};
}

json metrics_to_json(const MetricsReport& r)
{
    json top = json::object();
    for (const auto& [k, v] : r.top_k)
        top[std::to_string(k)] = v;
    return {{"mse_db2", r.mse_db2},
            {"top_k", top},
            {"rsrp_diff_db", r.rsrp_diff_db},
            {"ear_bps_hz", r.ear_bps_hz},
            {"oracle_rate_bps_hz", r.oracle_rate_bps_hz},
            {"probes_used", r.probes_used},
            {"interactions", r.interactions},
            {"samples", r.samples}};
}

SchemeRun run_scheme(const ExperimentConfig& config, const Dataset& test, const PredictorStages& stages,
                     const ProbingCodebook* codebook, const PredictorHandle* uniform_stage)
{
    config.validate();
    if (stages.empty())
        throw std::invalid_argument("run_scheme: no predictor stages");
    const auto objective = config.objective();
    const std::vector<int> uniform_beams =
        config.scheme == "uniform" ? uniform_probing_beams(test.geometry, config.l) : std::vector<int>{};
    if (config.scheme == "two_stage" && !codebook)
        throw ConfigError("scheme two_stage needs a codebook");

    SchemeRun run;
    run.predictions.reserve(test.size());
    int interactions = -1;
    int probes = -1;
    for (const auto& smp : test.samples) {
        int calls = 0;
        int probed = 0;
        const FeedbackOracle feedback = [&](std::span<const int> beams) {
            ++calls;
            probed += static_cast<int>(beams.size());
            return gather(smp.rsrp_dbm, beams);
        };
        SamplePrediction p;
        if (config.scheme == "location_only") {
            p.estimate = stages.front().mean(Eigen::VectorXd(), {}, smp.location);
        } else if (config.scheme == "uniform") {
            const auto& stage = uniform_stage ? *uniform_stage
                                              : stages[std::min<std::size_t>(static_cast<std::size_t>(config.l),
                                                                             stages.size() - 1)];
            const Eigen::VectorXd x = feedback(uniform_beams);
            p.estimate = stage.mean(x, uniform_beams, smp.location);
            for (std::size_t k = 0; k < uniform_beams.size(); ++k)
                p.estimate(uniform_beams[k]) = x(static_cast<Eigen::Index>(k));
        } else if (config.scheme == "iter_bp_pbs") {
            p.estimate = iter_online(stages, smp.location, config.l, objective, feedback).estimate;
        } else {
            if (static_cast<int>(stages.size()) <= config.l1)
                throw std::invalid_argument("run_scheme: no predictor stage for l1 = " + std::to_string(config.l1));
            p.estimate = two_stage_online(*codebook, stages[static_cast<std::size_t>(config.l1)], smp.location,
                                          config.l1, config.l2, feedback)
                             .estimate;
        }
        p.chosen = argmax_first(p.estimate);
        if (interactions >= 0 && (interactions != calls || probes != probed))
            throw std::logic_error("run_scheme: probing budget varied between samples");
        interactions = calls;
        probes = probed;
        run.predictions.push_back(std::move(p));
    }
    run.outcomes = sample_outcomes(run.predictions, test);
    run.report = evaluate(run.predictions, test, std::max(probes, 0), std::max(interactions, 0), config.ear);
    return run;
}

PredictorStages load_stages(const std::filesystem::path& model_path, int rounds)
{
    const json header = read_json_file(model_path);
    const std::string format = header.value("format", std::string());
    if (format == "beamprobe.empirical_gaussian") {
        auto model = std::make_shared<const EmpiricalGaussianModel>(read_empirical_model(model_path));
        return replicate_stages(empirical_handle(model), rounds);
    }
    if (format == "beamprobe.predictor_set") {
        const PredictorSet set = read_predictor_set(model_path);
        if (set.rounds() < rounds)
            throw DataError(model_path.string() + " holds " + std::to_string(set.rounds()) +
                            " rounds, the experiment needs " + std::to_string(rounds));
        return make_neural_stages(set);
    }
    throw DataError(model_path.string() + " is neither an empirical Gaussian model nor a predictor set");
}

void write_outcomes_csv(const std::vector<SampleOutcome>& outcomes, const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f)
        throw DataError("cannot write " + path.string());
    std::fprintf(f, "sample_id,true_best,chosen,rsrp_true_best,rsrp_chosen,top1,top3,top5\n");
    for (const auto& o : outcomes)
        std::fprintf(f, "%zu,%d,%d,%.6f,%.6f,%d,%d,%d\n", o.sample_id, o.true_best, o.chosen, o.rsrp_true_best,
                     o.rsrp_chosen, o.top1 ? 1 : 0, o.top3 ? 1 : 0, o.top5 ? 1 : 0);
    std::fclose(f);
}

MetricsReport run_experiment(const ExperimentConfig& config)
{
    config.validate();
    if (config.dataset.empty())
        throw ConfigError("experiment config needs a dataset path");
    if (config.model.empty())
        throw ConfigError("experiment config needs a model path");
    const Dataset test = read_dataset(config.dataset);

    int rounds = 0;
    if (config.scheme == "iter_bp_pbs")
        rounds = config.l;
    else if (config.scheme == "two_stage")
        rounds = config.l1;
    const PredictorStages stages = load_stages(config.model, rounds);

    std::unique_ptr<ProbingCodebook> codebook;
    if (config.scheme == "two_stage")
        codebook = std::make_unique<ProbingCodebook>(read_codebook(config.codebook));
    std::unique_ptr<PredictorHandle> uniform;
    if (config.scheme == "uniform" && !config.uniform_model.empty()) {
        const auto set = read_predictor_set(config.uniform_model);
        uniform = std::make_unique<PredictorHandle>(make_neural_stages(set).back());
    }

    SchemeRun run;
    try {
        run = run_scheme(config, test, stages, codebook.get(), uniform.get());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("inputs do not fit together: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw DataError(std::string("inputs do not fit together: ") + e.what());
    }
    json report{{"format", "beamprobe.report"},
                {"version", 1},
                {"config", experiment_config_to_json(config)},
                {"metrics", metrics_to_json(run.report)}};
    write_json_file(config.out / "report.json", report);
    write_outcomes_csv(run.outcomes, config.out / "outcomes.csv");
    return run.report;
}

}  // namespace beamprobe
