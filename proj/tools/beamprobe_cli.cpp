// SPDX-License-Identifier: Apache-2.0
//
// beamprobe: dataset generation, model fitting and training, probing-beam
// selection, codebook design and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "beamprobe/codebook.hpp"
#include "beamprobe/dataset.hpp"
#include "beamprobe/empirical_model.hpp"
#include "beamprobe/errors.hpp"
#include "beamprobe/experiment.hpp"
#include "beamprobe/json_io.hpp"
#include "beamprobe/metrics.hpp"
#include "beamprobe/training.hpp"

namespace fs = std::filesystem;
using namespace beamprobe;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Globals
{
    std::uint64_t seed = 1;
    std::string config;
    std::string out = "out";
    json file;  // parsed --config, {} when absent
};

// Section of the config file for a subcommand (or the whole file when it has
// no such section), with explicitly given flags layered on top.
json section(const Globals& g, const std::string& name, const json& flags)
{
    json s = g.file.contains(name) ? g.file.at(name) : g.file;
    if (!s.is_object())
        throw ConfigError("config section '" + name + "' must be an object");
    for (const auto& [k, v] : flags.items())
        s[k] = v;
    return s;
}

template <typename T>
T get(const json& s, const std::string& key, T fallback)
{
    try {
        return s.value(key, fallback);
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

std::string need_path(const json& s, const std::string& key)
{
    const auto p = get<std::string>(s, key, "");
    if (p.empty())
        throw ConfigError("missing required path '" + key + "'");
    return p;
}

Eigen::Vector2d parse_location(const std::string& text)
{
    double x = 0.0;
    double y = 0.0;
    char comma = 0;
    std::istringstream in(text);
    if (!(in >> x >> comma >> y) || comma != ',')
        throw ConfigError("location must look like x,y (got '" + text + "')");
    return {x, y};
}

void print_json(const json& j)
{
    std::cout << j.dump(2) << "\n";
}

int cmd_generate(const Globals& g, const json& flags)
{
    const json s = section(g, "generate", flags);
    SceneConfig scene_cfg = SceneConfig::urban_default();
    ArrayGeometry geom;
    MeasurementNoise noise;
    try {
        if (s.contains("scene"))
            from_json(s.at("scene"), scene_cfg);
        if (s.contains("geometry"))
            geom = s.at("geometry").get<ArrayGeometry>();
        if (s.contains("noise"))
            noise = s.at("noise").get<MeasurementNoise>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed generate config: ") + e.what());
    }
    scene_cfg.seed = get<std::uint64_t>(s, "scene_seed", scene_cfg.seed);
    const auto samples = get<std::size_t>(s, "samples", 8000);
    const auto test_samples = get<std::size_t>(s, "test_samples", 0);
    try {
        scene_cfg.validate();
        geom.validate();
        noise.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const Scene scene = build_scene(scene_cfg);
    const fs::path out(g.out);
    write_json_file(out / "scene.json", json{{"format", "beamprobe.scene"},
                                            {"version", 1},
                                            {"config", scene_cfg},
                                            {"fingerprint", to_hex(scene.fingerprint())}});
    const Dataset all = generate_dataset(scene, geom, samples + test_samples, noise, g.seed);
    auto [train, test] = split_dataset(all, samples);
    write_dataset(train, out / "dataset.json");
    if (test_samples > 0)
        write_dataset(test, out / "test.json");
    print_json({{"scene_fingerprint", to_hex(scene.fingerprint())},
                {"samples", train.size()},
                {"test_samples", test.size()},
                {"out", out.string()}});
    return 0;
}

int cmd_fit_gaussian(const Globals& g, const json& flags)
{
    const json s = section(g, "fit-gaussian", flags);
    const Dataset ds = read_dataset(need_path(s, "dataset"));
    const double cell = get<double>(s, "cell", 10.0);
    const auto min_count = get<std::size_t>(s, "min_count", 20);
    std::optional<double> jitter;
    if (s.contains("jitter"))
        jitter = get<double>(s, "jitter", 0.0);
    if (!(cell > 0.0) || (jitter && *jitter < 0.0))
        throw ConfigError("cell must be positive and jitter non-negative");
    const auto model = fit_empirical_gaussian(ds, cell, min_count, jitter);
    const fs::path path = fs::path(g.out) / "empirical.json";
    write_empirical_model(model, path);
    print_json({{"model", path.string()}, {"cells", model.cells().size()}, {"jitter", model.jitter()}});
    return 0;
}

Optimizer parse_optimizer(const std::string& name)
{
    if (name == "sgd")
        return Optimizer::sgd;
    if (name == "momentum")
        return Optimizer::momentum;
    if (name == "adam")
        return Optimizer::adam;
    throw ConfigError("unknown optimizer '" + name + "' (sgd, momentum, adam)");
}

int cmd_train(const Globals& g, const json& flags)
{
    const json s = section(g, "train", flags);
    const Dataset ds = read_dataset(need_path(s, "dataset"));

    IterativeTrainConfig cfg;
    auto& a = cfg.architecture;
    a.embed_channels = get<int>(s, "embed_channels", a.embed_channels);
    a.blocks = get<int>(s, "blocks", a.blocks);
    a.heads = get<int>(s, "heads", a.heads);
    a.key_dim = get<int>(s, "key_dim", a.key_dim);
    a.expansion = get<int>(s, "expansion", a.expansion);
    auto& t = cfg.train;
    t.epochs = get<int>(s, "epochs", t.epochs);
    t.batch = get<int>(s, "batch", t.batch);
    t.lr = get<double>(s, "lr", t.lr);
    t.seed = g.seed;
    t.variance_floor = get<double>(s, "variance_floor", t.variance_floor);
    t.optimizer = parse_optimizer(get<std::string>(s, "optimizer", "sgd"));
    cfg.rounds = get<int>(s, "rounds", cfg.rounds);
    const auto schedule = get<std::string>(s, "schedule", "greedy");
    if (schedule != "greedy" && schedule != "random" && schedule != "uniform")
        throw ConfigError("unknown schedule '" + schedule + "' (greedy, random, uniform)");
    cfg.schedule = schedule == "random" ? ScheduleKind::random : ScheduleKind::greedy;
    if (!get<bool>(s, "mask", true))
        cfg.objective = SelectionObjective::plain();
    try {
        a.n = ds.n();
        a.validate();
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const fs::path path = fs::path(g.out) / "predictors.json";
    json history = json::array();
    PredictorSet set;
    if (schedule == "uniform") {
        const auto beams = uniform_probing_beams(ds.geometry, cfg.rounds);
        auto r = train_fixed_set(ds, beams, a, t);
        history.push_back({{"round", cfg.rounds}, {"initial", r.initial_loss}, {"epochs", r.epoch_loss}});
        set.mean.push_back(std::move(r.mean));
        set.variance.push_back(std::move(r.variance));
    } else {
        set = train_iterative(ds, cfg, [&](int round, const TrainResult& r) {
            history.push_back({{"round", round}, {"initial", r.initial_loss}, {"epochs", r.epoch_loss}});
            std::fprintf(stderr, "round %d: nll %.4f -> %.4f\n", round, r.initial_loss,
                         r.epoch_loss.empty() ? r.initial_loss : r.epoch_loss.back());
        });
    }
    write_predictor_set(set, path);
    write_json_file(fs::path(g.out) / "training_history.json", history);
    print_json({{"predictors", path.string()}, {"stages", set.mean.size()}});
    return 0;
}

int cmd_select(const Globals& g, const json& flags)
{
    const json s = section(g, "select", flags);
    const auto scheme = get<std::string>(s, "scheme", "iter");
    const int l = get<int>(s, "l", 8);
    const auto objective = get<bool>(s, "mask", true) ? SelectionObjective::masked() : SelectionObjective::plain();
    const auto model_path = need_path(s, "model");
    Eigen::Vector2d loc = Eigen::Vector2d::Zero();
    std::optional<Sample> sample;
    if (s.contains("dataset")) {
        const Dataset ds = read_dataset(need_path(s, "dataset"));
        const auto idx = get<std::size_t>(s, "sample", 0);
        if (idx >= ds.size())
            throw DataError("sample index " + std::to_string(idx) + " outside the dataset");
        sample = ds.samples[idx];
        loc = sample->location;
    }
    if (s.contains("location"))
        loc = parse_location(get<std::string>(s, "location", ""));

    json result{{"scheme", scheme}, {"l", l}, {"location", vec2_to_json(loc)}};
    if (scheme == "exhaustive") {
        const json header = read_json_file(model_path);
        if (header.value("format", std::string()) != "beamprobe.empirical_gaussian")
            throw ConfigError("exhaustive selection needs an empirical Gaussian model");
        const auto model = read_empirical_model(model_path);
        try {
            const auto r = exhaustive_select(model.at(loc), l, objective);
            result["beams"] = r.beams;
            result["objective"] = r.objective;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else if (scheme == "iter") {
        const auto stages = load_stages(model_path, l);
        if (l < 1 || l >= static_cast<int>(stages.front().variance({}, loc).size()))
            throw ConfigError("l must lie in [1, n)");
        if (sample) {
            const FeedbackOracle fb = [&](std::span<const int> beams) {
                Eigen::VectorXd x(static_cast<Eigen::Index>(beams.size()));
                for (std::size_t k = 0; k < beams.size(); ++k)
                    x(static_cast<Eigen::Index>(k)) = sample->rsrp_dbm(beams[k]);
                return x;
            };
            const auto d = iter_online(stages, loc, l, objective, fb);
            Eigen::Index best = 0;
            sample->rsrp_dbm.maxCoeff(&best);
            result["beams"] = d.plan.order;
            result["measured"] = d.plan.measured;
            result["chosen"] = d.beam;
            result["true_best"] = best;
        } else {
            const auto plan = greedy_select(stages, l, objective, loc);
            result["beams"] = plan.order;
            result["round_cost"] = plan.round_cost;
        }
    } else {
        throw ConfigError("unknown selection scheme '" + scheme + "' (iter, exhaustive)");
    }
    write_json_file(fs::path(g.out) / "selection.json", result);
    print_json(result);
    return 0;
}

int cmd_design_codebook(const Globals& g, const json& flags)
{
    const json s = section(g, "design-codebook", flags);
    const int l1 = get<int>(s, "l1", 3);
    const double cell = get<double>(s, "cell", 2.0);
    if (l1 < 1 || !(cell > 0.0))
        throw ConfigError("l1 and cell must be positive");
    const auto objective = get<bool>(s, "mask", true) ? SelectionObjective::masked() : SelectionObjective::plain();
    const Dataset ds = read_dataset(need_path(s, "dataset"));
    const auto stages = load_stages(need_path(s, "model"), l1);
    const Rect& area = ds.location_area;
    const GridSpec grid = GridSpec::covering(area.origin, area.max(), cell);
    const PredictorHandle& location_only = stages.front();
    const auto cb = design_codebook(
        stages, [&](const Eigen::Vector2d& c) { return location_only.mean(Eigen::VectorXd(), {}, c); }, grid, l1,
        objective);
    const fs::path path = fs::path(g.out) / "codebook.json";
    write_codebook(cb, path);
    print_json({{"codebook", path.string()}, {"cells", grid.cell_count()}, {"l1", l1}});
    return 0;
}

int cmd_evaluate(const Globals& g, const json& flags)
{
    json s = section(g, "evaluate", flags);
    const fs::path base = g.config.empty() ? fs::path() : fs::path(g.config).parent_path();
    ExperimentConfig cfg = parse_experiment_config(s, base);
    cfg.seed = g.seed;
    if (!s.contains("out"))
        cfg.out = g.out;
    const auto report = run_experiment(cfg);
    print_json(metrics_to_json(report));
    return 0;
}

int cmd_report(const Globals& g, const json& flags)
{
    const json s = section(g, "report", flags);
    const auto reports = get<std::vector<std::string>>(s, "reports", {});
    if (reports.empty())
        throw ConfigError("report needs at least one report.json");
    const int max_users = get<int>(s, "users", 100);
    if (max_users < 1)
        throw ConfigError("users must be positive");
    const EarParams ear_params;

    const fs::path out(g.out);
    fs::create_directories(out);
    std::FILE* summary = std::fopen((out / "summary.csv").string().c_str(), "w");
    std::FILE* sweep = std::fopen((out / "ear_vs_users.csv").string().c_str(), "w");
    if (!summary || !sweep)
        throw DataError("cannot write report files under " + out.string());
    std::fprintf(summary, "report,scheme,probes,interactions,mse_db2,top1,top3,top5,rsrp_diff_db,ear_bps_hz\n");
    std::fprintf(sweep, "users,scheme,probes,ear_bps_hz\n");
    std::printf("%-14s %6s %6s %10s %7s %7s %7s %10s %8s\n", "scheme", "probes", "inter", "mse_db2", "top1", "top3",
                "top5", "rsrp_diff", "ear");
    double oracle = 0.0;
    for (const auto& path : reports) {
        const json r = read_json_file(path);
        try {
            const auto& m = r.at("metrics");
            const auto scheme = r.at("config").at("scheme").get<std::string>();
            const int probes = m.at("probes_used").get<int>();
            const double e = m.at("ear_bps_hz").get<double>();
            std::fprintf(summary, "%s,%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", path.c_str(), scheme.c_str(), probes,
                         m.at("interactions").get<int>(), m.at("mse_db2").get<double>(),
                         m.at("top_k").at("1").get<double>(), m.at("top_k").at("3").get<double>(),
                         m.at("top_k").at("5").get<double>(), m.at("rsrp_diff_db").get<double>(), e);
            std::printf("%-14s %6d %6d %10.3f %7.4f %7.4f %7.4f %10.3f %8.4f\n", scheme.c_str(), probes,
                        m.at("interactions").get<int>(), m.at("mse_db2").get<double>(),
                        m.at("top_k").at("1").get<double>(), m.at("top_k").at("3").get<double>(),
                        m.at("top_k").at("5").get<double>(), m.at("rsrp_diff_db").get<double>(), e);
            const double factor = overhead_factor(probes, ear_params);
            const double rate = factor > 0.0 ? e / factor : 0.0;
            oracle = std::max(oracle, m.value("oracle_rate_bps_hz", 0.0));
            for (int u = 1; u <= max_users; ++u) {
                const int total = probes * u;
                std::fprintf(sweep, "%d,%s,%d,%.6f\n", u, scheme.c_str(), total,
                             overhead_factor(total, ear_params) * rate);
            }
        } catch (const json::exception& e) {
            std::fclose(summary);
            std::fclose(sweep);
            throw DataError("malformed report " + path + ": " + e.what());
        }
    }
    // exhaustive-search baselines are assumed to find the best beam
    for (int u = 1; u <= max_users; ++u) {
        for (const auto& [name, scheme] :
             {std::pair{"two_level", BaselineScheme::two_level}, std::pair{"binary", BaselineScheme::binary}}) {
            const int total = baseline_overheads(u, scheme);
            std::fprintf(sweep, "%d,%s,%d,%.6f\n", u, name, total, overhead_factor(total, ear_params) * oracle);
        }
    }
    std::fclose(summary);
    std::fclose(sweep);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Location-aware probing-beam selection and beam prediction"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--config", g.config, "JSON config file");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    json flags = json::object();
    auto flag_str = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    auto flag_int = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
        sub->add_option_function<long long>(name, [&flags, key](long long v) { flags[key] = v; }, help);
    };
    auto flag_real = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
        sub->add_option_function<double>(name, [&flags, key](double v) { flags[key] = v; }, help);
    };
    auto flag_nomask = [&](CLI::App* sub) {
        sub->add_flag_callback("--no-mask", [&flags] { flags["mask"] = false; }, "Plain conditional entropy");
    };

    auto* gen = app.add_subcommand("generate", "Build the scene and sample a dataset");
    flag_int(gen, "--samples", "samples", "Training samples (default 8000)");
    flag_int(gen, "--test-samples", "test_samples", "Held-out samples written to test.json");
    flag_int(gen, "--scene-seed", "scene_seed", "Seed of the scene geometry");

    auto* fit = app.add_subcommand("fit-gaussian", "Fit the location-binned Gaussian model");
    flag_str(fit, "--dataset", "dataset", "Dataset header");
    flag_real(fit, "--cell", "cell", "Cell side in metres (default 10)");
    flag_int(fit, "--min-count", "min_count", "Samples needed for a cell belief (default 20)");
    flag_real(fit, "--jitter", "jitter", "Diagonal loading, dBm^2");

    auto* tr = app.add_subcommand("train", "Train mean/variance networks per round");
    flag_str(tr, "--dataset", "dataset", "Dataset header");
    flag_int(tr, "--rounds", "rounds", "Probing rounds L (default 8)");
    flag_int(tr, "--epochs", "epochs", "Epochs per round (default 100)");
    flag_int(tr, "--batch", "batch", "Batch size (default 200)");
    flag_real(tr, "--lr", "lr", "Learning rate (default 0.001)");
    flag_str(tr, "--optimizer", "optimizer", "sgd | momentum | adam");
    flag_str(tr, "--schedule", "schedule", "greedy | random | uniform");
    flag_int(tr, "--channels", "embed_channels", "Embedding channels (default 16)");
    flag_int(tr, "--blocks", "blocks", "Attention blocks (default 2)");
    flag_int(tr, "--heads", "heads", "Attention heads (default 1)");
    flag_int(tr, "--key-dim", "key_dim", "Query/key width (default 16)");
    flag_int(tr, "--expansion", "expansion", "Feed-forward widening (default 2)");
    flag_nomask(tr);

    auto* sel = app.add_subcommand("select", "Select probing beams");
    flag_str(sel, "--scheme", "scheme", "iter | exhaustive");
    flag_str(sel, "--model", "model", "Empirical model or predictor set");
    flag_int(sel, "--l", "l", "Probe count");
    flag_str(sel, "--location", "location", "x,y relative to the BS");
    flag_str(sel, "--dataset", "dataset", "Dataset providing live feedback");
    flag_int(sel, "--sample", "sample", "Sample index within --dataset");
    flag_nomask(sel);

    auto* dc = app.add_subcommand("design-codebook", "Design the location-specific probing codebook");
    flag_str(dc, "--dataset", "dataset", "Dataset whose area the grid covers");
    flag_str(dc, "--model", "model", "Empirical model or predictor set");
    flag_int(dc, "--l1", "l1", "Beams per codeword (default 3)");
    flag_real(dc, "--cell", "cell", "Grid cell side in metres (default 2)");
    flag_nomask(dc);

    auto* ev = app.add_subcommand("evaluate", "Run one scheme over a dataset");
    flag_str(ev, "--scheme", "scheme", "uniform | iter_bp_pbs | two_stage | location_only");
    flag_str(ev, "--dataset", "dataset", "Test dataset header");
    flag_str(ev, "--model", "model", "Empirical model or predictor set");
    flag_str(ev, "--codebook", "codebook", "Codebook for two_stage");
    flag_str(ev, "--uniform-model", "uniform_model", "Predictor set for the uniform baseline");
    flag_int(ev, "--l", "l", "Probe count (default 8)");
    flag_int(ev, "--l1", "l1", "Stage-1 probes (default 3)");
    flag_int(ev, "--l2", "l2", "Stage-2 probes (default 5)");
    flag_nomask(ev);

    auto* rp = app.add_subcommand("report", "Summarize reports and sweep EAR over users");
    rp->add_option_function<std::vector<std::string>>(
        "reports", [&flags](const std::vector<std::string>& v) { flags["reports"] = v; }, "report.json files");
    flag_int(rp, "--users", "users", "Largest user count of the sweep (default 100)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (!g.config.empty()) {
            try {
                g.file = read_json_file(g.config);
            } catch (const DataError& e) {
                throw ConfigError(e.what());
            }
            if (!g.file.is_object())
                throw ConfigError("config file must hold a JSON object");
        } else {
            g.file = json::object();
        }
        if (*gen)
            return cmd_generate(g, flags);
        if (*fit)
            return cmd_fit_gaussian(g, flags);
        if (*tr)
            return cmd_train(g, flags);
        if (*sel)
            return cmd_select(g, flags);
        if (*dc)
            return cmd_design_codebook(g, flags);
        if (*ev)
            return cmd_evaluate(g, flags);
        if (*rp)
            return cmd_report(g, flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
