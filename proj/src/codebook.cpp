// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/codebook.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "beamprobe/errors.hpp"
#include "beamprobe/json_io.hpp"

namespace beamprobe {

namespace {

constexpr const char* kCodebookFormat = "beamprobe.codebook";

}  // namespace

void ProbingCodebook::validate() const
{
    grid.validate();
    if (l1 < 1)
        throw std::invalid_argument("ProbingCodebook: l1 must be positive");
    if (static_cast<int>(beams.size()) != grid.cell_count())
        throw std::invalid_argument("ProbingCodebook: codeword count does not match the grid");
    for (const auto& cw : beams) {
        if (static_cast<int>(cw.size()) != l1)
            throw std::invalid_argument("ProbingCodebook: codeword length differs from l1");
        std::vector<int> sorted = cw;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.front() < 0)
            throw std::invalid_argument("ProbingCodebook: codeword beams must be distinct and non-negative");
    }
}

ProbingCodebook design_codebook(std::span<const PredictorHandle> stages, const LocationMean& location_mean,
                                const GridSpec& grid, int l1, const SelectionObjective& objective)
{
    grid.validate();
    if (l1 < 1)
        throw std::invalid_argument("design_codebook: l1 must be positive");
    ProbingCodebook cb;
    cb.grid = grid;
    cb.l1 = l1;
    cb.beams.resize(static_cast<std::size_t>(grid.cell_count()));
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const Eigen::Vector2d c = grid.center(i, j);
            const Eigen::VectorXd mu = location_mean(c);
            cb.beams[static_cast<std::size_t>(grid.flat(i, j))] =
                greedy_select_fixed_mask(stages, l1, objective, c, mu).order;
        }
    return cb;
}

const std::vector<int>& codebook_lookup(const ProbingCodebook& codebook, const Eigen::Vector2d& s)
{
    if (codebook.beams.empty())
        throw std::invalid_argument("codebook_lookup: empty codebook");
    const auto [i, j] = codebook.grid.nearest(s);
    return codebook.beams[static_cast<std::size_t>(codebook.grid.flat(i, j))];
}

TwoStageDecision two_stage_online(const ProbingCodebook& codebook, const PredictorHandle& mean_predictor,
                                  const Eigen::Vector2d& s, int l1, int l2, const FeedbackOracle& feedback)
{
    if (l1 != codebook.l1)
        throw std::invalid_argument("two_stage_online: l1 differs from the codebook");
    if (l2 < 0)
        throw std::invalid_argument("two_stage_online: negative l2");
    if (!mean_predictor.mean)
        throw std::invalid_argument("two_stage_online: empty mean predictor");

    TwoStageDecision d;
    d.stage1 = codebook_lookup(codebook, s);
    const Eigen::VectorXd x1 = feedback(d.stage1);
    if (x1.size() != l1)
        throw std::runtime_error("two_stage_online: stage-1 feedback has the wrong length");

    d.estimate = mean_predictor.mean(x1, d.stage1, s);
    const int n = static_cast<int>(d.estimate.size());
    if (l1 + l2 > n)
        throw std::invalid_argument("two_stage_online: l1 + l2 exceeds the beam count");
    for (int k = 0; k < l1; ++k)
        d.estimate(d.stage1[static_cast<std::size_t>(k)]) = x1(k);

    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (int q : d.stage1)
        taken[static_cast<std::size_t>(q)] = 1;
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (!taken[static_cast<std::size_t>(i)])
            rest.push_back(i);
    std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) { return d.estimate(a) > d.estimate(b); });
    d.stage2.assign(rest.begin(), rest.begin() + l2);

    const Eigen::VectorXd x2 = feedback(d.stage2);
    if (x2.size() != l2)
        throw std::runtime_error("two_stage_online: stage-2 feedback has the wrong length");
    for (int k = 0; k < l2; ++k)
        d.estimate(d.stage2[static_cast<std::size_t>(k)]) = x2(k);
    d.beam = argmax_first(d.estimate);
    return d;
}

void write_codebook(const ProbingCodebook& codebook, const std::filesystem::path& path)
{
    codebook.validate();
    const auto& g = codebook.grid;
    json cells = json::array();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            cells.push_back({{"i", i},
                             {"j", j},
                             {"center", vec2_to_json(g.center(i, j))},
                             {"beams", codebook.beams[static_cast<std::size_t>(g.flat(i, j))]}});
    json out{{"format", kCodebookFormat},
             {"version", 1},
             {"origin", vec2_to_json(g.origin)},
             {"cell", g.cell},
             {"nx", g.nx},
             {"ny", g.ny},
             {"l1", codebook.l1},
             {"cells", cells}};
    write_json_file(path, out);
}

ProbingCodebook read_codebook(const std::filesystem::path& path)
{
    const json j = read_json_file(path);
    if (j.value("format", std::string()) != kCodebookFormat)
        throw DataError(path.string() + " is not a probing codebook");
    try {
        ProbingCodebook cb;
        cb.grid.origin = vec2_from_json(j.at("origin"));
        cb.grid.cell = j.at("cell").get<double>();
        cb.grid.nx = j.at("nx").get<int>();
        cb.grid.ny = j.at("ny").get<int>();
        cb.l1 = j.at("l1").get<int>();
        cb.grid.validate();
        cb.beams.assign(static_cast<std::size_t>(cb.grid.cell_count()), {});
        for (const auto& c : j.at("cells")) {
            const int i = c.at("i").get<int>();
            const int jj = c.at("j").get<int>();
            if (i < 0 || i >= cb.grid.nx || jj < 0 || jj >= cb.grid.ny)
                throw DataError("codebook cell outside the grid in " + path.string());
            cb.beams[static_cast<std::size_t>(cb.grid.flat(i, jj))] = c.at("beams").get<std::vector<int>>();
        }
        cb.validate();
        return cb;
    } catch (const json::exception& e) {
        throw DataError("incomplete codebook " + path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace beamprobe
