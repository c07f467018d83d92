// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/empirical_model.hpp"

#include <fstream>
#include <map>

#include "beamprobe/errors.hpp"
#include "beamprobe/json_io.hpp"

namespace beamprobe {

namespace {

constexpr const char* kModelFormat = "beamprobe.empirical_gaussian";

}  // namespace

EmpiricalGaussianModel::EmpiricalGaussianModel(GridSpec grid, GaussianBelief global, std::vector<Cell> cells,
                                               std::size_t min_count, double jitter)
    : grid_(grid), global_(std::move(global)), cells_(std::move(cells)), min_count_(min_count), jitter_(jitter)
{
    grid_.validate();
    lookup_.assign(static_cast<std::size_t>(grid_.cell_count()), -1);
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        const int idx = cells_[k].index;
        if (idx < 0 || idx >= grid_.cell_count())
            throw std::invalid_argument("EmpiricalGaussianModel: cell index outside grid");
        lookup_[static_cast<std::size_t>(idx)] = static_cast<int>(k);
    }
}

const GaussianBelief& EmpiricalGaussianModel::at(const Eigen::Vector2d& s) const
{
    const double x = (s.x() - grid_.origin.x()) / grid_.cell;
    const double y = (s.y() - grid_.origin.y()) / grid_.cell;
    const int i = std::clamp(static_cast<int>(std::floor(x)), 0, grid_.nx - 1);
    const int j = std::clamp(static_cast<int>(std::floor(y)), 0, grid_.ny - 1);
    const int k = lookup_[static_cast<std::size_t>(grid_.flat(i, j))];
    return k < 0 ? global_ : cells_[static_cast<std::size_t>(k)].belief;
}

bool EmpiricalGaussianModel::operator==(const EmpiricalGaussianModel& other) const
{
    if (grid_.origin != other.grid_.origin || grid_.cell != other.grid_.cell || grid_.nx != other.grid_.nx ||
        grid_.ny != other.grid_.ny || min_count_ != other.min_count_ || jitter_ != other.jitter_ ||
        cells_.size() != other.cells_.size())
        return false;
    if (global_.mu != other.global_.mu || global_.sigma != other.global_.sigma)
        return false;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        const auto& a = cells_[k];
        const auto& b = other.cells_[k];
        if (a.index != b.index || a.count != b.count || a.belief.mu != b.belief.mu || a.belief.sigma != b.belief.sigma)
            return false;
    }
    return true;
}

GaussianBelief sample_gaussian(const std::vector<const Eigen::VectorXd*>& rows, double jitter)
{
    if (rows.empty())
        throw std::invalid_argument("sample_gaussian: no samples");
    const Eigen::Index n = rows.front()->size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t r = 0; r < rows.size(); ++r)
        x.row(static_cast<Eigen::Index>(r)) = rows[r]->transpose();
    GaussianBelief b;
    b.mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - b.mu.transpose();
    const double denom = rows.size() > 1 ? static_cast<double>(rows.size() - 1) : 1.0;
    b.sigma = (centered.transpose() * centered) / denom;
    b.sigma.diagonal().array() += jitter;
    return b;
}

EmpiricalGaussianModel fit_empirical_gaussian(const Dataset& dataset, double cell_size, std::size_t min_count,
                                              std::optional<double> jitter)
{
    if (dataset.samples.empty())
        throw std::invalid_argument("fit_empirical_gaussian: empty dataset");
    if (!(cell_size > 0.0))
        throw std::invalid_argument("fit_empirical_gaussian: cell size must be positive");

    std::vector<const Eigen::VectorXd*> all;
    all.reserve(dataset.size());
    Eigen::Vector2d lo = dataset.samples.front().location;
    Eigen::Vector2d hi = lo;
    for (const auto& s : dataset.samples) {
        all.push_back(&s.rsrp_dbm);
        lo = lo.cwiseMin(s.location);
        hi = hi.cwiseMax(s.location);
    }
    GaussianBelief global = sample_gaussian(all, 0.0);
    const double load = jitter ? *jitter : 1e-6 * global.sigma.trace() / static_cast<double>(dataset.n());
    global.sigma.diagonal().array() += load;

    const GridSpec grid = GridSpec::covering(lo, hi, cell_size);
    std::map<int, std::vector<const Eigen::VectorXd*>> bins;
    for (const auto& s : dataset.samples) {
        const int i = std::clamp(static_cast<int>(std::floor((s.location.x() - grid.origin.x()) / cell_size)), 0,
                                 grid.nx - 1);
        const int j = std::clamp(static_cast<int>(std::floor((s.location.y() - grid.origin.y()) / cell_size)), 0,
                                 grid.ny - 1);
        bins[grid.flat(i, j)].push_back(&s.rsrp_dbm);
    }

    std::vector<EmpiricalGaussianModel::Cell> cells;
    for (const auto& [index, rows] : bins)
        if (rows.size() >= std::max<std::size_t>(min_count, 2))
            cells.push_back({index, rows.size(), sample_gaussian(rows, load)});
    return EmpiricalGaussianModel(grid, std::move(global), std::move(cells), min_count, load);
}

namespace {

void write_belief(std::ofstream& out, const GaussianBelief& b)
{
    out.write(reinterpret_cast<const char*>(b.mu.data()), static_cast<std::streamsize>(sizeof(double) * b.mu.size()));
    // Eigen is column-major; the blob is row-major (identical for symmetric
    // matrices, but written explicitly)
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = b.sigma;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

GaussianBelief read_belief(std::ifstream& in, int n, const std::string& where)
{
    GaussianBelief b;
    b.mu.resize(n);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
    in.read(reinterpret_cast<char*>(b.mu.data()), static_cast<std::streamsize>(sizeof(double) * n));
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
    if (!in)
        throw DataError("truncated model blob " + where);
    b.sigma = rm;
    return b;
}

}  // namespace

void write_empirical_model(const EmpiricalGaussianModel& model, const std::filesystem::path& header_path)
{
    auto blob_path = header_path;
    blob_path.replace_extension(".bin");
    const int n = model.n();
    const std::size_t stride = sizeof(double) * static_cast<std::size_t>(n + n * n);

    json cells = json::array();
    for (std::size_t k = 0; k < model.cells().size(); ++k) {
        const auto& c = model.cells()[k];
        cells.push_back({{"index", c.index}, {"count", c.count}, {"offset", (k + 1) * stride}});
    }
    const auto& g = model.grid();
    json header{{"format", kModelFormat},
                {"version", 1},
                {"n", n},
                {"grid", {{"origin", vec2_to_json(g.origin)}, {"cell", g.cell}, {"nx", g.nx}, {"ny", g.ny}}},
                {"min_count", model.min_count()},
                {"jitter", model.jitter()},
                {"global_offset", 0},
                {"cells", cells},
                {"blob", blob_path.filename().string()}};
    write_json_file(header_path, header);

    std::ofstream out(blob_path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + blob_path.string());
    write_belief(out, model.global());
    for (const auto& c : model.cells())
        write_belief(out, c.belief);
}

EmpiricalGaussianModel read_empirical_model(const std::filesystem::path& header_path)
{
    const json header = read_json_file(header_path);
    if (header.value("format", std::string()) != kModelFormat)
        throw DataError(header_path.string() + " is not an empirical Gaussian model");
    try {
        const int n = header.at("n").get<int>();
        GridSpec grid;
        grid.origin = vec2_from_json(header.at("grid").at("origin"));
        grid.cell = header.at("grid").at("cell").get<double>();
        grid.nx = header.at("grid").at("nx").get<int>();
        grid.ny = header.at("grid").at("ny").get<int>();

        const auto blob_path = header_path.parent_path() / header.at("blob").get<std::string>();
        std::ifstream in(blob_path, std::ios::binary);
        if (!in)
            throw DataError("cannot open " + blob_path.string());
        in.seekg(header.at("global_offset").get<std::streamoff>());
        GaussianBelief global = read_belief(in, n, blob_path.string());
        std::vector<EmpiricalGaussianModel::Cell> cells;
        for (const auto& c : header.at("cells")) {
            in.seekg(c.at("offset").get<std::streamoff>());
            cells.push_back({c.at("index").get<int>(), c.at("count").get<std::size_t>(),
                             read_belief(in, n, blob_path.string())});
        }
        return EmpiricalGaussianModel(grid, std::move(global), std::move(cells),
                                      header.at("min_count").get<std::size_t>(), header.at("jitter").get<double>());
    } catch (const json::exception& e) {
        throw DataError("incomplete model header " + header_path.string() + ": " + e.what());
    }
}

}  // namespace beamprobe
