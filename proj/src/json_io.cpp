// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/json_io.hpp"

#include <cstdio>
#include <fstream>

#include "beamprobe/errors.hpp"

namespace beamprobe {

json vec2_to_json(const Eigen::Vector2d& v)
{
    return json::array({v.x(), v.y()});
}

Eigen::Vector2d vec2_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("expected a 2-element array");
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

void to_json(json& j, const ArrayGeometry& g)
{
    j = json{{"n_phi", g.n_phi}, {"n_theta", g.n_theta}};
}

void from_json(const json& j, ArrayGeometry& g)
{
    g.n_phi = j.value("n_phi", g.n_phi);
    g.n_theta = j.value("n_theta", g.n_theta);
}

void to_json(json& j, const MeasurementNoise& n)
{
    j = json{{"sigma_x2", n.sigma_x2}, {"sigma_s2", n.sigma_s2}};
    j["rsrp_quant_db"] = n.rsrp_quant_db ? json(*n.rsrp_quant_db) : json(nullptr);
}

void from_json(const json& j, MeasurementNoise& n)
{
    n.sigma_x2 = j.value("sigma_x2", n.sigma_x2);
    n.sigma_s2 = j.value("sigma_s2", n.sigma_s2);
    if (j.contains("rsrp_quant_db")) {
        const auto& q = j.at("rsrp_quant_db");
        n.rsrp_quant_db = q.is_null() ? std::nullopt : std::optional<double>(q.get<double>());
    }
}

void to_json(json& j, const Rect& r)
{
    j = json{{"origin", vec2_to_json(r.origin)}, {"width", r.width}, {"height", r.height}};
}

void from_json(const json& j, Rect& r)
{
    r.origin = vec2_from_json(j.at("origin"));
    r.width = j.at("width").get<double>();
    r.height = j.at("height").get<double>();
}

void to_json(json& j, const SceneConfig& c)
{
    j = json{{"area", c.area},
             {"bs_location", vec2_to_json(c.bs_location)},
             {"bs_height", c.bs_height},
             {"mu_height", c.mu_height},
             {"bs_azimuth", c.bs_azimuth},
             {"n_scatterers", c.n_scatterers},
             {"n_cl", c.n_cl},
             {"n_ray", c.n_ray},
             {"angle_spread", c.angle_spread},
             {"scatterer_height_min", c.scatterer_height_min},
             {"scatterer_height_max", c.scatterer_height_max},
             {"scatterer_gain_std_db", c.scatterer_gain_std_db},
             {"blockers", c.blockers},
             {"los_gain_db", c.los_gain_db},
             {"nlos_gain_db", c.nlos_gain_db},
             {"seed", c.seed}};
}

void from_json(const json& j, SceneConfig& c)
{
    if (j.contains("area"))
        c.area = j.at("area").get<Rect>();
    if (j.contains("bs_location"))
        c.bs_location = vec2_from_json(j.at("bs_location"));
    c.bs_height = j.value("bs_height", c.bs_height);
    c.mu_height = j.value("mu_height", c.mu_height);
    c.bs_azimuth = j.value("bs_azimuth", c.bs_azimuth);
    c.n_scatterers = j.value("n_scatterers", c.n_scatterers);
    c.n_cl = j.value("n_cl", c.n_cl);
    c.n_ray = j.value("n_ray", c.n_ray);
    c.angle_spread = j.value("angle_spread", c.angle_spread);
    c.scatterer_height_min = j.value("scatterer_height_min", c.scatterer_height_min);
    c.scatterer_height_max = j.value("scatterer_height_max", c.scatterer_height_max);
    c.scatterer_gain_std_db = j.value("scatterer_gain_std_db", c.scatterer_gain_std_db);
    if (j.contains("blockers"))
        c.blockers = j.at("blockers").get<std::vector<Rect>>();
    c.los_gain_db = j.value("los_gain_db", c.los_gain_db);
    c.nlos_gain_db = j.value("nlos_gain_db", c.nlos_gain_db);
    c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const MaskParams& m)
{
    j = json{{"alpha", m.alpha}, {"beta", m.beta}};
}

void from_json(const json& j, MaskParams& m)
{
    m.alpha = j.value("alpha", m.alpha);
    m.beta = j.value("beta", m.beta);
}

std::string to_hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t from_hex(const std::string& s)
{
    return std::stoull(s, nullptr, 16);
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace beamprobe
