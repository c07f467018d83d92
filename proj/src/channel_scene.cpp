// SPDX-License-Identifier: Apache-2.0

#include "beamprobe/channel_scene.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace beamprobe {

bool Rect::intersects_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const
{
    // Liang-Barsky clipping of a + t (b - a), t in [0, 1]
    const Eigen::Vector2d d = b - a;
    const Eigen::Vector2d lo = origin;
    const Eigen::Vector2d hi = max();
    double t0 = 0.0;
    double t1 = 1.0;
    for (int axis = 0; axis < 2; ++axis) {
        if (std::abs(d(axis)) < 1e-15) {
            if (a(axis) < lo(axis) || a(axis) > hi(axis))
                return false;
            continue;
        }
        double ta = (lo(axis) - a(axis)) / d(axis);
        double tb = (hi(axis) - a(axis)) / d(axis);
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1)
            return false;
    }
    return true;
}

void SceneConfig::validate() const
{
    if (!(area.width > 0.0) || !(area.height > 0.0))
        throw std::invalid_argument("SceneConfig: area must have positive width and height");
    if (n_scatterers < 1 || n_cl < 1 || n_ray < 1)
        throw std::invalid_argument("SceneConfig: scatterer, cluster and ray counts must be positive");
    if (n_cl > n_scatterers)
        throw std::invalid_argument("SceneConfig: n_cl exceeds n_scatterers");
    if (!(angle_spread >= 0.0))
        throw std::invalid_argument("SceneConfig: angle_spread must be nonnegative");
    if (!(scatterer_height_max >= scatterer_height_min))
        throw std::invalid_argument("SceneConfig: scatterer height range is empty");
    for (const auto& b : blockers)
        if (!(b.width > 0.0) || !(b.height > 0.0))
            throw std::invalid_argument("SceneConfig: blocker rectangles must have positive area");
}

SceneConfig SceneConfig::urban_default()
{
    SceneConfig c;
    c.blockers = {
        Rect{Eigen::Vector2d(15.0, 25.0), 20.0, 15.0},
        Rect{Eigen::Vector2d(70.0, 15.0), 15.0, 15.0},
        Rect{Eigen::Vector2d(40.0, 50.0), 25.0, 12.0},
        Rect{Eigen::Vector2d(95.0, 45.0), 15.0, 20.0},
    };
    return c;
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

template <typename T>
void hash_value(std::uint64_t& h, const T& v)
{
    hash_bytes(h, &v, sizeof(T));
}

double wrap_angle(double a)
{
    return std::remainder(a, 2.0 * EIGEN_PI);
}

}  // namespace

std::uint64_t Scene::fingerprint() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    const auto& c = config;
    for (double v : {c.area.origin.x(), c.area.origin.y(), c.area.width, c.area.height, c.bs_location.x(),
                     c.bs_location.y(), c.bs_height, c.mu_height, c.bs_azimuth, c.angle_spread,
                     c.scatterer_height_min, c.scatterer_height_max, c.scatterer_gain_std_db, c.los_gain_db,
                     c.nlos_gain_db})
        hash_value(h, v);
    for (int v : {c.n_scatterers, c.n_cl, c.n_ray})
        hash_value(h, v);
    hash_value(h, c.seed);
    for (const auto& b : c.blockers)
        for (double v : {b.origin.x(), b.origin.y(), b.width, b.height})
            hash_value(h, v);
    hash_bytes(h, scatterer_positions.data(), sizeof(double) * static_cast<std::size_t>(scatterer_positions.size()));
    hash_bytes(h, scatterer_heights.data(), sizeof(double) * static_cast<std::size_t>(scatterer_heights.size()));
    hash_bytes(h, scatterer_gains_db.data(), sizeof(double) * static_cast<std::size_t>(scatterer_gains_db.size()));
    hash_bytes(h, ray_offsets.data(), sizeof(double) * static_cast<std::size_t>(ray_offsets.size()));
    return h;
}

Scene build_scene(const SceneConfig& config)
{
    config.validate();
    Scene scene;
    scene.config = config;
    Rng rng = derive_stream(config.seed, 0, 0x5ce4e);
    const int k = config.n_scatterers;
    scene.scatterer_positions.resize(2, k);
    scene.scatterer_heights.resize(k);
    scene.scatterer_gains_db.resize(k);
    scene.ray_offsets.resize(k, 2 * config.n_ray);
    const auto& a = config.area;
    for (int i = 0; i < k; ++i) {
        scene.scatterer_positions(0, i) = uniform(rng, a.origin.x(), a.origin.x() + a.width);
        scene.scatterer_positions(1, i) = uniform(rng, a.origin.y(), a.origin.y() + a.height);
        scene.scatterer_heights(i) = uniform(rng, config.scatterer_height_min, config.scatterer_height_max);
        scene.scatterer_gains_db(i) = config.scatterer_gain_std_db * standard_normal(rng);
        for (int r = 0; r < 2 * config.n_ray; ++r)
            scene.ray_offsets(i, r) = uniform(rng, -config.angle_spread, config.angle_spread);
    }
    return scene;
}

std::pair<double, double> departure_angles(const SceneConfig& config, const Eigen::Vector2d& point, double height)
{
    const Eigen::Vector2d d = point - config.bs_location;
    const double horizontal = d.norm();
    const double dz = height - config.bs_height;
    const double theta = std::atan2(horizontal, dz);
    const double phi = wrap_angle(std::atan2(d.y(), d.x()) - config.bs_azimuth);
    return {phi, theta};
}

namespace {

double distance3(const Eigen::Vector2d& a, double ha, const Eigen::Vector2d& b, double hb)
{
    const double dz = ha - hb;
    return std::sqrt((a - b).squaredNorm() + dz * dz);
}

void require_inside(const Scene& scene, const Eigen::Vector2d& mu_location)
{
    if (!scene.config.area.contains(mu_location))
        throw std::out_of_range("sample_channel: location outside the scene area");
}

}  // namespace

bool los_blocked(const Scene& scene, const Eigen::Vector2d& mu_location)
{
    for (const auto& b : scene.config.blockers)
        if (b.intersects_segment(scene.config.bs_location, mu_location))
            return true;
    return false;
}

std::vector<ClusterCenter> cluster_centers(const Scene& scene, const Eigen::Vector2d& mu_location)
{
    const auto& c = scene.config;
    const int k = c.n_scatterers;
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    Eigen::VectorXd dist2 = (scene.scatterer_positions.colwise() - mu_location).colwise().squaredNorm().transpose();
    std::partial_sort(order.begin(), order.begin() + c.n_cl, order.end(), [&](int a, int b) {
        return dist2(a) < dist2(b) || (dist2(a) == dist2(b) && a < b);
    });

    std::vector<ClusterCenter> out;
    out.reserve(static_cast<std::size_t>(c.n_cl));
    for (int m = 0; m < c.n_cl; ++m) {
        const int s = order[static_cast<std::size_t>(m)];
        const Eigen::Vector2d pos = scene.scatterer_positions.col(s);
        const double h = scene.scatterer_heights(s);
        const auto [phi, theta] = departure_angles(c, pos, h);
        const double path = distance3(c.bs_location, c.bs_height, pos, h) + distance3(pos, h, mu_location, c.mu_height);
        const double power_db = c.nlos_gain_db + scene.scatterer_gains_db(s) - 20.0 * std::log10(path);
        out.push_back({s, phi, theta, power_db});
    }
    return out;
}

std::vector<PathComponent> channel_paths(const Scene& scene, const Eigen::Vector2d& mu_location, Rng& rng)
{
    require_inside(scene, mu_location);
    const auto& c = scene.config;
    std::vector<PathComponent> paths;
    paths.reserve(static_cast<std::size_t>(1 + c.n_cl * c.n_ray));

    if (!los_blocked(scene, mu_location)) {
        const auto [phi, theta] = departure_angles(c, mu_location, c.mu_height);
        const double d = distance3(c.bs_location, c.bs_height, mu_location, c.mu_height);
        const double amp = std::sqrt(from_dbm(c.los_gain_db - 20.0 * std::log10(d)));
        paths.push_back({std::polar(amp, uniform(rng, 0.0, 2.0 * EIGEN_PI)), phi, theta, -1});
    }

    int cluster = 0;
    for (const auto& cc : cluster_centers(scene, mu_location)) {
        const double amp = std::sqrt(from_dbm(cc.power_db) / c.n_ray);
        for (int r = 0; r < c.n_ray; ++r) {
            const double phi = cc.phi + scene.ray_offsets(cc.scatterer, 2 * r);
            const double theta = cc.theta + scene.ray_offsets(cc.scatterer, 2 * r + 1);
            paths.push_back({std::polar(amp, uniform(rng, 0.0, 2.0 * EIGEN_PI)), phi, theta, cluster});
        }
        ++cluster;
    }
    return paths;
}

ComplexVector sample_channel(const Scene& scene, const ArrayGeometry& geom, const Eigen::Vector2d& mu_location,
                             Rng& rng)
{
    ComplexVector h = ComplexVector::Zero(geom.n());
    for (const auto& p : channel_paths(scene, mu_location, rng))
        h += p.gain * steering_vector(p.phi, p.theta, geom);
    return h;
}

Eigen::VectorXd mean_rsrp(const Scene& scene, const ArrayGeometry& geom, const ComplexMatrix& codebook,
                          const Eigen::Vector2d& mu_location)
{
    Rng rng(0);  // phases drop out of |alpha|^2
    Eigen::VectorXd power = Eigen::VectorXd::Zero(geom.n());
    for (const auto& p : channel_paths(scene, mu_location, rng))
        power += std::norm(p.gain) * (codebook * steering_vector(p.phi, p.theta, geom)).cwiseAbs2();
    return power;
}

double dominant_beam_instability(const Scene& scene, const ArrayGeometry& geom, int pairs, double step,
                                 std::uint64_t seed)
{
    const auto a = dft_codebook(geom);
    const auto& area = scene.config.area;
    Rng rng = derive_stream(seed, 0, 0xc0417);
    int counted = 0;
    int changed = 0;
    for (int attempt = 0; counted < pairs && attempt < 100 * pairs; ++attempt) {
        const Eigen::Vector2d p(uniform(rng, area.origin.x(), area.max().x()),
                                uniform(rng, area.origin.y(), area.max().y()));
        const double dir = uniform(rng, 0.0, 2.0 * EIGEN_PI);
        const Eigen::Vector2d q = p + step * Eigen::Vector2d(std::cos(dir), std::sin(dir));
        if (!area.contains(q) || los_blocked(scene, p) != los_blocked(scene, q))
            continue;
        Eigen::Index ip = 0;
        Eigen::Index iq = 0;
        mean_rsrp(scene, geom, a, p).maxCoeff(&ip);
        mean_rsrp(scene, geom, a, q).maxCoeff(&iq);
        ++counted;
        changed += ip != iq;
    }
    return counted ? static_cast<double>(changed) / counted : 0.0;
}

}  // namespace beamprobe
