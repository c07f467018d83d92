// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_CHANNEL_SCENE_HPP
#define BEAMPROBE_CHANNEL_SCENE_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

#include "beamprobe/beamspace.hpp"
#include "beamprobe/random.hpp"

namespace beamprobe {

// Axis-aligned rectangle [origin, origin + (width, height)].
struct Rect
{
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    double width = 0.0;
    double height = 0.0;

    Eigen::Vector2d max() const { return origin + Eigen::Vector2d(width, height); }
    bool contains(const Eigen::Vector2d& p) const
    {
        return p.x() >= origin.x() && p.x() <= origin.x() + width && p.y() >= origin.y() &&
               p.y() <= origin.y() + height;
    }
    // true when the closed segment a-b touches the rectangle
    bool intersects_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const;
};

struct SceneConfig
{
    Rect area{Eigen::Vector2d(0.0, 0.0), 120.0, 80.0};
    Eigen::Vector2d bs_location{60.0, -2.0};
    double bs_height = 20.0;
    double mu_height = 1.5;
    double bs_azimuth = EIGEN_PI / 2.0;  // array broadside direction, radians from +x

    int n_scatterers = 40;
    int n_cl = 4;
    int n_ray = 5;
    double angle_spread = 0.035;  // rad, intra-cluster ray spread
    double scatterer_height_min = 3.0;
    double scatterer_height_max = 25.0;
    double scatterer_gain_std_db = 4.0;

    std::vector<Rect> blockers;

    double los_gain_db = -20.0;   // received power at 1 m on the LoS path, dBm
    double nlos_gain_db = -30.0;  // same for a scattered path, before per-scatterer offset

    std::uint64_t seed = 1;

    void validate() const;

    // Default layout used by the tools and tests: three building blocks.
    static SceneConfig urban_default();
};

// Scatterers are drawn once from the config seed; every location-dependent
// quantity is a deterministic function of (scene, location).
struct Scene
{
    SceneConfig config;
    Eigen::Matrix2Xd scatterer_positions;
    Eigen::VectorXd scatterer_heights;
    Eigen::VectorXd scatterer_gains_db;
    // per scatterer: n_ray (dphi, dtheta) offsets, columns [2r, 2r+1]
    Eigen::MatrixXd ray_offsets;

    std::uint64_t fingerprint() const;
};

Scene build_scene(const SceneConfig& config);

struct PathComponent
{
    std::complex<double> gain;
    double phi;
    double theta;
    int cluster;  // -1 for LoS
};

struct ClusterCenter
{
    int scatterer;
    double phi;
    double theta;
    double power_db;
};

// Departure angles (azimuth from broadside, zenith) from the BS to a point.
std::pair<double, double> departure_angles(const SceneConfig& config, const Eigen::Vector2d& point, double height);

bool los_blocked(const Scene& scene, const Eigen::Vector2d& mu_location);

// The n_cl nearest scatterers (ties by index) and their cluster powers.
std::vector<ClusterCenter> cluster_centers(const Scene& scene, const Eigen::Vector2d& mu_location);

// Individual weighted rays of the channel at mu_location; rng drives the
// per-draw ray phases only.
std::vector<PathComponent> channel_paths(const Scene& scene, const Eigen::Vector2d& mu_location, Rng& rng);

// h = h_LoS + h_NLoS in the antenna domain.
ComplexVector sample_channel(const Scene& scene, const ArrayGeometry& geom, const Eigen::Vector2d& mu_location,
                             Rng& rng);

// Noiseless expected RSRP (mW) per beam: sum over rays of |alpha|^2 |A psi|^2.
// Cross terms vanish in expectation over the independent ray phases.
Eigen::VectorXd mean_rsrp(const Scene& scene, const ArrayGeometry& geom, const ComplexMatrix& codebook,
                          const Eigen::Vector2d& mu_location);

// Fraction of random location pairs `step` metres apart (no blocker boundary
// between them) whose noiseless dominant beam differs.
double dominant_beam_instability(const Scene& scene, const ArrayGeometry& geom, int pairs, double step,
                                 std::uint64_t seed);

}  // namespace beamprobe

#endif  // BEAMPROBE_CHANNEL_SCENE_HPP
