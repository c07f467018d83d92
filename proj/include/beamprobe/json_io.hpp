// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_JSON_IO_HPP
#define BEAMPROBE_JSON_IO_HPP

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>

#include "beamprobe/beamspace.hpp"
#include "beamprobe/channel_scene.hpp"
#include "beamprobe/gaussian.hpp"

namespace beamprobe {

using json = nlohmann::json;

void to_json(json& j, const ArrayGeometry& g);
void from_json(const json& j, ArrayGeometry& g);
void to_json(json& j, const MeasurementNoise& n);
void from_json(const json& j, MeasurementNoise& n);
void to_json(json& j, const Rect& r);
void from_json(const json& j, Rect& r);
void to_json(json& j, const SceneConfig& c);
void from_json(const json& j, SceneConfig& c);
void to_json(json& j, const MaskParams& m);
void from_json(const json& j, MaskParams& m);

json vec2_to_json(const Eigen::Vector2d& v);
Eigen::Vector2d vec2_from_json(const json& j);

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(const std::string& s);

// Throws DataError when the file is missing or not valid JSON.
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace beamprobe

#endif  // BEAMPROBE_JSON_IO_HPP
