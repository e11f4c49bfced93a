#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airest/model.hpp"

namespace airest {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// FNV-1a over a byte string (stable across platforms).
std::uint64_t fnv1a(const std::string& bytes);

/// Sensor series as CSV: header "time,sensor_1,..."; one row per time level.
void save_sensor_csv(const SensorRecord& rec, const std::string& path);
SensorRecord load_sensor_csv(const std::string& path);

/// VTK dump of P1 scalar and P2 velocity fields sampled at mesh vertices.
void write_vtk_fields(const Model& model, const std::string& path, const VecX* temperature,
                      const VecX* velocity, const VecX* pressure);

void ensure_directory(const std::string& path);

}  // namespace airest
