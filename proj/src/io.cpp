#include "airest/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace airest {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void save_sensor_csv(const SensorRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "time";
  for (std::size_t i = 0; i < rec.sensor_ids.size(); ++i) out << ",sensor_" << (i + 1);
  out << "\n";
  out << std::setprecision(17);
  for (int k = 0; k < rec.times.size(); ++k) {
    out << rec.times[k];
    for (int i = 0; i < rec.y.rows(); ++i) out << "," << rec.y(i, k);
    out << "\n";
  }
  // sidecar carries the manifest hash and sensor identities
  std::ofstream side(path + ".manifest");
  side << "{\n  \"manifest\": \"" << std::hex << rec.manifest << std::dec
       << "\",\n  \"sensor_ids\": [";
  for (std::size_t i = 0; i < rec.sensor_ids.size(); ++i)
    side << (i ? ", " : "") << rec.sensor_ids[i];
  side << "]\n}\n";
}

SensorRecord load_sensor_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sensor file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty sensor file: " + path);
  int n_cols = 1;
  for (char c : line) n_cols += (c == ',');
  const int ns = n_cols - 1;
  if (ns < 1) throw ValidationError("sensor file has no sensor columns: " + path);
  std::vector<std::vector<Real>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<Real> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != n_cols)
      throw ValidationError("ragged sensor csv row in " + path);
    rows.push_back(std::move(row));
  }
  SensorRecord rec;
  const int levels = static_cast<int>(rows.size());
  rec.times.resize(levels);
  rec.y.resize(ns, levels);
  for (int k = 0; k < levels; ++k) {
    rec.times[k] = rows[k][0];
    for (int i = 0; i < ns; ++i) rec.y(i, k) = rows[k][i + 1];
  }
  rec.pi0_hat = rec.y.col(0);
  rec.sensor_ids.resize(ns);
  for (int i = 0; i < ns; ++i) rec.sensor_ids[i] = i;

  std::ifstream side(path + ".manifest");
  if (side) {
    std::stringstream ss;
    ss << side.rdbuf();
    const std::string text = ss.str();
    auto pos = text.find("\"manifest\"");
    if (pos != std::string::npos) {
      pos = text.find('"', text.find(':', pos));
      const auto end = text.find('"', pos + 1);
      rec.manifest = std::stoull(text.substr(pos + 1, end - pos - 1), nullptr, 16);
    }
    pos = text.find("\"sensor_ids\"");
    if (pos != std::string::npos) {
      const auto lb = text.find('[', pos);
      const auto rb = text.find(']', lb);
      std::stringstream ids(text.substr(lb + 1, rb - lb - 1));
      std::string tok;
      std::vector<int> parsed;
      while (std::getline(ids, tok, ',')) {
        if (tok.find_first_not_of(" \t\n") == std::string::npos) continue;
        parsed.push_back(std::stoi(tok));
      }
      if (static_cast<int>(parsed.size()) == ns) rec.sensor_ids = parsed;
    }
  }
  return rec;
}

void write_vtk_fields(const Model& model, const std::string& path, const VecX* temperature,
                      const VecX* velocity, const VecX* pressure) {
  std::vector<std::pair<std::string, VecX>> point_data;
  if (temperature) point_data.emplace_back("temperature", *temperature);
  if (pressure) point_data.emplace_back("pressure", *pressure);
  if (velocity) {
    VecX at_vertices(2 * model.mesh.n_vertices());
    for (int v = 0; v < model.mesh.n_vertices(); ++v) {
      at_vertices[2 * v] = (*velocity)[2 * v];
      at_vertices[2 * v + 1] = (*velocity)[2 * v + 1];
    }
    point_data.emplace_back("velocity", at_vertices);
  }
  write_vtk_mesh(model.mesh, path, {}, point_data);
}

void ensure_directory(const std::string& path) {
  std::filesystem::create_directories(path);
}

}  // namespace airest
