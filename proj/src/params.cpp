#include "magna/params.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace magna {

Param& ParamStore::add(const std::string& name, Matrix value) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw ConfigError("duplicate parameter name: " + name);
  it->second.name = name;
  it->second.value = std::move(value);
  it->second.zero_grad();
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void save_checkpoint(const std::filesystem::path& file, const ParamStore& params,
                     const nlohmann::json& meta) {
  nlohmann::json j;
  j["format"] = "magna-checkpoint";
  j["version"] = 1;
  j["meta"] = meta;
  auto& out = j["params"] = nlohmann::json::object();
  for (const auto& [name, p] : params) {
    std::vector<double> values(p.value.data(), p.value.data() + p.value.size());
    out[name] = {{"shape", {p.value.rows(), p.value.cols()}}, {"values", std::move(values)}};
  }
  std::ofstream f(file);
  if (!f) throw DataError("cannot write checkpoint " + file.string());
  f << j.dump() << '\n';
}

ParamStore load_checkpoint(const std::filesystem::path& file, nlohmann::json* meta) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot read checkpoint " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  if (j.value("format", "") != "magna-checkpoint" || j.value("version", 0) != 1) {
    throw DataError(file.string() + ": not a version-1 magna checkpoint");
  }
  ParamStore store;
  for (const auto& [name, entry] : j.at("params").items()) {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const auto values = entry.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw DataError(file.string() + ": value count does not match shape for " + name);
    }
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data());
    store.add(name, std::move(m));
  }
  if (meta) *meta = j.value("meta", nlohmann::json::object());
  return store;
}

}  // namespace magna
