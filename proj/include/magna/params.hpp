#pragma once

#include "magna/common.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <string>

namespace magna {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// All trainable tensors of a model, keyed by name. Iteration order is the
// lexicographic name order, which keeps optimizer updates and checkpoints
// reproducible.
class ParamStore {
 public:
  Param& add(const std::string& name, Matrix value);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Param> params_;
};

// Uniform Glorot: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)), fans = (rows, cols).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

// Checkpoint JSON:
//   {"format": "magna-checkpoint", "version": 1, "meta": {...},
//    "params": {name: {"shape": [rows, cols], "values": [row-major doubles]}}}
// Doubles are written with round-trip precision, so load(save(x)) == x bitwise.
void save_checkpoint(const std::filesystem::path& file, const ParamStore& params,
                     const nlohmann::json& meta);
ParamStore load_checkpoint(const std::filesystem::path& file, nlohmann::json* meta = nullptr);

}  // namespace magna
