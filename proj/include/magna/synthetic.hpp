#pragma once

#include "magna/graph.hpp"

#include <cstdint>

namespace magna {

// Stochastic block model with class-correlated Gaussian features.
struct PlantedPartitionOptions {
  int nodes = 200;
  int classes = 4;
  int feature_dim = 16;
  double p_in = 0.1;    // edge probability inside a class
  double p_out = 0.01;  // edge probability across classes
  double feature_signal = 1.0;  // scale of the per-class mean vector
  double feature_noise = 1.0;   // per-entry Gaussian noise
  int train_per_class = 5;
  double val_fraction = 0.25;  // of the nodes left after the train split
  std::uint64_t seed = 0;
};

NodeDataset planted_partition(const PlantedPartitionOptions& options);

// Chains a_i -r1-> b_i -r2-> c_i with the shortcut a_i -r3-> c_i. All r1 and
// r2 triples are in train; the r3 shortcuts of `held_out` groups go to valid
// and of another `held_out` groups to test, the rest to train.
struct CompositionalKgOptions {
  int groups = 12;
  int held_out = 3;
  std::uint64_t seed = 0;
};

KgDataset compositional_kg(const CompositionalKgOptions& options);

}  // namespace magna
