#include "magna/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace magna {

NodeDataset planted_partition(const PlantedPartitionOptions& o) {
  if (o.nodes < 2 || o.classes < 1 || o.feature_dim < 1 || o.train_per_class < 1) {
    throw ConfigError("planted_partition: invalid sizes");
  }
  if (!(o.p_in >= 0 && o.p_in <= 1 && o.p_out >= 0 && o.p_out <= 1)) {
    throw ConfigError("planted_partition: probabilities must lie in [0, 1]");
  }
  if (o.train_per_class * o.classes >= o.nodes) {
    throw ConfigError("planted_partition: train split would cover every node");
  }
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  NodeDataset data;
  data.num_classes = o.classes;
  data.labels.resize(static_cast<std::size_t>(o.nodes));
  for (int v = 0; v < o.nodes; ++v) data.labels[static_cast<std::size_t>(v)] = v % o.classes;

  Matrix means(o.classes, o.feature_dim);
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    for (Eigen::Index k = 0; k < means.cols(); ++k) means(c, k) = o.feature_signal * gauss(rng);
  }
  data.features.resize(o.nodes, o.feature_dim);
  for (int v = 0; v < o.nodes; ++v) {
    for (int k = 0; k < o.feature_dim; ++k) {
      data.features(v, k) = means(data.labels[static_cast<std::size_t>(v)], k) + o.feature_noise * gauss(rng);
    }
  }

  std::vector<Edge> edges;
  for (NodeId u = 0; u < o.nodes; ++u) {
    for (NodeId v = u + 1; v < o.nodes; ++v) {
      const bool same = data.labels[static_cast<std::size_t>(u)] == data.labels[static_cast<std::size_t>(v)];
      if (coin(rng) < (same ? o.p_in : o.p_out)) {
        edges.push_back({u, 0, v});
        edges.push_back({v, 0, u});
      }
    }
  }
  data.graph = Graph::build(o.nodes, 1, std::move(edges), /*directed=*/false);

  data.splits.assign(static_cast<std::size_t>(o.nodes), Split::none);
  std::vector<NodeId> order(static_cast<std::size_t>(o.nodes));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> taken(static_cast<std::size_t>(o.classes), 0);
  std::vector<NodeId> rest;
  for (NodeId v : order) {
    int& t = taken[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(v)])];
    if (t < o.train_per_class) {
      data.splits[static_cast<std::size_t>(v)] = Split::train;
      ++t;
    } else {
      rest.push_back(v);
    }
  }
  const auto val_count = static_cast<std::size_t>(o.val_fraction * static_cast<double>(rest.size()));
  for (std::size_t i = 0; i < rest.size(); ++i) {
    data.splits[static_cast<std::size_t>(rest[i])] = i < val_count ? Split::val : Split::test;
  }
  return data;
}

KgDataset compositional_kg(const CompositionalKgOptions& o) {
  if (o.groups < 1 || o.held_out < 1 || 2 * o.held_out >= o.groups) {
    throw ConfigError("compositional_kg: need groups > 2 * held_out >= 2");
  }
  const NodeId n = 3 * o.groups;
  auto a = [](int i) { return static_cast<NodeId>(3 * i); };
  auto b = [](int i) { return static_cast<NodeId>(3 * i + 1); };
  auto c = [](int i) { return static_cast<NodeId>(3 * i + 2); };

  std::vector<int> order(static_cast<std::size_t>(o.groups));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(o.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  for (int i = 0; i < o.groups; ++i) {
    train.push_back({a(i), 0, b(i)});
    train.push_back({b(i), 1, c(i)});
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int i = order[k];
    const Triple shortcut{a(i), 2, c(i)};
    if (k < static_cast<std::size_t>(o.held_out)) {
      valid.push_back(shortcut);
    } else if (k < static_cast<std::size_t>(2 * o.held_out)) {
      test.push_back(shortcut);
    } else {
      train.push_back(shortcut);
    }
  }
  KgDataset kg = make_kg_dataset(n, 3, std::move(train), std::move(valid), std::move(test));
  for (int i = 0; i < o.groups; ++i) {
    for (const char* role : {"a", "b", "c"}) kg.entity_names.push_back(role + std::to_string(i));
  }
  kg.relation_names = {"r1", "r2", "r3"};
  return kg;
}

}  // namespace magna
