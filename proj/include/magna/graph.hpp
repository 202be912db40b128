#pragma once

#include "magna/common.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace magna {

struct Edge {
  NodeId src = 0;
  RelationId rel = 0;
  NodeId dst = 0;

  auto operator<=>(const Edge&) const = default;
};

// Half-open range of edge indices [begin, end).
struct EdgeRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
};

// Edge list grouped by destination node. Edges with the same dst form one
// contiguous segment and keep their insertion order inside it, so aggregating
// into node i scans exactly incoming(i).
class Graph {
 public:
  Graph() = default;

  // Validates ids and rejects duplicate (src, rel, dst) triples.
  static Graph build(NodeId num_nodes, RelationId num_relations, std::vector<Edge> edges,
                     bool directed);

  NodeId num_nodes() const { return num_nodes_; }
  RelationId num_relations() const { return num_relations_; }
  bool directed() const { return directed_; }
  std::size_t num_edges() const { return edges_.size(); }

  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  std::span<const std::size_t> offsets() const { return offsets_; }
  EdgeRange incoming(NodeId node) const {
    return {offsets_[static_cast<std::size_t>(node)], offsets_[static_cast<std::size_t>(node) + 1]};
  }

  // Column views over the edge list, aligned with edges().
  std::span<const NodeId> sources() const { return src_; }
  std::span<const NodeId> destinations() const { return dst_; }
  std::span<const RelationId> relations() const { return rel_; }

 private:
  NodeId num_nodes_ = 0;
  RelationId num_relations_ = 0;
  bool directed_ = true;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> src_;
  std::vector<NodeId> dst_;
  std::vector<RelationId> rel_;
};

EdgeRange incoming_segment(const Graph& graph, NodeId node);

// Every node without an incoming edge receives a self-loop with relation 0,
// so each attention row has at least one entry.
Graph with_isolated_self_loops(const Graph& graph);

enum class Split : std::uint8_t { none, train, val, test };

struct NodeDataset {
  Graph graph;
  Matrix features;                 // num_nodes x feature_dim
  std::vector<std::int32_t> labels;  // -1 for unlabeled nodes
  std::vector<Split> splits;
  std::int32_t num_classes = 0;

  std::vector<NodeId> nodes_in(Split split) const;
};

// Node dataset directory: features.tsv, edges.tsv, labels.tsv, splits.tsv.
NodeDataset load_node_dataset(const std::filesystem::path& dir);
void write_node_dataset(const NodeDataset& dataset, const std::filesystem::path& dir);

struct Triple {
  NodeId head = 0;
  RelationId rel = 0;
  NodeId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct KgDataset {
  Graph graph;  // train triples plus reverse triples
  NodeId entity_count = 0;
  RelationId original_relation_count = 0;
  RelationId relation_count = 0;  // 2 * original_relation_count
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  // (head, rel) -> true tails over all splits, forward and reverse direction.
  std::map<std::pair<NodeId, RelationId>, std::set<NodeId>> filter_index;
  // (head, rel) -> true tails from train triples and their reverses (1-N targets).
  std::map<std::pair<NodeId, RelationId>, std::vector<NodeId>> train_targets;

  RelationId reverse_of(RelationId rel) const {
    return rel < original_relation_count ? rel + original_relation_count
                                         : rel - original_relation_count;
  }
};

struct KgLoadOptions {
  // Reject valid/test triples whose entity or relation never occurs in train.
  bool strict = false;
};

// KG directory: train.txt, valid.txt, test.txt with head<TAB>relation<TAB>tail.
KgDataset load_kg_dataset(const std::filesystem::path& dir, const KgLoadOptions& options = {});

// Builds the augmented graph, filter index and 1-N targets from dense triples.
KgDataset make_kg_dataset(NodeId entity_count, RelationId relation_count, std::vector<Triple> train,
                          std::vector<Triple> valid, std::vector<Triple> test);

void write_kg_dataset(const KgDataset& dataset, const std::filesystem::path& dir);

// Undirected edge list `src<TAB>dst` used by the spectrum analysis.
Graph load_edge_list(const std::filesystem::path& file);

}  // namespace magna
