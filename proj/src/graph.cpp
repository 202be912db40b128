#include "magna/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace magna {

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Graph Graph::build(NodeId num_nodes, RelationId num_relations, std::vector<Edge> edges,
                   bool directed) {
  if (num_nodes < 0 || num_relations < 1) {
    throw DataError("graph needs num_nodes >= 0 and num_relations >= 1");
  }
  for (const Edge& e : edges) {
    if (e.src < 0 || e.src >= num_nodes || e.dst < 0 || e.dst >= num_nodes) {
      throw DataError("node id out of range in edge (" + std::to_string(e.src) + ", " +
                      std::to_string(e.rel) + ", " + std::to_string(e.dst) + ")");
    }
    if (e.rel < 0 || e.rel >= num_relations) {
      throw DataError("relation id out of range in edge (" + std::to_string(e.src) + ", " +
                      std::to_string(e.rel) + ", " + std::to_string(e.dst) + ")");
    }
  }
  {
    std::vector<Edge> sorted = edges;
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
      throw DataError("duplicate edge (" + std::to_string(dup->src) + ", " +
                      std::to_string(dup->rel) + ", " + std::to_string(dup->dst) + ")");
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.dst < b.dst; });

  Graph g;
  g.num_nodes_ = num_nodes;
  g.num_relations_ = num_relations;
  g.directed_ = directed;
  g.edges_ = std::move(edges);
  g.offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (const Edge& e : g.edges_) ++g.offsets_[static_cast<std::size_t>(e.dst) + 1];
  for (std::size_t i = 1; i < g.offsets_.size(); ++i) g.offsets_[i] += g.offsets_[i - 1];
  g.src_.reserve(g.edges_.size());
  g.dst_.reserve(g.edges_.size());
  g.rel_.reserve(g.edges_.size());
  for (const Edge& e : g.edges_) {
    g.src_.push_back(e.src);
    g.dst_.push_back(e.dst);
    g.rel_.push_back(e.rel);
  }
  return g;
}

EdgeRange incoming_segment(const Graph& graph, NodeId node) { return graph.incoming(node); }

Graph with_isolated_self_loops(const Graph& graph) {
  std::vector<Edge> edges(graph.edges().begin(), graph.edges().end());
  bool changed = false;
  for (NodeId v = 0; v < graph.num_nodes(); ++v) {
    if (graph.incoming(v).empty()) {
      edges.push_back({v, 0, v});
      changed = true;
    }
  }
  if (!changed) return graph;
  return Graph::build(graph.num_nodes(), graph.num_relations(), std::move(edges),
                      graph.directed());
}

std::vector<NodeId> NodeDataset::nodes_in(Split split) const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

namespace {

// Reads a file line by line and hands (line_number, tab-separated fields) to the callback.
class TsvReader {
 public:
  explicit TsvReader(std::filesystem::path path) : path_(std::move(path)) {
    in_.open(path_);
    if (!in_) throw DataError("missing file: " + path_.string());
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> fields;
    while (std::getline(in_, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields.clear();
      std::string_view rest = line;
      for (;;) {
        auto tab = rest.find('\t');
        fields.push_back(rest.substr(0, tab));
        if (tab == std::string_view::npos) break;
        rest.remove_prefix(tab + 1);
      }
      fn(line_no, fields);
    }
  }

  [[noreturn]] void fail(std::size_t line_no, const std::string& what) const {
    throw DataError(path_.string() + ":" + std::to_string(line_no) + ": " + what);
  }

  std::int64_t parse_int(std::size_t line_no, std::string_view text) const {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail(line_no, "expected an integer, got '" + std::string(text) + "'");
    }
    return v;
  }

  double parse_real(std::size_t line_no, std::string_view text) const {
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail(line_no, "expected a real number, got '" + std::string(text) + "'");
    }
    return v;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  return out;
}

Split parse_split(std::string_view token) {
  if (token == "train") return Split::train;
  if (token == "val") return Split::val;
  if (token == "test") return Split::test;
  return Split::none;
}

const char* split_token(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::none: break;
  }
  return "";
}

}  // namespace

NodeDataset load_node_dataset(const std::filesystem::path& dir) {
  NodeDataset ds;

  // features.tsv defines the node count: ids 0..N-1, each exactly once.
  struct FeatureRow {
    std::size_t line;
    std::int64_t id;
    std::vector<double> values;
  };
  std::vector<FeatureRow> rows;
  {
    TsvReader reader(dir / "features.tsv");
    std::size_t width = 0;
    reader.for_each([&](std::size_t ln, const std::vector<std::string_view>& f) {
      if (f.size() != 2) reader.fail(ln, "expected node_id<TAB>values");
      std::vector<double> values;
      std::string_view rest = f[1];
      for (;;) {
        auto comma = rest.find(',');
        values.push_back(reader.parse_real(ln, rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (rows.empty()) {
        width = values.size();
      } else if (values.size() != width) {
        reader.fail(ln, "ragged feature row: expected " + std::to_string(width) + " values, got " +
                            std::to_string(values.size()));
      }
      rows.push_back({ln, reader.parse_int(ln, f[0]), std::move(values)});
    });
    if (rows.empty()) throw DataError((dir / "features.tsv").string() + ": no feature rows");
    const auto n = static_cast<std::int64_t>(rows.size());
    ds.features = Matrix::Zero(n, static_cast<Eigen::Index>(width));
    std::vector<bool> seen(rows.size(), false);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto id = rows[r].id;
      if (id < 0 || id >= n) {
        reader.fail(rows[r].line, "node id out of range: " + std::to_string(id));
      }
      if (seen[static_cast<std::size_t>(id)]) {
        reader.fail(rows[r].line, "duplicate feature row for node " + std::to_string(id));
      }
      seen[static_cast<std::size_t>(id)] = true;
      for (std::size_t c = 0; c < width; ++c) {
        ds.features(id, static_cast<Eigen::Index>(c)) = rows[r].values[c];
      }
    }
  }
  const auto num_nodes = static_cast<NodeId>(ds.features.rows());

  auto check_node = [&](const TsvReader& reader, std::size_t ln, std::int64_t id) {
    if (id < 0 || id >= num_nodes) {
      reader.fail(ln, "node id out of range: " + std::to_string(id) + " (num_nodes=" +
                          std::to_string(num_nodes) + ")");
    }
    return static_cast<NodeId>(id);
  };

  {
    TsvReader reader(dir / "edges.tsv");
    std::vector<Edge> edges;
    std::set<Edge> rows_seen;
    RelationId max_rel = 0;
    std::size_t columns = 0;
    reader.for_each([&](std::size_t ln, const std::vector<std::string_view>& f) {
      if (f.size() != 2 && f.size() != 3) reader.fail(ln, "expected src<TAB>dst[<TAB>relation]");
      if (columns == 0) columns = f.size();
      if (f.size() != columns) reader.fail(ln, "inconsistent column count in edge list");
      const NodeId a = check_node(reader, ln, reader.parse_int(ln, f[0]));
      const NodeId b = check_node(reader, ln, reader.parse_int(ln, f[1]));
      RelationId rel = 0;
      if (f.size() == 3) {
        const auto r = reader.parse_int(ln, f[2]);
        if (r < 0) reader.fail(ln, "negative relation id");
        rel = static_cast<RelationId>(r);
      }
      max_rel = std::max(max_rel, rel);
      const Edge canonical{std::min(a, b), rel, std::max(a, b)};
      if (!rows_seen.insert(Edge{a, rel, b}).second) {
        reader.fail(ln, "duplicate edge " + std::to_string(a) + " -> " + std::to_string(b));
      }
      // A row listing the reverse of an earlier row names the same undirected edge.
      if (a != b && rows_seen.count(Edge{b, rel, a})) return;
      edges.push_back({canonical.src, rel, canonical.dst});
      if (a != b) edges.push_back({canonical.dst, rel, canonical.src});
    });
    ds.graph = Graph::build(num_nodes, max_rel + 1, std::move(edges), /*directed=*/false);
  }

  ds.labels.assign(static_cast<std::size_t>(num_nodes), -1);
  {
    TsvReader reader(dir / "labels.tsv");
    std::int32_t max_class = -1;
    reader.for_each([&](std::size_t ln, const std::vector<std::string_view>& f) {
      if (f.size() != 2) reader.fail(ln, "expected node_id<TAB>class_id");
      const NodeId v = check_node(reader, ln, reader.parse_int(ln, f[0]));
      const auto c = reader.parse_int(ln, f[1]);
      if (c < 0) reader.fail(ln, "negative class id");
      if (ds.labels[static_cast<std::size_t>(v)] != -1) {
        reader.fail(ln, "duplicate label for node " + std::to_string(v));
      }
      ds.labels[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(c);
      max_class = std::max(max_class, static_cast<std::int32_t>(c));
    });
    ds.num_classes = max_class + 1;
  }

  ds.splits.assign(static_cast<std::size_t>(num_nodes), Split::none);
  {
    TsvReader reader(dir / "splits.tsv");
    reader.for_each([&](std::size_t ln, const std::vector<std::string_view>& f) {
      if (f.size() != 2) reader.fail(ln, "expected node_id<TAB>train|val|test");
      const NodeId v = check_node(reader, ln, reader.parse_int(ln, f[0]));
      const Split s = parse_split(f[1]);
      if (s == Split::none) reader.fail(ln, "unknown split token '" + std::string(f[1]) + "'");
      if (ds.splits[static_cast<std::size_t>(v)] != Split::none) {
        reader.fail(ln, "node " + std::to_string(v) + " assigned to more than one split");
      }
      if (ds.labels[static_cast<std::size_t>(v)] < 0) {
        reader.fail(ln, "split node " + std::to_string(v) + " has no label");
      }
      ds.splits[static_cast<std::size_t>(v)] = s;
    });
  }
  return ds;
}

void write_node_dataset(const NodeDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_for_write(dir / "features.tsv");
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
      out << i << '\t';
      for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        if (j) out << ',';
        out << ds.features(i, j);
      }
      out << '\n';
    }
  }
  {
    auto out = open_for_write(dir / "edges.tsv");
    const bool with_rel = ds.graph.num_relations() > 1;
    for (const Edge& e : ds.graph.edges()) {
      if (!ds.graph.directed() && e.src > e.dst) continue;
      out << e.src << '\t' << e.dst;
      if (with_rel) out << '\t' << e.rel;
      out << '\n';
    }
  }
  {
    auto out = open_for_write(dir / "labels.tsv");
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      if (ds.labels[i] >= 0) out << i << '\t' << ds.labels[i] << '\n';
    }
  }
  {
    auto out = open_for_write(dir / "splits.tsv");
    for (std::size_t i = 0; i < ds.splits.size(); ++i) {
      if (ds.splits[i] != Split::none) out << i << '\t' << split_token(ds.splits[i]) << '\n';
    }
  }
}

KgDataset make_kg_dataset(NodeId entity_count, RelationId relation_count, std::vector<Triple> train,
                          std::vector<Triple> valid, std::vector<Triple> test) {
  KgDataset kg;
  kg.entity_count = entity_count;
  kg.original_relation_count = relation_count;
  kg.relation_count = 2 * relation_count;
  kg.train = std::move(train);
  kg.valid = std::move(valid);
  kg.test = std::move(test);

  auto check = [&](const Triple& t) {
    if (t.head < 0 || t.head >= entity_count || t.tail < 0 || t.tail >= entity_count) {
      throw DataError("entity id out of range in triple");
    }
    if (t.rel < 0 || t.rel >= relation_count) throw DataError("relation id out of range in triple");
  };

  std::vector<Edge> edges;
  edges.reserve(kg.train.size() * 2);
  for (const Triple& t : kg.train) {
    check(t);
    edges.push_back({t.head, t.rel, t.tail});
    edges.push_back({t.tail, t.rel + relation_count, t.head});
  }
  kg.graph = Graph::build(entity_count, std::max<RelationId>(1, kg.relation_count), std::move(edges),
                          /*directed=*/true);

  for (const auto* split : {&kg.train, &kg.valid, &kg.test}) {
    for (const Triple& t : *split) {
      check(t);
      kg.filter_index[{t.head, t.rel}].insert(t.tail);
      kg.filter_index[{t.tail, t.rel + relation_count}].insert(t.head);
    }
  }
  for (const Triple& t : kg.train) {
    kg.train_targets[{t.head, t.rel}].push_back(t.tail);
    kg.train_targets[{t.tail, t.rel + relation_count}].push_back(t.head);
  }
  for (auto& [key, tails] : kg.train_targets) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
  }
  return kg;
}

KgDataset load_kg_dataset(const std::filesystem::path& dir, const KgLoadOptions& options) {
  std::unordered_map<std::string, NodeId> entity_ids;
  std::unordered_map<std::string, RelationId> relation_ids;
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;

  auto read_split = [&](const char* name, bool is_train) {
    std::vector<Triple> triples;
    TsvReader reader(dir / name);
    reader.for_each([&](std::size_t ln, const std::vector<std::string_view>& f) {
      if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
        reader.fail(ln, "malformed triple, expected head<TAB>relation<TAB>tail");
      }
      auto intern_entity = [&](std::string_view s) -> NodeId {
        auto it = entity_ids.find(std::string(s));
        if (it != entity_ids.end()) return it->second;
        if (!is_train && options.strict) reader.fail(ln, "unseen entity '" + std::string(s) + "'");
        const auto id = static_cast<NodeId>(entity_names.size());
        entity_ids.emplace(std::string(s), id);
        entity_names.emplace_back(s);
        return id;
      };
      Triple t;
      t.head = intern_entity(f[0]);
      {
        auto it = relation_ids.find(std::string(f[1]));
        if (it != relation_ids.end()) {
          t.rel = it->second;
        } else {
          if (!is_train && options.strict) {
            reader.fail(ln, "unseen relation '" + std::string(f[1]) + "'");
          }
          t.rel = static_cast<RelationId>(relation_names.size());
          relation_ids.emplace(std::string(f[1]), t.rel);
          relation_names.emplace_back(f[1]);
        }
      }
      t.tail = intern_entity(f[2]);
      triples.push_back(t);
    });
    return triples;
  };

  auto train = read_split("train.txt", true);
  auto valid = read_split("valid.txt", false);
  auto test = read_split("test.txt", false);
  KgDataset kg;
  try {
    kg = make_kg_dataset(static_cast<NodeId>(entity_names.size()),
                         static_cast<RelationId>(relation_names.size()), std::move(train),
                         std::move(valid), std::move(test));
  } catch (const DataError& e) {
    throw DataError((dir / "train.txt").string() + ": " + e.what());
  }
  kg.entity_names = std::move(entity_names);
  kg.relation_names = std::move(relation_names);
  return kg;
}

void write_kg_dataset(const KgDataset& kg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto entity = [&](NodeId id) {
    return kg.entity_names.empty() ? "e" + std::to_string(id)
                                   : kg.entity_names[static_cast<std::size_t>(id)];
  };
  auto relation = [&](RelationId id) {
    return kg.relation_names.empty() ? "r" + std::to_string(id)
                                     : kg.relation_names[static_cast<std::size_t>(id)];
  };
  auto write = [&](const char* name, const std::vector<Triple>& triples) {
    auto out = open_for_write(dir / name);
    for (const Triple& t : triples) {
      out << entity(t.head) << '\t' << relation(t.rel) << '\t' << entity(t.tail) << '\n';
    }
  };
  write("train.txt", kg.train);
  write("valid.txt", kg.valid);
  write("test.txt", kg.test);
}

Graph load_edge_list(const std::filesystem::path& file) {
  TsvReader reader(file);
  std::vector<std::pair<NodeId, NodeId>> rows;
  std::set<std::pair<NodeId, NodeId>> seen;
  NodeId max_id = -1;
  reader.for_each([&](std::size_t ln, const std::vector<std::string_view>& f) {
    if (f.size() < 2) reader.fail(ln, "expected src<TAB>dst");
    const auto a = reader.parse_int(ln, f[0]);
    const auto b = reader.parse_int(ln, f[1]);
    if (a < 0 || b < 0) reader.fail(ln, "node id out of range");
    const auto u = static_cast<NodeId>(a);
    const auto v = static_cast<NodeId>(b);
    const std::pair<NodeId, NodeId> key{std::min(u, v), std::max(u, v)};
    if (!seen.insert(key).second) return;
    rows.push_back(key);
    max_id = std::max({max_id, key.first, key.second});
  });
  std::vector<Edge> edges;
  for (auto [a, b] : rows) {
    edges.push_back({a, 0, b});
    if (a != b) edges.push_back({b, 0, a});
  }
  return Graph::build(max_id + 1, 1, std::move(edges), /*directed=*/false);
}

}  // namespace magna
