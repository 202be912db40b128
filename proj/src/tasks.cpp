#include "magna/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace magna {

namespace {

// Row-wise log-softmax with max subtraction.
Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace

Eigen::Index argmax_row(const Matrix& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = j;
  }
  return best;
}

double classification_accuracy(const Matrix& logits, std::span<const std::int32_t> labels,
                               std::span<const NodeId> mask) {
  if (mask.empty()) throw DataError("classification_accuracy: empty mask");
  std::size_t correct = 0;
  for (NodeId v : mask) {
    if (argmax_row(logits, v) == labels[static_cast<std::size_t>(v)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

ClassificationLoss cross_entropy_loss(ad::Var logits, std::span<const std::int32_t> labels,
                                      std::span<const NodeId> mask) {
  if (mask.empty()) throw DataError("cross_entropy_loss: empty mask");
  if (labels.size() != static_cast<std::size_t>(logits.rows())) {
    throw ShapeError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  }
  const Matrix& z = logits.value();
  std::vector<NodeId> rows(mask.begin(), mask.end());
  Matrix log_probs(static_cast<Eigen::Index>(rows.size()), z.cols());
  double total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const NodeId v = rows[k];
    if (v < 0 || v >= z.rows()) throw ShapeError("cross_entropy_loss: mask node out of range");
    const std::int32_t y = labels[static_cast<std::size_t>(v)];
    if (y < 0 || y >= z.cols()) {
      throw DataError("cross_entropy_loss: node " + std::to_string(v) + " has no valid label");
    }
    log_probs.row(static_cast<Eigen::Index>(k)) = log_softmax_rows(z.row(v));
    total -= log_probs(static_cast<Eigen::Index>(k), y);
  }
  const double n = static_cast<double>(rows.size());
  Matrix value(1, 1);
  value(0, 0) = total / n;
  std::vector<std::int32_t> targets;
  targets.reserve(rows.size());
  for (NodeId v : rows) targets.push_back(labels[static_cast<std::size_t>(v)]);

  ad::Var loss = logits.tape()->record(
      "cross_entropy", std::move(value), {logits},
      [logits, rows = std::move(rows), targets = std::move(targets),
       log_probs = std::move(log_probs), n](ad::Tape& t, int self) {
        const double g = t.grad_buffer(self)(0, 0) / n;
        Matrix& gz = t.grad_buffer(logits.id());
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const auto r = static_cast<Eigen::Index>(k);
          gz.row(rows[k]) += g * log_probs.row(r).array().exp().matrix();
          gz(rows[k], targets[k]) -= g;
        }
      });
  return {loss, classification_accuracy(z, labels, mask)};
}

void init_classifier(ParamStore& params, Eigen::Index dim, Eigen::Index classes, ad::Rng& rng) {
  if (classes < 1) throw ConfigError("classifier: need at least one class");
  params.add("classifier.weight", glorot_uniform(dim, classes, rng));
  params.add("classifier.bias", Matrix::Zero(1, classes));
}

ad::Var classifier_logits(ad::Tape& tape, ParamStore& params, ad::Var h) {
  return ad::add_bias(ad::matmul(h, tape.param(params.at("classifier.weight"))),
                      tape.param(params.at("classifier.bias")));
}

ad::Var distmult_scores(ad::Var heads, ad::Var relations, ad::Var entities) {
  if (heads.cols() != relations.cols() || heads.cols() != entities.cols() ||
      heads.rows() != relations.rows()) {
    throw ShapeError("distmult_scores: heads " + shape_string(heads.value()) + ", relations " +
                     shape_string(relations.value()) + ", entities " +
                     shape_string(entities.value()));
  }
  return ad::matmul_nt(ad::hadamard(heads, relations), entities);
}

ad::Var kl_label_smoothing_loss(ad::Var logits, std::span<const std::vector<NodeId>> tails,
                                double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw ConfigError("kl_label_smoothing_loss: smoothing must lie in [0, 1)");
  }
  const Matrix& z = logits.value();
  if (tails.size() != static_cast<std::size_t>(z.rows()) || z.rows() == 0) {
    throw ShapeError("kl_label_smoothing_loss: one tail set per logits row required");
  }
  const Eigen::Index n = z.cols();
  const double floor = smoothing / static_cast<double>(n);
  Matrix target = Matrix::Constant(z.rows(), n, floor);
  for (std::size_t b = 0; b < tails.size(); ++b) {
    if (tails[b].empty()) {
      throw DataError("kl_label_smoothing_loss: empty tail set in row " + std::to_string(b));
    }
    const double mass = (1.0 - smoothing) / static_cast<double>(tails[b].size());
    for (NodeId t : tails[b]) {
      if (t < 0 || t >= n) throw ShapeError("kl_label_smoothing_loss: tail id out of range");
      target(static_cast<Eigen::Index>(b), t) += mass;
    }
  }
  const Matrix log_probs = log_softmax_rows(z);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = target(i, j);
      if (p > 0.0) total += p * (std::log(p) - log_probs(i, j));
    }
  }
  const double batch = static_cast<double>(z.rows());
  Matrix value(1, 1);
  value(0, 0) = total / batch;
  return logits.tape()->record(
      "kl_label_smoothing", std::move(value), {logits},
      [logits, target = std::move(target), log_probs, batch](ad::Tape& t, int self) {
        const double g = t.grad_buffer(self)(0, 0) / batch;
        t.grad_buffer(logits.id()) += g * (log_probs.array().exp().matrix() - target);
      });
}

double filtered_rank(std::span<const double> scores, NodeId target, const std::set<NodeId>* filter) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) {
    throw ShapeError("filtered_rank: target missing from candidates");
  }
  const double ts = scores[static_cast<std::size_t>(target)];
  std::size_t greater = 0;
  std::size_t ties = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    const auto id = static_cast<NodeId>(e);
    if (id == target) continue;
    if (filter && filter->count(id)) continue;
    if (scores[e] > ts) {
      ++greater;
    } else if (scores[e] == ts) {
      ++ties;
    }
  }
  return 1.0 + static_cast<double>(greater) + 0.5 * static_cast<double>(ties);
}

std::vector<TripleRank> filtered_ranks(const KgDataset& kg, std::span<const Triple> triples,
                                       const QueryScorer& scorer, std::size_t batch) {
  if (batch == 0) batch = 1;
  auto filter_for = [&](const Query& q) -> const std::set<NodeId>* {
    auto it = kg.filter_index.find(q);
    return it == kg.filter_index.end() ? nullptr : &it->second;
  };
  std::vector<TripleRank> ranks(triples.size());
  for (std::size_t begin = 0; begin < triples.size(); begin += batch) {
    const std::size_t end = std::min(triples.size(), begin + batch);
    std::vector<Query> queries;
    queries.reserve(2 * (end - begin));
    for (std::size_t i = begin; i < end; ++i) {
      queries.emplace_back(triples[i].head, triples[i].rel);
      queries.emplace_back(triples[i].tail, kg.reverse_of(triples[i].rel));
    }
    const Matrix scores = scorer(queries);
    if (scores.rows() != static_cast<Eigen::Index>(queries.size()) || scores.cols() != kg.entity_count) {
      throw ShapeError("filtered_ranks: scorer returned " + shape_string(scores) + " for " +
                       std::to_string(queries.size()) + " queries");
    }
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(2 * (i - begin));
      const Eigen::RowVectorXd tail_row = scores.row(r);
      const Eigen::RowVectorXd head_row = scores.row(r + 1);
      ranks[i].tail = filtered_rank({tail_row.data(), static_cast<std::size_t>(tail_row.size())},
                                    triples[i].tail, filter_for(queries[2 * (i - begin)]));
      ranks[i].head = filtered_rank({head_row.data(), static_cast<std::size_t>(head_row.size())},
                                    triples[i].head, filter_for(queries[2 * (i - begin) + 1]));
    }
  }
  return ranks;
}

RankingMetrics ranking_metrics(std::span<const double> ranks) {
  if (ranks.empty()) throw DataError("ranking_metrics: no ranks");
  RankingMetrics m;
  for (double r : ranks) {
    if (!(r >= 1.0)) throw NumericError("ranking_metrics: rank below 1");
    m.mr += r;
    m.mrr += 1.0 / r;
    m.hits1 += r <= 1.0 ? 1.0 : 0.0;
    m.hits3 += r <= 3.0 ? 1.0 : 0.0;
    m.hits10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mr /= n;
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  m.count = ranks.size();
  return m;
}

RankingMetrics ranking_metrics(std::span<const TripleRank> ranks) {
  std::vector<double> pooled;
  pooled.reserve(2 * ranks.size());
  for (const TripleRank& r : ranks) {
    pooled.push_back(r.tail);
    pooled.push_back(r.head);
  }
  return ranking_metrics(pooled);
}

}  // namespace magna
