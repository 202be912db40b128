#pragma once

#include "magna/autograd.hpp"
#include "magna/graph.hpp"
#include "magna/params.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace magna {

// Index of the largest entry; ties go to the lowest index.
Eigen::Index argmax_row(const Matrix& m, Eigen::Index row);

struct ClassificationLoss {
  ad::Var loss;  // 1 x 1
  double accuracy = 0.0;
};

// Mean negative log-softmax over the nodes in `mask`, plus argmax accuracy.
ClassificationLoss cross_entropy_loss(ad::Var logits, std::span<const std::int32_t> labels,
                                      std::span<const NodeId> mask);
double classification_accuracy(const Matrix& logits, std::span<const std::int32_t> labels,
                               std::span<const NodeId> mask);

// Linear classifier on top of node representations: classifier.weight, classifier.bias.
void init_classifier(ParamStore& params, Eigen::Index dim, Eigen::Index classes, ad::Rng& rng);
ad::Var classifier_logits(ad::Tape& tape, ParamStore& params, ad::Var h);

// score[b, t] = sum_k heads[b, k] * relations[b, k] * entities[t, k]
ad::Var distmult_scores(ad::Var heads, ad::Var relations, ad::Var entities);

// Per query row b the target is (1 - eps) spread uniformly over tails[b] plus
// eps spread over all N entities; the loss is KL(target || softmax(logits[b]))
// averaged over the batch.
ad::Var kl_label_smoothing_loss(ad::Var logits, std::span<const std::vector<NodeId>> tails,
                                double smoothing);

using Query = std::pair<NodeId, RelationId>;
// Scores every entity for each query; returns queries.size() x entity_count.
using QueryScorer = std::function<Matrix(std::span<const Query>)>;

struct TripleRank {
  double tail = 0.0;  // rank of t for (h, r, ?)
  double head = 0.0;  // rank of h for (t, r^-1, ?)
};

// 1 + #candidates scoring strictly higher + #ties / 2, where candidates are
// all entities except the other known answers in `filter`.
double filtered_rank(std::span<const double> scores, NodeId target, const std::set<NodeId>* filter);

std::vector<TripleRank> filtered_ranks(const KgDataset& kg, std::span<const Triple> triples,
                                       const QueryScorer& scorer, std::size_t batch = 256);

struct RankingMetrics {
  double mr = 0.0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;
};

RankingMetrics ranking_metrics(std::span<const double> ranks);
// Both directions of every triple pooled into one metric set.
RankingMetrics ranking_metrics(std::span<const TripleRank> ranks);

}  // namespace magna
