#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shrinke/data.hpp"
#include "shrinke/model.hpp"

namespace shrinke {

/// A tail-prediction query. Head prediction is expressed as a tail query on
/// the reciprocal relation, so evaluation splits are reciprocal-augmented.
struct Query {
    std::int32_t head = 0;
    std::int32_t relation = 0;
    std::vector<Qualifier> qualifiers;
};

struct RankingResult {
    Query query;
    std::int32_t true_tail = 0;
    std::int64_t rank = 0;
};

struct Metrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
    std::int64_t count = 0;

    std::string json() const;
    std::string tsvRow() const;
    static std::string tsvHeader();
};

/// Realistic (mid) rank of `target` among the candidate distances:
/// rank = #strictly-better + ceil((#ties-including-self + 1) / 2).
/// Ids listed in `excluded` (sorted) are skipped, except the target itself.
/// Invariant under any strictly monotone transform of the distances.
std::int64_t realisticRank(std::span<const double> distances, std::int32_t target,
                           std::span<const std::int32_t> excluded = {});

/// Scores every entity against one fact box (the box does not depend on the
/// candidate tail) and ranks the true tail under the filtered protocol.
RankingResult rankAnswers(const Model& model, const Query& query, std::int32_t trueTail,
                          const FilterIndex& filter);

/// Filtered MRR / Hits@1 / Hits@10 over a reciprocal-augmented split
/// (each input fact is one query). Parallel over queries; aggregation order
/// is fixed, so results do not depend on scheduling.
Metrics evaluate(const Model& model, std::span<const Fact> augmentedSplit,
                 const FilterIndex& filter, int threads = 0);

}  // namespace shrinke
