#include "shrinke/eval.hpp"

#include <algorithm>
#include <thread>

#include <json.hpp>

#include "shrinke/training.hpp"

namespace shrinke {

std::string Metrics::json() const {
    nlohmann::ordered_json j;
    j["mrr"] = mrr;
    j["hits1"] = hits1;
    j["hits10"] = hits10;
    j["count"] = count;
    return j.dump();
}

std::string Metrics::tsvHeader() { return "mrr\thits1\thits10\tcount"; }

std::string Metrics::tsvRow() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t%.6f\t%lld", mrr, hits1, hits10,
                  static_cast<long long>(count));
    return buf;
}

std::int64_t realisticRank(std::span<const double> distances, std::int32_t target,
                           std::span<const std::int32_t> excluded) {
    const double dTrue = distances[static_cast<std::size_t>(target)];
    std::int64_t better = 0, ties = 0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        const auto id = static_cast<std::int32_t>(i);
        if (id != target &&
            std::binary_search(excluded.begin(), excluded.end(), id)) {
            continue;
        }
        if (distances[i] < dTrue) {
            ++better;
        } else if (distances[i] == dTrue) {
            ++ties;  // includes the target itself
        }
    }
    return better + (ties + 2) / 2;
}

RankingResult rankAnswers(const Model& model, const Query& query, std::int32_t trueTail,
                          const FilterIndex& filter) {
    model.checkEntity(trueTail);
    const Boxd box = model.factBox(query.head, query.relation, query.qualifiers);
    const Mat& points = model.params().entity_points;

    std::vector<double> distances(static_cast<std::size_t>(model.numEntities()));
    for (std::int32_t e = 0; e < model.numEntities(); ++e) {
        distances[static_cast<std::size_t>(e)] =
            pointToBoxDistance(points.row(e).transpose(), box);
    }
    const auto excluded = filter.lookup(query.head, query.relation, query.qualifiers);
    return RankingResult{query, trueTail, realisticRank(distances, trueTail, excluded)};
}

Metrics evaluate(const Model& model, std::span<const Fact> augmentedSplit,
                 const FilterIndex& filter, int threads) {
    if (augmentedSplit.empty()) throw UsageError("evaluate: empty split");

    const std::size_t n = augmentedSplit.size();
    std::vector<std::int64_t> ranks(n, 0);

    auto worker = [&](std::size_t lane, std::size_t lanes) {
        for (std::size_t i = lane; i < n; i += lanes) {
            const Fact& f = augmentedSplit[i];
            Query q{f.head, f.relation, f.qualifiers};
            ranks[i] = rankAnswers(model, q, f.tail, filter).rank;
        }
    };

    const std::size_t lanes =
        std::min<std::size_t>(static_cast<std::size_t>(resolveThreads(threads, false)), n);
    if (lanes <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(lanes);
        for (std::size_t l = 0; l < lanes; ++l) pool.emplace_back(worker, l, lanes);
        for (auto& t : pool) t.join();
    }

    Metrics m;
    m.count = static_cast<std::int64_t>(n);
    double mrr = 0.0;
    std::int64_t h1 = 0, h10 = 0;
    for (const std::int64_t r : ranks) {
        mrr += 1.0 / static_cast<double>(r);
        if (r <= 1) ++h1;
        if (r <= 10) ++h10;
    }
    m.mrr = mrr / static_cast<double>(n);
    m.hits1 = static_cast<double>(h1) / static_cast<double>(n);
    m.hits10 = static_cast<double>(h10) / static_cast<double>(n);
    return m;
}

}  // namespace shrinke
