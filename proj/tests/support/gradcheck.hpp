#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "shrinke/training.hpp"

namespace shrinke::testing {

/// Central finite differences of batchLoss against computeGradients, the
/// independent oracle for the hand-written backward pass.
struct GradCheck {
    double step = 1e-5;
    double tolerance = 1e-4;
    int coords_per_group = 20;

    struct GroupResult {
        std::string group;
        int checked = 0;
        double max_error = 0.0;  // relative for significant coords, absolute otherwise
        bool ok = true;
    };

    std::vector<GroupResult> run(shrinke::Model& model, const shrinke::TrainingBatch& batch,
                                 double smoothing, shrinke::Rng& rng) const {
        using namespace shrinke;
        GradientBuffer grads = zeroLike(model.params());
        computeGradients(model, batch, smoothing, grads);

        // restrict entity/relation rows to ids the batch actually touches
        std::vector<Index> entityRows, relationRows;
        for (std::size_t gi = 0; gi < batch.positives.size(); ++gi) {
            const Fact& f = batch.positives[gi];
            entityRows.push_back(f.head);
            entityRows.push_back(f.tail);
            relationRows.push_back(f.relation);
            for (const Qualifier& q : f.qualifiers) {
                entityRows.push_back(q.value);
                relationRows.push_back(q.key);
            }
        }
        for (const std::int32_t t : batch.negative_tails) entityRows.push_back(t);
        auto dedup = [](std::vector<Index>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        dedup(entityRows);
        dedup(relationRows);

        std::vector<GroupResult> results;
        auto refs = model.params().tensors();
        auto gradRefs = static_cast<const Parameters&>(grads).tensors();
        for (std::size_t ti = 0; ti < refs.size(); ++ti) {
            Mat& tensor = *refs[ti].tensor;
            const Mat& grad = *gradRefs[ti].tensor;
            const std::string name(refs[ti].name);

            const bool entityRowsOnly = name == "entity.points";
            const bool relationRowsOnly = name.rfind("relation.", 0) == 0;

            GroupResult res;
            res.group = name;
            for (int c = 0; c < coords_per_group; ++c) {
                Index row;
                if (entityRowsOnly) {
                    row = entityRows[rng.below(entityRows.size())];
                } else if (relationRowsOnly) {
                    row = relationRows[rng.below(relationRows.size())];
                } else {
                    row = static_cast<Index>(rng.below(static_cast<std::uint64_t>(tensor.rows())));
                }
                const Index col =
                    static_cast<Index>(rng.below(static_cast<std::uint64_t>(tensor.cols())));

                const double original = tensor(row, col);
                tensor(row, col) = original + step;
                const double up = batchLoss(model, batch, smoothing);
                tensor(row, col) = original - step;
                const double down = batchLoss(model, batch, smoothing);
                tensor(row, col) = original;

                const double fd = (up - down) / (2.0 * step);
                const double an = grad(row, col);
                const double scale = std::max(std::abs(fd), std::abs(an));
                double err;
                if (scale < 1e-7) {
                    err = std::abs(fd - an);  // both vanish: compare absolutely
                } else {
                    err = std::abs(fd - an) / scale;
                }
                res.max_error = std::max(res.max_error, err);
                ++res.checked;
            }
            res.ok = res.max_error <= tolerance;
            results.push_back(res);
        }
        return results;
    }
};

/// Batch of random facts over the model's vocabulary, with qualifiers.
inline shrinke::TrainingBatch makeRandomBatch(const shrinke::Model& model, int nPositives,
                                              int nNeg, int maxQualifiers, shrinke::Rng& rng) {
    using namespace shrinke;
    TrainingBatch batch;
    batch.n_neg = nNeg;
    const auto nE = static_cast<std::uint64_t>(model.numEntities());
    const auto nR = static_cast<std::uint64_t>(model.numRelations());
    for (int i = 0; i < nPositives; ++i) {
        std::vector<Qualifier> quals;
        const auto nq = rng.below(static_cast<std::uint64_t>(maxQualifiers) + 1);
        for (std::uint64_t q = 0; q < nq; ++q) {
            quals.push_back({static_cast<std::int32_t>(rng.below(nR)),
                             static_cast<std::int32_t>(rng.below(nE))});
        }
        Fact f(static_cast<std::int32_t>(rng.below(nE)), static_cast<std::int32_t>(rng.below(nR)),
               static_cast<std::int32_t>(rng.below(nE)), std::move(quals));
        const auto negs = sampleNegativeTails(f, nNeg, model.numEntities(), rng);
        batch.positives.push_back(std::move(f));
        batch.negative_tails.insert(batch.negative_tails.end(), negs.begin(), negs.end());
    }
    return batch;
}

}  // namespace shrinke::testing
