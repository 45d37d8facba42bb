#include "shrinke/patterns.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace shrinke {

double circularDistance(double angle) { return std::abs(std::remainder(angle, 2.0 * M_PI)); }

std::string MonotonicityReport::json() const {
    nlohmann::ordered_json j;
    j["facts_checked"] = facts_checked;
    j["subset_pairs_checked"] = subset_pairs_checked;
    j["containment_violations"] = containment_violations;
    j["distance_order_violations"] = distance_order_violations;
    j["max_containment_gap"] = max_containment_gap;
    return j.dump();
}

MonotonicityReport auditMonotonicity(const Model& model, std::span<const Fact> facts,
                                     const AuditOptions& options, Rng& rng) {
    MonotonicityReport report;
    for (const Fact& fact : facts) {
        if (fact.qualifiers.empty()) continue;
        ++report.facts_checked;
        for (int s = 0; s < options.subsets_per_fact; ++s) {
            // Q1: random subset of the fact's qualifiers; Q2: random subset of Q1.
            std::vector<Qualifier> q1, q2;
            for (const Qualifier& q : fact.qualifiers) {
                if (rng.below(2) == 0) q1.push_back(q);
            }
            for (const Qualifier& q : q1) {
                if (rng.below(2) == 0) q2.push_back(q);
            }
            ++report.subset_pairs_checked;

            const Boxd inner = model.factBox(fact.head, fact.relation, q1);
            Boxd outer = model.factBox(fact.head, fact.relation, q2);
            if (options.swap_corners) std::swap(outer.min, outer.max);

            // Raw corner inequalities, with no empty-box escape: this is the
            // exact algebraic guarantee of shrinking plus intersection.
            for (Index i = 0; i < inner.dim(); ++i) {
                const double gap =
                    std::max(outer.min[i] - inner.min[i], inner.max[i] - outer.max[i]);
                if (gap > 0.0) {
                    ++report.containment_violations;
                    report.max_containment_gap = std::max(report.max_containment_gap, gap);
                }
            }

            const Fact f1(fact.head, fact.relation, fact.tail, q1);
            const Fact f2(fact.head, fact.relation, fact.tail, q2);
            if (model.score(f1) < model.score(f2)) ++report.distance_order_violations;
        }
    }
    return report;
}

namespace {

/// Distance of an angle to the nearest of {0, +-pi} mod 2pi.
double distanceToHalfTurns(double angle) {
    return std::min(circularDistance(angle), circularDistance(angle - M_PI));
}

bool translationNearZero(const Model& model, std::int32_t r, double vecTol) {
    return model.params().rel_translation.row(r).norm() <= vecTol;
}

}  // namespace

std::string RelationPatternReport::json() const {
    nlohmann::ordered_json j;
    std::vector<std::int32_t> symmetricIds;
    for (std::size_t r = 0; r < symmetric.size(); ++r) {
        if (symmetric[r]) symmetricIds.push_back(static_cast<std::int32_t>(r));
    }
    j["symmetric_relations"] = symmetricIds;
    auto& inv = j["inversion_partners"] = nlohmann::ordered_json::array();
    for (const auto& p : inversion_partners) {
        inv.push_back({{"r1", p.r1}, {"r2", p.r2}, {"residual", p.residual}});
    }
    auto& comp = j["composition_hits"] = nlohmann::ordered_json::array();
    for (const auto& c : composition_hits) {
        comp.push_back({{"r1", c.r1}, {"r2", c.r2}, {"r3", c.r3}, {"residual", c.residual}});
    }
    return j.dump();
}

RelationPatternReport classifyRelationPatterns(
    const Model& model, double angleTol, double vecTol,
    std::span<const std::array<std::int32_t, 3>> compositionCandidates, bool exhaustiveWhenEmpty) {
    if (!(angleTol > 0.0) || !(vecTol > 0.0)) {
        throw ConfigError("classifyRelationPatterns: tolerances must be positive");
    }
    const Mat& angles = model.params().rel_angles;
    const auto nR = model.numRelations();

    RelationPatternReport report;
    report.symmetric.resize(static_cast<std::size_t>(nR), false);
    for (std::int32_t r = 0; r < nR; ++r) {
        double worst = 0.0;
        for (Index b = 0; b < angles.cols(); ++b) {
            worst = std::max(worst, distanceToHalfTurns(angles(r, b)));
        }
        report.symmetric[static_cast<std::size_t>(r)] =
            worst <= angleTol && translationNearZero(model, r, vecTol);
    }

    for (std::int32_t r1 = 0; r1 < nR; ++r1) {
        if (!translationNearZero(model, r1, vecTol)) continue;
        for (std::int32_t r2 = r1 + 1; r2 < nR; ++r2) {
            if (!translationNearZero(model, r2, vecTol)) continue;
            double residual = 0.0;
            for (Index b = 0; b < angles.cols(); ++b) {
                residual = std::max(residual, circularDistance(angles(r1, b) + angles(r2, b)));
            }
            if (residual <= angleTol) report.inversion_partners.push_back({r1, r2, residual});
        }
    }

    auto compositionResidual = [&](std::int32_t r1, std::int32_t r2, std::int32_t r3) {
        double residual = 0.0;
        for (Index b = 0; b < angles.cols(); ++b) {
            residual = std::max(residual,
                                circularDistance(angles(r1, b) - angles(r2, b) - angles(r3, b)));
        }
        return residual;
    };
    auto tryComposition = [&](std::int32_t r1, std::int32_t r2, std::int32_t r3) {
        model.checkRelation(r1);
        model.checkRelation(r2);
        model.checkRelation(r3);
        if (!translationNearZero(model, r1, vecTol) || !translationNearZero(model, r2, vecTol) ||
            !translationNearZero(model, r3, vecTol)) {
            return;
        }
        const double residual = compositionResidual(r1, r2, r3);
        if (residual <= angleTol) report.composition_hits.push_back({r1, r2, r3, residual});
    };

    if (!compositionCandidates.empty()) {
        for (const auto& [r1, r2, r3] : compositionCandidates) tryComposition(r1, r2, r3);
    } else if (exhaustiveWhenEmpty) {
        const double total = std::pow(static_cast<double>(nR), 3.0);
        if (total > 1e6) {
            throw UsageError("classifyRelationPatterns: refusing exhaustive composition scan over " +
                             std::to_string(static_cast<long long>(total)) +
                             " triples; supply candidates");
        }
        for (std::int32_t r1 = 0; r1 < nR; ++r1) {
            for (std::int32_t r2 = 0; r2 < nR; ++r2) {
                for (std::int32_t r3 = 0; r3 < nR; ++r3) tryComposition(r1, r2, r3);
            }
        }
    }
    return report;
}

namespace {

Boxd originQueryBox(const Model& model, std::int32_t relation) {
    const Index d = model.dim();
    Vec center = Vec::Zero(d);
    if (!model.ablation().no_translation) {
        center = model.params().rel_translation.row(relation).transpose();
    }
    return spanBox(center, Vec(model.params().rel_offset.row(relation).transpose()),
                   model.config().temperature);
}

}  // namespace

QualifierRelationReport mineQualifierRelationships(const Model& model, std::int32_t relation,
                                                   std::span<const Qualifier> qualifiers,
                                                   ReferenceBoxStrategy strategy,
                                                   std::span<const std::int32_t> sampleHeads) {
    if (qualifiers.empty()) throw UsageError("mineQualifierRelationships: no qualifiers given");
    model.checkRelation(relation);
    if (strategy == ReferenceBoxStrategy::SampledHeads && sampleHeads.empty()) {
        throw UsageError("mineQualifierRelationships: SampledHeads strategy needs head ids");
    }

    std::vector<Boxd> referenceBoxes;
    if (strategy == ReferenceBoxStrategy::OriginHead) {
        referenceBoxes.push_back(originQueryBox(model, relation));
    } else {
        for (const std::int32_t h : sampleHeads) referenceBoxes.push_back(model.queryBox(h, relation));
    }

    // One shrunk box per qualifier per reference box.
    std::vector<std::vector<Boxd>> shrunk(referenceBoxes.size());
    for (std::size_t b = 0; b < referenceBoxes.size(); ++b) {
        shrunk[b].reserve(qualifiers.size());
        for (const Qualifier& q : qualifiers) {
            const auto [s, S] = model.shrinkVectors(relation, q.key, q.value);
            shrunk[b].push_back(shrinkBox(referenceBoxes[b], s, S));
        }
    }

    auto majority = [&](auto&& decide) {
        std::size_t hits = 0;
        for (std::size_t b = 0; b < referenceBoxes.size(); ++b) {
            if (decide(b)) ++hits;
        }
        return 2 * hits >= referenceBoxes.size() && hits > 0;
    };

    QualifierRelationReport report;
    for (std::size_t i = 0; i < qualifiers.size(); ++i) {
        for (std::size_t j = 0; j < qualifiers.size(); ++j) {
            if (i == j) continue;
            if (majority([&](std::size_t b) { return boxContains(shrunk[b][j], shrunk[b][i]); })) {
                report.implications.push_back({i, j});
            }
            if (i < j &&
                majority([&](std::size_t b) { return boxesDisjoint(shrunk[b][i], shrunk[b][j]); })) {
                report.exclusions.push_back({i, j});
            }
        }
    }
    return report;
}

namespace {

std::string qualifierLabel(const Vocab& vocab, const Qualifier& q) {
    return "(" + vocab.relationName(q.key) + ": " + vocab.entityName(q.value) + ")";
}

}  // namespace

std::string QualifierRelationReport::json(const Vocab& vocab,
                                          std::span<const Qualifier> qualifiers) const {
    nlohmann::ordered_json j;
    auto& imp = j["implications"] = nlohmann::ordered_json::array();
    for (const auto& p : implications) {
        imp.push_back({{"body", qualifierLabel(vocab, qualifiers[p.body])},
                       {"head", qualifierLabel(vocab, qualifiers[p.head])}});
    }
    auto& exc = j["exclusions"] = nlohmann::ordered_json::array();
    for (const auto& p : exclusions) {
        exc.push_back({{"body", qualifierLabel(vocab, qualifiers[p.body])},
                       {"head", qualifierLabel(vocab, qualifiers[p.head])}});
    }
    return j.dump();
}

std::string QualifierRelationReport::tsv(const Vocab& vocab,
                                         std::span<const Qualifier> qualifiers) const {
    std::string out;
    for (const auto& p : implications) {
        out += qualifierLabel(vocab, qualifiers[p.body]) + "\t" +
               qualifierLabel(vocab, qualifiers[p.head]) + "\timplication\n";
    }
    for (const auto& p : exclusions) {
        out += qualifierLabel(vocab, qualifiers[p.body]) + "\t" +
               qualifierLabel(vocab, qualifiers[p.head]) + "\texclusion\n";
    }
    return out;
}

bool checkRelationImplication(const Model& model, std::int32_t r1, std::int32_t r2,
                              double angleTol, double vecTol) {
    model.checkRelation(r1);
    model.checkRelation(r2);
    const Parameters& P = model.params();
    for (Index b = 0; b < P.rel_angles.cols(); ++b) {
        if (circularDistance(P.rel_angles(r1, b) - P.rel_angles(r2, b)) > angleTol) return false;
    }
    if ((P.rel_translation.row(r1) - P.rel_translation.row(r2)).norm() > vecTol) return false;
    return (P.rel_offset.row(r1).array() <= P.rel_offset.row(r2).array()).all();
}

}  // namespace shrinke
