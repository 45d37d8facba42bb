#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shrinke/model.hpp"
#include "shrinke/rng.hpp"

namespace shrinke {

struct MonotonicityReport {
    std::int64_t facts_checked = 0;
    std::int64_t subset_pairs_checked = 0;
    /// Per-dimension corner-inequality failures of factBox(Q1) subset-of
    /// factBox(Q2) for Q2 subset-of Q1. Zero on a correct implementation.
    std::int64_t containment_violations = 0;
    /// score(Q1) >= score(Q2) failures; measured, never asserted.
    std::int64_t distance_order_violations = 0;
    double max_containment_gap = 0.0;

    std::string json() const;
};

struct AuditOptions {
    int subsets_per_fact = 5;
    /// Test hook: swap the corners of the partial-fact box before checking,
    /// to prove the audit catches broken geometry.
    bool swap_corners = false;
};

/// Draws random qualifier subset pairs Q2 subset-of Q1 from each fact and
/// checks box containment (exact) and distance ordering (reported only).
MonotonicityReport auditMonotonicity(const Model& model, std::span<const Fact> facts,
                                     const AuditOptions& options, Rng& rng);

struct InversionPair {
    std::int32_t r1 = 0, r2 = 0;
    double residual = 0.0;
};

struct CompositionHit {
    std::int32_t r1 = 0, r2 = 0, r3 = 0;
    double residual = 0.0;
};

struct RelationPatternReport {
    /// symmetric[r] is true iff every angle of r is within tolerance of
    /// {0, +-pi} (mod 2pi) and its translation is near zero.
    std::vector<bool> symmetric;
    std::vector<InversionPair> inversion_partners;
    std::vector<CompositionHit> composition_hits;

    std::string json() const;
};

/// Classifies relations from parameters alone. Inversion scans all unordered
/// relation pairs. Composition candidates (r1 == r2 compose r3) come from the
/// caller; with an empty candidate list all triples are scanned only when
/// |R|^3 <= 1e6, otherwise a UsageError is raised. Pass exhaustiveWhenEmpty =
/// false to skip the composition scan entirely when no candidates are given.
RelationPatternReport classifyRelationPatterns(
    const Model& model, double angleTol, double vecTol,
    std::span<const std::array<std::int32_t, 3>> compositionCandidates = {},
    bool exhaustiveWhenEmpty = true);

enum class ReferenceBoxStrategy {
    /// Query box spanned at the origin head point: H_r(0) +- tau_t(delta_r).
    OriginHead,
    /// Majority vote of the decision over the supplied sample of head ids.
    SampledHeads,
};

struct QualifierPair {
    std::size_t body = 0;  // index into the input qualifier list
    std::size_t head = 0;

    friend bool operator==(const QualifierPair&, const QualifierPair&) = default;
};

struct QualifierRelationReport {
    std::vector<QualifierPair> implications;  // body implies head
    std::vector<QualifierPair> exclusions;    // stored with body < head

    std::string json(const Vocab& vocab, std::span<const Qualifier> qualifiers) const;
    /// body<TAB>head<TAB>kind rows, one per mined pair.
    std::string tsv(const Vocab& vocab, std::span<const Qualifier> qualifiers) const;
};

/// Shrinks a reference box by every qualifier and reports containment
/// (implication) and disjointness (exclusion) between the results.
/// Self-pairs are excluded; duplicated qualifiers imply each other both ways.
QualifierRelationReport mineQualifierRelationships(const Model& model, std::int32_t relation,
                                                   std::span<const Qualifier> qualifiers,
                                                   ReferenceBoxStrategy strategy,
                                                   std::span<const std::int32_t> sampleHeads = {});

/// Parameter-level relation implication r1 -> r2: same transform within
/// tolerance (angles mod 2pi, translation in L2) and offsets delta_r1 <=
/// delta_r2 elementwise.
bool checkRelationImplication(const Model& model, std::int32_t r1, std::int32_t r2,
                              double angleTol, double vecTol);

/// Absolute angular distance to 0 mod 2pi, in [0, pi].
double circularDistance(double angle);

}  // namespace shrinke
