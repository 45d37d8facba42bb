#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shrinke/errors.hpp"

namespace shrinke {

/// FNV-1a 64-bit hash, used for file and vocabulary fingerprints.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1aFile(const std::filesystem::path& file);

struct Qualifier {
    std::int32_t key = 0;
    std::int32_t value = 0;
    friend auto operator<=>(const Qualifier&, const Qualifier&) = default;
};

/// Sorts by (key, value) and drops duplicate pairs; returns the number dropped.
std::size_t canonicalizeQualifiers(std::vector<Qualifier>& qualifiers);

/// A hyper-relational fact: primal triple plus a set of key-value qualifiers.
/// Qualifiers are always held sorted by (key, value) with duplicates removed,
/// so facts that differ only in qualifier order compare equal.
struct Fact {
    std::int32_t head = 0;
    std::int32_t relation = 0;
    std::int32_t tail = 0;
    std::vector<Qualifier> qualifiers;

    Fact() = default;
    Fact(std::int32_t h, std::int32_t r, std::int32_t t, std::vector<Qualifier> quals = {})
        : head(h), relation(r), tail(t), qualifiers(std::move(quals)) {
        canonicalizeQualifiers(qualifiers);
    }

    std::size_t arity() const { return qualifiers.size() + 2; }
    friend bool operator==(const Fact&, const Fact&) = default;
};

/// A fact as read from text, before vocabulary interning.
struct RawFact {
    std::string head, relation, tail;
    std::vector<std::pair<std::string, std::string>> qualifiers;
};

/// Parses one tab-separated line `h r t [k v]*`. Token count must be odd and
/// >= 3 and no token may be empty. file/line are used in error messages only.
RawFact parseFactLine(std::string_view line, const std::string& file = "", std::size_t lineNumber = 0);

/// Entity and relation string <-> dense id bijections. Reciprocal relation ids
/// live above the base range: reciprocal(r) = r + numBaseRelations() for base r.
class Vocab {
  public:
    std::int32_t addEntity(const std::string& name);
    std::int32_t addRelation(const std::string& name);

    std::optional<std::int32_t> entityId(const std::string& name) const;
    std::optional<std::int32_t> relationId(const std::string& name) const;

    const std::string& entityName(std::int32_t id) const;
    /// Base relations return their stored name; reciprocal ids get a "^-1" suffix.
    std::string relationName(std::int32_t id) const;

    std::int32_t numEntities() const { return static_cast<std::int32_t>(entities_.size()); }
    std::int32_t numBaseRelations() const { return static_cast<std::int32_t>(relations_.size()); }
    std::int32_t numRelationsWithReciprocals() const { return 2 * numBaseRelations(); }

    std::int32_t reciprocal(std::int32_t relation) const;
    bool isReciprocal(std::int32_t relation) const { return relation >= numBaseRelations(); }

    void checkEntity(std::int32_t id) const;
    void checkRelation(std::int32_t id) const;  // accepts reciprocal ids

    /// kind<TAB>string<TAB>id, entities first, then base relations.
    void writeTsv(const std::filesystem::path& file) const;

    /// Order-sensitive fingerprint of the full bijection.
    std::uint64_t hash() const;

  private:
    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, std::int32_t> entity_ids_;
    std::unordered_map<std::string, std::int32_t> relation_ids_;
};

struct Dataset {
    std::vector<Fact> train, valid, test;
    std::string source_dir;
    std::vector<std::pair<std::string, std::uint64_t>> file_hashes;

    std::size_t totalFacts() const { return train.size() + valid.size() + test.size(); }
};

/// Loads train.txt/test.txt (required) and valid.txt (optional) from dir.
/// The vocabulary covers the union of all splits, ids assigned in order of
/// first occurrence scanning train, then valid, then test.
std::pair<Dataset, Vocab> loadDataset(const std::filesystem::path& dir);

/// Splits off round(fraction * |train|) facts as a validation set. The split
/// is a disjoint partition, deterministic in the seed, and both outputs keep
/// the input's relative order.
std::pair<std::vector<Fact>, std::vector<Fact>> carveValidation(const std::vector<Fact>& train,
                                                                double fraction,
                                                                std::uint64_t seed);

/// Canonical tab-separated text form (qualifiers in sorted id order).
std::string serializeFact(const Fact& fact, const Vocab& vocab);

void writeSplit(const std::filesystem::path& file, std::span<const Fact> facts, const Vocab& vocab);

/// Map from (head, relation, qualifier set) to the set of known-true tails.
/// Every fact is indexed in both directions: under (h, r, Q) and under the
/// reciprocal key (t, r^-1, Q), so head prediction filters correctly.
class FilterIndex {
  public:
    void addSplit(std::span<const Fact> facts, const Vocab& vocab);

    /// Sorted unique tail ids known true for this query; empty span on a miss.
    std::span<const std::int32_t> lookup(std::int32_t head, std::int32_t relation,
                                         std::span<const Qualifier> qualifiers) const;

    std::size_t numKeys() const { return map_.size(); }

  private:
    struct Key {
        std::int32_t head, relation;
        std::vector<Qualifier> qualifiers;
        friend bool operator==(const Key&, const Key&) = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };

    void add(std::int32_t head, std::int32_t relation, const std::vector<Qualifier>& qualifiers,
             std::int32_t tail);

    std::unordered_map<Key, std::vector<std::int32_t>, KeyHash> map_;
};

}  // namespace shrinke
