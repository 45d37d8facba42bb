#include "shrinke/data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shrinke/rng.hpp"

namespace shrinke {

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1aFile(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a(buf.str());
}

std::size_t canonicalizeQualifiers(std::vector<Qualifier>& qualifiers) {
    std::sort(qualifiers.begin(), qualifiers.end());
    const auto last = std::unique(qualifiers.begin(), qualifiers.end());
    const std::size_t dropped = static_cast<std::size_t>(qualifiers.end() - last);
    qualifiers.erase(last, qualifiers.end());
    return dropped;
}

namespace {

std::string location(const std::string& file, std::size_t line) {
    if (file.empty() && line == 0) return "";
    std::string loc = file.empty() ? "line " : file + ":";
    loc += std::to_string(line);
    return loc + ": ";
}

}  // namespace

RawFact parseFactLine(std::string_view line, const std::string& file, std::size_t lineNumber) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        tokens.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    if (tokens.size() < 3) {
        throw ParseError(location(file, lineNumber) + "expected at least 3 tab-separated tokens, got " +
                         std::to_string(tokens.size()));
    }
    if (tokens.size() % 2 == 0) {
        throw ParseError(location(file, lineNumber) + "even token count (" +
                         std::to_string(tokens.size()) + "): dangling qualifier key");
    }
    for (const auto& t : tokens) {
        if (t.empty()) {
            throw ParseError(location(file, lineNumber) + "empty token");
        }
    }

    RawFact raw;
    raw.head = tokens[0];
    raw.relation = tokens[1];
    raw.tail = tokens[2];
    for (std::size_t i = 3; i + 1 < tokens.size(); i += 2) {
        raw.qualifiers.emplace_back(tokens[i], tokens[i + 1]);
    }
    return raw;
}

std::int32_t Vocab::addEntity(const std::string& name) {
    const auto [it, inserted] = entity_ids_.try_emplace(name, numEntities());
    if (inserted) entities_.push_back(name);
    return it->second;
}

std::int32_t Vocab::addRelation(const std::string& name) {
    const auto [it, inserted] = relation_ids_.try_emplace(name, numBaseRelations());
    if (inserted) relations_.push_back(name);
    return it->second;
}

std::optional<std::int32_t> Vocab::entityId(const std::string& name) const {
    const auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::int32_t> Vocab::relationId(const std::string& name) const {
    const auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::entityName(std::int32_t id) const {
    checkEntity(id);
    return entities_[static_cast<std::size_t>(id)];
}

std::string Vocab::relationName(std::int32_t id) const {
    checkRelation(id);
    if (isReciprocal(id)) return relations_[static_cast<std::size_t>(id - numBaseRelations())] + "^-1";
    return relations_[static_cast<std::size_t>(id)];
}

std::int32_t Vocab::reciprocal(std::int32_t relation) const {
    checkRelation(relation);
    return isReciprocal(relation) ? relation - numBaseRelations() : relation + numBaseRelations();
}

void Vocab::checkEntity(std::int32_t id) const {
    if (id < 0 || id >= numEntities()) {
        throw LookupError("entity id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(numEntities()) + ")");
    }
}

void Vocab::checkRelation(std::int32_t id) const {
    if (id < 0 || id >= numRelationsWithReciprocals()) {
        throw LookupError("relation id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(numRelationsWithReciprocals()) + ")");
    }
}

void Vocab::writeTsv(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    for (std::int32_t i = 0; i < numEntities(); ++i) {
        out << "entity\t" << entities_[static_cast<std::size_t>(i)] << '\t' << i << '\n';
    }
    for (std::int32_t i = 0; i < numBaseRelations(); ++i) {
        out << "relation\t" << relations_[static_cast<std::size_t>(i)] << '\t' << i << '\n';
    }
    if (!out) throw IoError("failed writing " + file.string());
}

std::uint64_t Vocab::hash() const {
    std::uint64_t h = fnv1a("shrinke-vocab");
    auto mix = [&h](std::string_view kind, const std::string& name) {
        h ^= fnv1a(kind);
        h *= 1099511628211ULL;
        h ^= fnv1a(name);
        h *= 1099511628211ULL;
    };
    for (const auto& e : entities_) mix("e", e);
    for (const auto& r : relations_) mix("r", r);
    return h;
}

namespace {

struct SplitLoad {
    std::vector<Fact> facts;
    std::size_t duplicate_qualifiers = 0;
};

SplitLoad loadSplit(const std::filesystem::path& file, Vocab& vocab) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read " + file.string());
    SplitLoad out;
    std::string line;
    std::size_t lineNumber = 0;
    while (std::getline(in, line)) {
        ++lineNumber;
        if (line.empty()) continue;
        const RawFact raw = parseFactLine(line, file.string(), lineNumber);
        Fact fact;
        fact.head = vocab.addEntity(raw.head);
        fact.relation = vocab.addRelation(raw.relation);
        fact.tail = vocab.addEntity(raw.tail);
        for (const auto& [k, v] : raw.qualifiers) {
            fact.qualifiers.push_back({vocab.addRelation(k), vocab.addEntity(v)});
        }
        out.duplicate_qualifiers += canonicalizeQualifiers(fact.qualifiers);
        out.facts.push_back(std::move(fact));
    }
    return out;
}

}  // namespace

std::pair<Dataset, Vocab> loadDataset(const std::filesystem::path& dir) {
    const auto trainFile = dir / "train.txt";
    const auto validFile = dir / "valid.txt";
    const auto testFile = dir / "test.txt";
    if (!std::filesystem::exists(trainFile) || !std::filesystem::exists(testFile)) {
        throw IoError("dataset directory " + dir.string() + " must contain train.txt and test.txt");
    }

    Dataset data;
    Vocab vocab;
    data.source_dir = dir.string();

    auto loadInto = [&](const std::filesystem::path& file, std::vector<Fact>& dst) {
        SplitLoad loaded = loadSplit(file, vocab);
        if (loaded.duplicate_qualifiers > 0) {
            std::cerr << "warning: " << file.string() << ": collapsed "
                      << loaded.duplicate_qualifiers << " duplicate qualifier pair(s)\n";
        }
        dst = std::move(loaded.facts);
        data.file_hashes.emplace_back(file.filename().string(), fnv1aFile(file));
    };

    loadInto(trainFile, data.train);
    if (std::filesystem::exists(validFile)) loadInto(validFile, data.valid);
    loadInto(testFile, data.test);
    return {std::move(data), std::move(vocab)};
}

std::pair<std::vector<Fact>, std::vector<Fact>> carveValidation(const std::vector<Fact>& train,
                                                                double fraction,
                                                                std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("validation fraction must be in (0, 1), got " + std::to_string(fraction));
    }
    const std::size_t n = train.size();
    const std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(splitmix64(seed));
    rng.shuffle(order);

    std::vector<bool> toValid(n, false);
    for (std::size_t i = 0; i < k; ++i) toValid[order[i]] = true;

    std::pair<std::vector<Fact>, std::vector<Fact>> out;
    out.first.reserve(n - k);
    out.second.reserve(k);
    for (std::size_t i = 0; i < n; ++i) {
        (toValid[i] ? out.second : out.first).push_back(train[i]);
    }
    return out;
}

std::string serializeFact(const Fact& fact, const Vocab& vocab) {
    std::string line = vocab.entityName(fact.head);
    line += '\t';
    line += vocab.relationName(fact.relation);
    line += '\t';
    line += vocab.entityName(fact.tail);
    for (const Qualifier& q : fact.qualifiers) {
        line += '\t';
        line += vocab.relationName(q.key);
        line += '\t';
        line += vocab.entityName(q.value);
    }
    return line;
}

void writeSplit(const std::filesystem::path& file, std::span<const Fact> facts, const Vocab& vocab) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    for (const Fact& f : facts) out << serializeFact(f, vocab) << '\n';
    if (!out) throw IoError("failed writing " + file.string());
}

std::size_t FilterIndex::KeyHash::operator()(const Key& k) const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::uint64_t x) {
        h ^= x;
        h *= 1099511628211ULL;
    };
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.head)));
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.relation)));
    for (const Qualifier& q : k.qualifiers) {
        mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(q.key)));
        mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(q.value)));
    }
    return static_cast<std::size_t>(h);
}

void FilterIndex::add(std::int32_t head, std::int32_t relation,
                      const std::vector<Qualifier>& qualifiers, std::int32_t tail) {
    auto& tails = map_[Key{head, relation, qualifiers}];
    const auto it = std::lower_bound(tails.begin(), tails.end(), tail);
    if (it == tails.end() || *it != tail) tails.insert(it, tail);
}

void FilterIndex::addSplit(std::span<const Fact> facts, const Vocab& vocab) {
    for (const Fact& f : facts) {
        add(f.head, f.relation, f.qualifiers, f.tail);
        add(f.tail, vocab.reciprocal(f.relation), f.qualifiers, f.head);
    }
}

std::span<const std::int32_t> FilterIndex::lookup(std::int32_t head, std::int32_t relation,
                                                  std::span<const Qualifier> qualifiers) const {
    Key key{head, relation, {qualifiers.begin(), qualifiers.end()}};
    const auto it = map_.find(key);
    if (it == map_.end()) return {};
    return it->second;
}

}  // namespace shrinke
