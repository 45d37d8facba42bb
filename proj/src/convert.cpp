#include "shrinke/convert.hpp"

#include <fstream>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "shrinke/errors.hpp"

namespace shrinke {

std::string ConvertCounts::json() const {
    nlohmann::ordered_json j;
    j["facts"] = facts;
    j["train"] = train;
    j["valid"] = valid;
    j["test"] = test;
    j["entities"] = entities;
    j["relations"] = relations;
    return j.dump();
}

std::optional<ExpectProfile> findProfile(const std::string& name) {
    static const std::vector<ExpectProfile> profiles = {
        {"jf17k", 100947, 28645, 501, 76379, 0, 24568},
        {"wikipeople", 382229, 47765, 193, 305725, 38223, 38281},
        {"wd50k", 236507, 47156, 532, 166435, 23913, 46159},
        {"wd50k33", 102107, 38124, 475, 73406, 10568, 18133},
        {"wd50k66", 49167, 27347, 494, 35968, 5154, 8045},
        {"wd50k100", 31314, 18792, 279, 22738, 3279, 5297},
    };
    for (const auto& p : profiles) {
        if (p.name == name) return p;
    }
    return std::nullopt;
}

namespace {

struct StringPools {
    std::unordered_set<std::string> entities;
    std::unordered_set<std::string> relations;
};

std::string recordContext(const std::string& file, std::size_t index) {
    return file + ": record " + std::to_string(index);
}

void requireToken(const nlohmann::json& token, const std::string& file, std::size_t index) {
    if (!token.is_string() || token.get<std::string>().empty()) {
        throw ConvertError(recordContext(file, index) + ": tokens must be non-empty strings");
    }
}

/// Flattens one record to the token list h, r, t, k1, v1, ...
std::vector<std::string> flattenRecord(const nlohmann::json& record, const std::string& file,
                                       std::size_t index) {
    std::vector<std::string> tokens;
    if (record.is_array()) {
        if (record.size() < 3 || record.size() % 2 == 0) {
            throw ConvertError(recordContext(file, index) + ": array record must have odd length >= 3, got " +
                               std::to_string(record.size()));
        }
        for (const auto& token : record) {
            requireToken(token, file, index);
            tokens.push_back(token.get<std::string>());
        }
        return tokens;
    }
    if (record.is_object()) {
        if (!record.contains("triple") || !record["triple"].is_array() ||
            record["triple"].size() != 3) {
            throw ConvertError(recordContext(file, index) + ": object record needs a 3-element \"triple\"");
        }
        for (const auto& token : record["triple"]) {
            requireToken(token, file, index);
            tokens.push_back(token.get<std::string>());
        }
        if (record.contains("qualifiers")) {
            if (!record["qualifiers"].is_array()) {
                throw ConvertError(recordContext(file, index) + ": \"qualifiers\" must be an array of pairs");
            }
            for (const auto& pair : record["qualifiers"]) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw ConvertError(recordContext(file, index) + ": qualifier must be a [key, value] pair");
                }
                requireToken(pair[0], file, index);
                requireToken(pair[1], file, index);
                tokens.push_back(pair[0].get<std::string>());
                tokens.push_back(pair[1].get<std::string>());
            }
        }
        for (const auto& [key, value] : record.items()) {
            (void)value;
            if (key != "triple" && key != "qualifiers") {
                throw ConvertError(recordContext(file, index) + ": unknown field \"" + key + "\"");
            }
        }
        return tokens;
    }
    throw ConvertError(recordContext(file, index) + ": record must be a JSON array or object");
}

std::size_t convertFile(const std::filesystem::path& inFile, const std::filesystem::path& outFile,
                        StringPools& pools) {
    std::ifstream in(inFile);
    if (!in) throw IoError("cannot read " + inFile.string());
    std::ofstream out(outFile);
    if (!out) throw IoError("cannot write " + outFile.string());

    const std::string fileLabel = inFile.filename().string();
    std::string line;
    std::size_t index = 0;
    std::size_t written = 0;
    while (std::getline(in, line)) {
        ++index;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConvertError(recordContext(fileLabel, index) + ": invalid JSON: " + e.what());
        }
        const std::vector<std::string> tokens = flattenRecord(record, fileLabel, index);

        pools.entities.insert(tokens[0]);
        pools.relations.insert(tokens[1]);
        pools.entities.insert(tokens[2]);
        for (std::size_t i = 3; i + 1 < tokens.size(); i += 2) {
            pools.relations.insert(tokens[i]);
            pools.entities.insert(tokens[i + 1]);
        }

        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) out << '\t';
            out << tokens[i];
        }
        out << '\n';
        ++written;
    }
    if (!out) throw IoError("failed writing " + outFile.string());
    return written;
}

}  // namespace

ConvertCounts convertJsonLines(const std::filesystem::path& inDir,
                               const std::filesystem::path& outDir) {
    const auto trainIn = inDir / "train.json";
    const auto validIn = inDir / "valid.json";
    const auto testIn = inDir / "test.json";
    if (!std::filesystem::exists(trainIn) || !std::filesystem::exists(testIn)) {
        throw IoError("dump directory " + inDir.string() + " must contain train.json and test.json");
    }
    std::filesystem::create_directories(outDir);

    StringPools pools;
    ConvertCounts counts;
    counts.train = convertFile(trainIn, outDir / "train.txt", pools);
    if (std::filesystem::exists(validIn)) {
        counts.valid = convertFile(validIn, outDir / "valid.txt", pools);
    }
    counts.test = convertFile(testIn, outDir / "test.txt", pools);
    counts.facts = counts.train + counts.valid + counts.test;
    counts.entities = pools.entities.size();
    counts.relations = pools.relations.size();
    return counts;
}

void checkProfile(const ConvertCounts& counts, const ExpectProfile& profile) {
    auto mismatch = [&](const char* what, std::size_t got, std::size_t want) {
        throw ConvertError("profile " + profile.name + ": " + what + " count " +
                           std::to_string(got) + " does not match expected " +
                           std::to_string(want));
    };
    if (counts.facts != profile.facts) mismatch("fact", counts.facts, profile.facts);
    if (counts.entities != profile.entities) mismatch("entity", counts.entities, profile.entities);
    if (counts.relations != profile.relations) {
        mismatch("relation", counts.relations, profile.relations);
    }
    if (counts.train != profile.train) mismatch("train", counts.train, profile.train);
    if (counts.valid != profile.valid) mismatch("valid", counts.valid, profile.valid);
    if (counts.test != profile.test) mismatch("test", counts.test, profile.test);
}

}  // namespace shrinke
