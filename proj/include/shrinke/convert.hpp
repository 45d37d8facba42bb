#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

namespace shrinke {

struct ConvertCounts {
    std::size_t facts = 0;
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
    std::size_t entities = 0;
    std::size_t relations = 0;

    std::string json() const;
};

/// Expected statistics of a published benchmark release.
struct ExpectProfile {
    std::string name;
    std::size_t facts = 0;
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
};

std::optional<ExpectProfile> findProfile(const std::string& name);

/// Converts a JSON-lines benchmark dump (train.json/test.json required,
/// valid.json optional) into train.txt/valid.txt/test.txt under outDir.
/// Accepted records per line:
///   ["h","r","t","k1","v1",...]                       (odd length >= 3)
///   {"triple":["h","r","t"],"qualifiers":[["k","v"],...]}
/// Schema violations raise ConvertError naming the offending record index.
ConvertCounts convertJsonLines(const std::filesystem::path& inDir,
                               const std::filesystem::path& outDir);

/// Raises ConvertError when counts do not match the profile exactly.
void checkProfile(const ConvertCounts& counts, const ExpectProfile& profile);

}  // namespace shrinke
