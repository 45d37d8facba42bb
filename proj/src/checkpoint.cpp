#include "shrinke/checkpoint.hpp"

#include <bit>
#include <fstream>

namespace shrinke {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

std::string hexHash(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t parseHexHash(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

nlohmann::ordered_json metaToJson(const CheckpointMeta& meta) {
    nlohmann::ordered_json j;
    j["format_version"] = meta.format_version;
    j["config"] = meta.config.toJson();
    j["num_entities"] = meta.num_entities;
    j["num_relations_base"] = meta.num_relations_base;
    j["vocab_hash"] = hexHash(meta.vocab_hash);
    j["epoch"] = meta.epoch;
    if (meta.validation_mrr) {
        j["validation_mrr"] = *meta.validation_mrr;
    } else {
        j["validation_mrr"] = nullptr;
    }
    j["filter_mode"] = meta.filter_mode;
    j["data_source_dir"] = meta.data_source_dir;
    auto& files = j["data_file_hashes"] = nlohmann::ordered_json::object();
    for (const auto& [name, hash] : meta.data_file_hashes) files[name] = hexHash(hash);
    j["carved_validation"] = meta.carved_validation;
    return j;
}

CheckpointMeta metaFromJson(const nlohmann::json& j) {
    CheckpointMeta meta;
    meta.format_version = j.at("format_version").get<int>();
    if (meta.format_version != kCheckpointFormatVersion) {
        throw IoError("unsupported checkpoint format version " +
                      std::to_string(meta.format_version) + " (expected " +
                      std::to_string(kCheckpointFormatVersion) + ")");
    }
    meta.config = RunConfig::fromJson(j.at("config"));
    meta.num_entities = j.at("num_entities").get<std::int32_t>();
    meta.num_relations_base = j.at("num_relations_base").get<std::int32_t>();
    meta.vocab_hash = parseHexHash(j.at("vocab_hash").get<std::string>());
    meta.epoch = j.at("epoch").get<int>();
    if (!j.at("validation_mrr").is_null()) {
        meta.validation_mrr = j.at("validation_mrr").get<double>();
    }
    meta.filter_mode = j.at("filter_mode").get<std::string>();
    meta.data_source_dir = j.value("data_source_dir", std::string());
    if (j.contains("data_file_hashes")) {
        for (const auto& [name, hash] : j.at("data_file_hashes").items()) {
            meta.data_file_hashes.emplace_back(name, parseHexHash(hash.get<std::string>()));
        }
    }
    meta.carved_validation = j.value("carved_validation", false);
    return meta;
}

}  // namespace

void saveCheckpoint(const std::filesystem::path& dir, const Model& model,
                    const CheckpointMeta& meta) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "manifest.json");
        if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
        out << metaToJson(meta).dump(2) << '\n';
    }

    const auto tensors = model.params().tensors();
    nlohmann::ordered_json header;
    header["format"] = "shrinke-params";
    header["version"] = kCheckpointFormatVersion;
    header["byte_order"] = "little";
    header["dtype"] = "f32";
    auto& list = header["tensors"] = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        nlohmann::ordered_json t;
        t["name"] = name;
        t["rows"] = tensor->rows();
        t["cols"] = tensor->cols();
        t["offset"] = offset;
        list.push_back(std::move(t));
        offset += static_cast<std::uint64_t>(tensor->size()) * sizeof(float);
    }

    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
    out << header.dump() << '\n';

    std::vector<float> row;
    for (const auto& [name, tensor] : tensors) {
        row.resize(static_cast<std::size_t>(tensor->cols()));
        for (Index r = 0; r < tensor->rows(); ++r) {
            for (Index c = 0; c < tensor->cols(); ++c) {
                row[static_cast<std::size_t>(c)] = static_cast<float>((*tensor)(r, c));
            }
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
    }
    if (!out) throw IoError("failed writing " + (dir / "params.bin").string());
}

LoadedCheckpoint loadCheckpoint(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    {
        std::ifstream in(dir / "manifest.json");
        if (!in) throw IoError("cannot read " + (dir / "manifest.json").string());
        try {
            in >> manifest;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("invalid manifest.json: " + std::string(e.what()));
        }
    }
    CheckpointMeta meta = metaFromJson(manifest);

    Model model(meta.config.modelConfig(), meta.num_entities, 2 * meta.num_relations_base);
    model.setAblation(meta.config.ablation());

    std::ifstream in(dir / "params.bin", std::ios::binary);
    if (!in) throw IoError("cannot read " + (dir / "params.bin").string());
    std::string headerLine;
    if (!std::getline(in, headerLine)) throw IoError("params.bin: missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(headerLine);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("params.bin: invalid header: " + std::string(e.what()));
    }
    if (header.value("format", "") != "shrinke-params") {
        throw IoError("params.bin: not a shrinke parameter file");
    }
    if (header.value("version", -1) != kCheckpointFormatVersion) {
        throw IoError("params.bin: unsupported version");
    }
    if (header.value("byte_order", "") != "little" || header.value("dtype", "") != "f32") {
        throw IoError("params.bin: unsupported encoding");
    }

    const std::streampos dataStart = in.tellg();
    auto tensors = model.params().tensors();
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const Index rows = entry.at("rows").get<Index>();
        const Index cols = entry.at("cols").get<Index>();
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();

        Mat* target = nullptr;
        for (auto& [tname, tensor] : tensors) {
            if (tname == name) {
                target = tensor;
                break;
            }
        }
        if (target == nullptr) throw IoError("params.bin: unknown tensor " + name);
        if (target->rows() != rows || target->cols() != cols) {
            throw IoError("params.bin: tensor " + name + " has shape " + std::to_string(rows) +
                          "x" + std::to_string(cols) + ", expected " +
                          std::to_string(target->rows()) + "x" + std::to_string(target->cols()));
        }

        in.seekg(dataStart + static_cast<std::streamoff>(offset));
        std::vector<float> row(static_cast<std::size_t>(cols));
        for (Index r = 0; r < rows; ++r) {
            in.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(row.size() * sizeof(float)));
            if (!in) throw IoError("params.bin: truncated tensor " + name);
            for (Index c = 0; c < cols; ++c) {
                (*target)(r, c) = static_cast<double>(row[static_cast<std::size_t>(c)]);
            }
        }
    }
    return LoadedCheckpoint{std::move(model), std::move(meta)};
}

}  // namespace shrinke
