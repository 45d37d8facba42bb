#include "shrinke/run_config.hpp"

#include <fstream>
#include <set>

#include "shrinke/rng.hpp"

namespace shrinke {

ModelConfig RunConfig::modelConfig() const {
    ModelConfig m;
    m.dim = dim;
    m.temperature = temperature;
    m.seed = splitmix64(seed ^ 0x6d6f64656cULL);  // model stream
    m.init_scale = init_scale;
    m.shrink_bias_init = shrink_bias_init;
    return m;
}

TrainConfig RunConfig::trainConfig() const {
    TrainConfig t;
    t.learning_rate = learning_rate;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.n_neg = n_neg;
    t.smoothing = smoothing;
    t.seed = splitmix64(seed ^ 0x747261696eULL);  // train stream
    t.deterministic = deterministic;
    t.threads = threads;
    t.ablation = ablation();
    return t;
}

nlohmann::ordered_json RunConfig::toJson() const {
    nlohmann::ordered_json j;
    j["dim"] = dim;
    j["temperature"] = temperature;
    j["seed"] = seed;
    j["init_scale"] = init_scale;
    j["shrink_bias_init"] = shrink_bias_init;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["n_neg"] = n_neg;
    j["smoothing"] = smoothing;
    j["deterministic"] = deterministic;
    j["threads"] = threads;
    j["eval_every"] = eval_every;
    j["no_rotation"] = no_rotation;
    j["no_translation"] = no_translation;
    j["no_shrinking"] = no_shrinking;
    j["valid_fraction"] = valid_fraction;
    j["filter_include_test"] = filter_include_test;
    j["data_dir"] = data_dir;
    j["out_dir"] = out_dir;
    return j;
}

RunConfig RunConfig::fromJson(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "dim",           "temperature",   "seed",        "init_scale", "shrink_bias_init",
        "learning_rate", "batch_size",    "epochs",      "n_neg",      "smoothing",
        "deterministic", "threads",       "eval_every",  "no_rotation", "no_translation",
        "no_shrinking",  "valid_fraction", "filter_include_test", "data_dir", "out_dir",
    };
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
    }

    RunConfig c;
    try {
        c.dim = j.value("dim", c.dim);
        c.temperature = j.value("temperature", c.temperature);
        c.seed = j.value("seed", c.seed);
        c.init_scale = j.value("init_scale", c.init_scale);
        c.shrink_bias_init = j.value("shrink_bias_init", c.shrink_bias_init);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.n_neg = j.value("n_neg", c.n_neg);
        c.smoothing = j.value("smoothing", c.smoothing);
        c.deterministic = j.value("deterministic", c.deterministic);
        c.threads = j.value("threads", c.threads);
        c.eval_every = j.value("eval_every", c.eval_every);
        c.no_rotation = j.value("no_rotation", c.no_rotation);
        c.no_translation = j.value("no_translation", c.no_translation);
        c.no_shrinking = j.value("no_shrinking", c.no_shrinking);
        c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
        c.filter_include_test = j.value("filter_include_test", c.filter_include_test);
        c.data_dir = j.value("data_dir", c.data_dir);
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::fromJsonFile(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read config file " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + file.string() + ": " + e.what());
    }
    return fromJson(j);
}

}  // namespace shrinke
