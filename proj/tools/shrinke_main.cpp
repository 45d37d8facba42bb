#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "shrinke/checkpoint.hpp"
#include "shrinke/convert.hpp"
#include "shrinke/data.hpp"
#include "shrinke/eval.hpp"
#include "shrinke/model.hpp"
#include "shrinke/patterns.hpp"
#include "shrinke/run_config.hpp"
#include "shrinke/training.hpp"

namespace {

using namespace shrinke;

// Exit codes: 0 ok, 1 audit failure or unexpected error, 2 config/data error,
// 3 vocab mismatch, 4 conversion error.
int runGuarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const VocabMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ConvertError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

struct TrainCli {
    std::string config_file;
    std::string data_dir;
    std::string out_dir;
    RunConfig overrides;
    CLI::App* cmd = nullptr;

    // Track which flags were actually given so the config file keeps its values.
    void apply(RunConfig& cfg) const {
        auto given = [this](const std::string& flag) { return cmd->count(flag) > 0; };
        if (given("--dim")) cfg.dim = overrides.dim;
        if (given("--temperature")) cfg.temperature = overrides.temperature;
        if (given("--seed")) cfg.seed = overrides.seed;
        if (given("--init-scale")) cfg.init_scale = overrides.init_scale;
        if (given("--shrink-bias-init")) cfg.shrink_bias_init = overrides.shrink_bias_init;
        if (given("--lr")) cfg.learning_rate = overrides.learning_rate;
        if (given("--batch-size")) cfg.batch_size = overrides.batch_size;
        if (given("--epochs")) cfg.epochs = overrides.epochs;
        if (given("--n-neg")) cfg.n_neg = overrides.n_neg;
        if (given("--smoothing")) cfg.smoothing = overrides.smoothing;
        if (given("--deterministic")) cfg.deterministic = true;
        if (given("--threads")) cfg.threads = overrides.threads;
        if (given("--eval-every")) cfg.eval_every = overrides.eval_every;
        if (given("--no-rotation")) cfg.no_rotation = true;
        if (given("--no-translation")) cfg.no_translation = true;
        if (given("--no-shrinking")) cfg.no_shrinking = true;
        if (given("--valid-fraction")) cfg.valid_fraction = overrides.valid_fraction;
        if (given("--filter-include-test")) cfg.filter_include_test = true;
    }
};

CheckpointMeta makeMeta(const RunConfig& cfg, const Dataset& data, const Vocab& vocab,
                        bool carved, int epoch, std::optional<double> validationMrr) {
    CheckpointMeta meta;
    meta.config = cfg;
    meta.num_entities = vocab.numEntities();
    meta.num_relations_base = vocab.numBaseRelations();
    meta.vocab_hash = vocab.hash();
    meta.epoch = epoch;
    meta.validation_mrr = validationMrr;
    meta.filter_mode = cfg.filterMode();
    meta.data_source_dir = data.source_dir;
    meta.data_file_hashes = data.file_hashes;
    meta.carved_validation = carved;
    return meta;
}

int cmdTrain(const TrainCli& cli) {
    RunConfig cfg = cli.config_file.empty() ? RunConfig() : RunConfig::fromJsonFile(cli.config_file);
    cli.apply(cfg);
    if (!cli.data_dir.empty()) cfg.data_dir = cli.data_dir;
    if (!cli.out_dir.empty()) cfg.out_dir = cli.out_dir;
    if (cfg.data_dir.empty()) throw ConfigError("no data directory given (--data)");
    if (cfg.out_dir.empty()) throw ConfigError("no output directory given (--out)");

    auto [data, vocab] = loadDataset(cfg.data_dir);
    bool carved = false;
    if (data.valid.empty() && cfg.valid_fraction > 0.0) {
        auto [newTrain, newValid] = carveValidation(data.train, cfg.valid_fraction, cfg.seed);
        data.train = std::move(newTrain);
        data.valid = std::move(newValid);
        carved = true;
        std::cout << "carved validation split: " << data.valid.size() << " facts (fraction "
                  << cfg.valid_fraction << ", seed " << cfg.seed << ")\n";
    }

    Model model(cfg.modelConfig(), vocab.numEntities(), vocab.numRelationsWithReciprocals());
    model.initialize();
    model.setAblation(cfg.ablation());

    const std::vector<Fact> augTrain = augmentReciprocal(data.train, vocab);
    FilterIndex validFilter;
    validFilter.addSplit(data.train, vocab);
    validFilter.addSplit(data.valid, vocab);
    const std::vector<Fact> augValid = augmentReciprocal(data.valid, vocab);

    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    std::ofstream epochLog(out / "epochs.tsv");
    if (!epochLog) throw IoError("cannot write " + (out / "epochs.tsv").string());

    std::optional<double> bestMrr;
    std::optional<double> lastMrr;
    const auto validate = [&](int epoch) {
        if (cfg.eval_every <= 0 || augValid.empty()) return;
        if (epoch % cfg.eval_every != 0 && epoch != cfg.epochs) return;
        const Metrics m = evaluate(model, augValid, validFilter, cfg.threads);
        lastMrr = m.mrr;
        std::cout << "valid\t" << epoch << '\t' << m.json() << std::endl;
        if (!bestMrr || m.mrr > *bestMrr) {
            bestMrr = m.mrr;
            saveCheckpoint(out / "best", model, makeMeta(cfg, data, vocab, carved, epoch, m.mrr));
        }
    };

    train(
        model, augTrain, cfg.trainConfig(),
        [&](const EpochRecord& r) {
            epochLog << r.line() << '\n';
            epochLog.flush();
            std::cout << r.line() << std::endl;
        },
        validate);

    saveCheckpoint(out, model, makeMeta(cfg, data, vocab, carved, cfg.epochs, lastMrr));
    vocab.writeTsv(out / "vocab.tsv");
    std::cout << "checkpoint written to " << out.string() << std::endl;
    return 0;
}

struct EvalCli {
    std::string checkpoint;
    std::string data_dir;
    std::string split = "test";
    std::string filter_mode;  // "paper" or "full"; empty = from checkpoint config
    std::string out_file;
    int threads = 0;
};

/// Loads checkpoint + dataset and re-carves validation if the run carved one.
std::pair<LoadedCheckpoint, std::pair<Dataset, Vocab>> loadForInference(
    const std::string& checkpoint, const std::string& dataDir) {
    LoadedCheckpoint loaded = loadCheckpoint(checkpoint);
    auto dataAndVocab = loadDataset(dataDir);
    auto& [data, vocab] = dataAndVocab;
    if (vocab.hash() != loaded.meta.vocab_hash) {
        throw VocabMismatchError("vocabulary of " + dataDir +
                                 " does not match the checkpoint's vocabulary");
    }
    if (data.valid.empty() && loaded.meta.carved_validation) {
        auto [newTrain, newValid] =
            carveValidation(data.train, loaded.meta.config.valid_fraction, loaded.meta.config.seed);
        data.train = std::move(newTrain);
        data.valid = std::move(newValid);
    }
    return {std::move(loaded), std::move(dataAndVocab)};
}

int cmdEval(const EvalCli& cli) {
    auto [loaded, dataAndVocab] = loadForInference(cli.checkpoint, cli.data_dir);
    auto& [data, vocab] = dataAndVocab;

    const std::vector<Fact>* split = nullptr;
    if (cli.split == "valid") {
        split = &data.valid;
    } else if (cli.split == "test") {
        split = &data.test;
    } else {
        throw ConfigError("split must be valid or test, got " + cli.split);
    }
    if (split->empty()) throw UsageError("split " + cli.split + " is empty");

    bool includeTest = loaded.meta.config.filter_include_test;
    if (cli.filter_mode == "paper") includeTest = false;
    if (cli.filter_mode == "full") includeTest = true;
    const std::string filterMode = includeTest ? "train+valid+test" : "train+valid";

    FilterIndex filter;
    filter.addSplit(data.train, vocab);
    filter.addSplit(data.valid, vocab);
    if (includeTest) filter.addSplit(data.test, vocab);

    const std::vector<Fact> augmented = augmentReciprocal(*split, vocab);
    const Metrics metrics = evaluate(loaded.model, augmented, filter, cli.threads);

    nlohmann::ordered_json info;
    info["split"] = cli.split;
    info["filter_mode"] = filterMode;
    info["checkpoint"] = cli.checkpoint;
    std::cout << info.dump() << '\n';
    std::cout << metrics.json() << '\n';
    std::cout << Metrics::tsvHeader() << '\n' << metrics.tsvRow() << std::endl;

    if (!cli.out_file.empty()) {
        nlohmann::ordered_json report = info;
        report["metrics"] = nlohmann::ordered_json::parse(metrics.json());
        std::ofstream outFile(cli.out_file);
        if (!outFile) throw IoError("cannot write " + cli.out_file);
        outFile << report.dump(2) << '\n';
    }
    return 0;
}

struct AuditCli {
    std::string checkpoint;
    std::string data_dir;
    int samples = 1000;
    int subsets = 5;
    std::uint64_t seed = 1;
    double angle_tol = 0.05;
    double vec_tol = 0.0;  // 0 = default 1e-2 * sqrt(d)
    bool swap_corners = false;
};

int cmdAudit(const AuditCli& cli) {
    auto [loaded, dataAndVocab] = loadForInference(cli.checkpoint, cli.data_dir);
    auto& [data, vocab] = dataAndVocab;
    (void)vocab;

    std::vector<Fact> withQualifiers;
    for (const Fact& f : data.train) {
        if (!f.qualifiers.empty()) withQualifiers.push_back(f);
    }
    Rng rng(splitmix64(cli.seed));
    rng.shuffle(withQualifiers);
    if (withQualifiers.size() > static_cast<std::size_t>(cli.samples)) {
        withQualifiers.resize(static_cast<std::size_t>(cli.samples));
    }

    AuditOptions options;
    options.subsets_per_fact = cli.subsets;
    options.swap_corners = cli.swap_corners;
    const MonotonicityReport report =
        auditMonotonicity(loaded.model, withQualifiers, options, rng);

    const double vecTol =
        cli.vec_tol > 0.0 ? cli.vec_tol
                          : 1e-2 * std::sqrt(static_cast<double>(loaded.model.dim()));
    const auto nR = static_cast<double>(loaded.model.numRelations());
    const bool exhaustiveOk = nR * nR * nR <= 1e6;
    const RelationPatternReport patterns =
        classifyRelationPatterns(loaded.model, cli.angle_tol, vecTol, {}, exhaustiveOk);

    std::cout << report.json() << '\n';
    std::cout << patterns.json() << std::endl;
    return report.containment_violations > 0 ? 1 : 0;
}

struct ConvertCli {
    std::string in_dir;
    std::string out_dir;
    std::string expect;
};

int cmdConvert(const ConvertCli& cli) {
    const ConvertCounts counts = convertJsonLines(cli.in_dir, cli.out_dir);
    std::cout << counts.json() << std::endl;
    if (!cli.expect.empty()) {
        const auto profile = findProfile(cli.expect);
        if (!profile) throw ConfigError("unknown --expect profile: " + cli.expect);
        checkProfile(counts, *profile);
        std::cout << "profile " << profile->name << ": counts match" << std::endl;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ShrinkE: hyper-relational knowledge-graph embeddings with box shrinking"};
    app.require_subcommand(1);

    TrainCli trainCli;
    auto* trainCmd = app.add_subcommand("train", "Train a model and write checkpoints");
    trainCli.cmd = trainCmd;
    trainCmd->add_option("--config", trainCli.config_file, "JSON run configuration");
    trainCmd->add_option("--data", trainCli.data_dir, "dataset directory (train.txt/test.txt)");
    trainCmd->add_option("--out", trainCli.out_dir, "output directory");
    trainCmd->add_option("--dim", trainCli.overrides.dim);
    trainCmd->add_option("--temperature", trainCli.overrides.temperature);
    trainCmd->add_option("--seed", trainCli.overrides.seed);
    trainCmd->add_option("--init-scale", trainCli.overrides.init_scale);
    trainCmd->add_option("--shrink-bias-init", trainCli.overrides.shrink_bias_init);
    trainCmd->add_option("--lr", trainCli.overrides.learning_rate);
    trainCmd->add_option("--batch-size", trainCli.overrides.batch_size);
    trainCmd->add_option("--epochs", trainCli.overrides.epochs);
    trainCmd->add_option("--n-neg", trainCli.overrides.n_neg);
    trainCmd->add_option("--smoothing", trainCli.overrides.smoothing);
    trainCmd->add_flag("--deterministic", trainCli.overrides.deterministic,
                       "single-lane training; byte-identical reruns");
    trainCmd->add_option("--threads", trainCli.overrides.threads);
    trainCmd->add_option("--eval-every", trainCli.overrides.eval_every,
                         "validate every k epochs and retain the best checkpoint");
    trainCmd->add_flag("--no-rotation", trainCli.overrides.no_rotation);
    trainCmd->add_flag("--no-translation", trainCli.overrides.no_translation);
    trainCmd->add_flag("--no-shrinking", trainCli.overrides.no_shrinking);
    trainCmd->add_option("--valid-fraction", trainCli.overrides.valid_fraction);
    trainCmd->add_flag("--filter-include-test", trainCli.overrides.filter_include_test);

    EvalCli evalCli;
    auto* evalCmd = app.add_subcommand("eval", "Filtered ranking evaluation of a checkpoint");
    evalCmd->add_option("--checkpoint", evalCli.checkpoint)->required();
    evalCmd->add_option("--data", evalCli.data_dir)->required();
    evalCmd->add_option("--split", evalCli.split, "valid or test");
    evalCmd->add_option("--filter-mode", evalCli.filter_mode,
                        "paper (train+valid) or full (train+valid+test)");
    evalCmd->add_option("--out", evalCli.out_file, "also write a JSON report here");
    evalCmd->add_option("--threads", evalCli.threads);

    AuditCli auditCli;
    auto* auditCmd = app.add_subcommand("audit", "Monotonicity and inference-pattern audits");
    auditCmd->add_option("--checkpoint", auditCli.checkpoint)->required();
    auditCmd->add_option("--data", auditCli.data_dir)->required();
    auditCmd->add_option("--samples", auditCli.samples);
    auditCmd->add_option("--subsets", auditCli.subsets, "subset pairs per fact");
    auditCmd->add_option("--seed", auditCli.seed);
    auditCmd->add_option("--angle-tol", auditCli.angle_tol);
    auditCmd->add_option("--vec-tol", auditCli.vec_tol);
    auditCmd->add_flag("--swap-corners", auditCli.swap_corners)->group("");  // test hook, hidden

    ConvertCli convertCli;
    auto* convertCmd = app.add_subcommand("convert", "Convert a JSON-lines dump to the text format");
    convertCmd->add_option("--in", convertCli.in_dir)->required();
    convertCmd->add_option("--out", convertCli.out_dir)->required();
    convertCmd->add_option("--expect", convertCli.expect,
                           "verify counts against a published profile (e.g. jf17k, wd50k100)");

    CLI11_PARSE(app, argc, argv);

    if (trainCmd->parsed()) return runGuarded([&] { return cmdTrain(trainCli); });
    if (evalCmd->parsed()) return runGuarded([&] { return cmdEval(evalCli); });
    if (auditCmd->parsed()) return runGuarded([&] { return cmdAudit(auditCli); });
    if (convertCmd->parsed()) return runGuarded([&] { return cmdConvert(convertCli); });
    return 1;
}
