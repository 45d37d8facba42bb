#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shrinke/model.hpp"
#include "shrinke/rng.hpp"

namespace shrinke {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 128;
    int epochs = 0;
    int n_neg = 64;
    double smoothing = 0.1;  // label smoothing: targets 1-eps / eps
    std::uint64_t seed = 1;
    bool deterministic = true;  // single execution lane, fixed accumulation order
    int threads = 0;            // 0 = auto; capped by SHRINKE_THREADS; 1 when deterministic
    Ablation ablation;

    void validate() const;
};

/// Gradients mirror the parameter tensors exactly.
using GradientBuffer = Parameters;

GradientBuffer zeroLike(const Parameters& params);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Parameters m, v;
    std::int64_t step = 0;

    static AdamState forParams(const Parameters& params);
};

/// One positive fact per group plus its tail corruptions; negatives share the
/// positive's (head, relation, qualifiers) and differ only in the tail.
struct TrainingBatch {
    std::vector<Fact> positives;
    std::vector<std::int32_t> negative_tails;  // positives.size() * n_neg, group-major
    int n_neg = 0;
};

/// Appends the reciprocal fact (t, r^-1, h) with the qualifier set kept
/// verbatim, for every input fact. Output order: originals, then reciprocals.
std::vector<Fact> augmentReciprocal(std::span<const Fact> facts, const Vocab& vocab);

/// n uniform corrupted tails, each != the true tail (resampled on collision).
/// False negatives are not filtered.
std::vector<std::int32_t> sampleNegativeTails(const Fact& fact, int n, std::int32_t numEntities,
                                              Rng& rng);

/// Smoothed binary cross-entropy of one positive group given plausibilities:
/// -[(1-eps) log p+ + eps log(1-p+)] - sum_j [eps log p-_j + (1-eps) log(1-p-_j)],
/// log arguments clamped at 1e-12.
double smoothedBce(double pPositive, std::span<const double> pNegatives, double smoothing);

/// Mean over groups of smoothedBce on model plausibilities.
double batchLoss(const Model& model, const TrainingBatch& batch, double smoothing);

/// Exact reverse-mode gradients of batchLoss with respect to every trainable
/// tensor; returns the loss. Subgradient convention: d|x|/dx = 0 at x = 0.
double computeGradients(const Model& model, const TrainingBatch& batch, double smoothing,
                        GradientBuffer& grads, int threads = 1);

/// Standard bias-corrected Adam update; increments the step counter once.
void adamStep(Parameters& params, const GradientBuffer& grads, AdamState& state, double lr,
              const AdamConfig& adam = {});

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;

    /// epoch<TAB>mean_loss<TAB>seconds
    std::string line() const;
};

struct TrainResult {
    std::vector<EpochRecord> log;
};

using ProgressSink = std::function<void(const EpochRecord&)>;
using EpochHook = std::function<void(int epoch)>;

/// Runs Adam over shuffled mini-batches of the (already reciprocal-augmented)
/// fact list. In deterministic mode everything runs on one lane and the final
/// parameters are byte-identical across runs for a fixed seed.
TrainResult train(Model& model, const std::vector<Fact>& facts, const TrainConfig& config,
                  const ProgressSink& sink = {}, const EpochHook& afterEpoch = {});

/// Thread count after applying the deterministic contract and the
/// SHRINKE_THREADS environment cap.
int resolveThreads(int requested, bool deterministic);

}  // namespace shrinke
