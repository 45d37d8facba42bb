#include "shrinke/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace shrinke {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (n_neg < 1) throw ConfigError("n_neg must be >= 1");
    if (!(smoothing >= 0.0 && smoothing < 0.5)) {
        throw ConfigError("smoothing must be in [0, 0.5), got " + std::to_string(smoothing));
    }
}

GradientBuffer zeroLike(const Parameters& params) {
    GradientBuffer g;
    g.entity_points = Mat::Zero(params.entity_points.rows(), params.entity_points.cols());
    g.rel_angles = Mat::Zero(params.rel_angles.rows(), params.rel_angles.cols());
    g.rel_translation = Mat::Zero(params.rel_translation.rows(), params.rel_translation.cols());
    g.rel_offset = Mat::Zero(params.rel_offset.rows(), params.rel_offset.cols());
    g.rel_context = Mat::Zero(params.rel_context.rows(), params.rel_context.cols());
    g.shrink_weight = Mat::Zero(params.shrink_weight.rows(), params.shrink_weight.cols());
    g.shrink_bias = Mat::Zero(params.shrink_bias.rows(), params.shrink_bias.cols());
    return g;
}

AdamState AdamState::forParams(const Parameters& params) {
    AdamState s;
    s.m = zeroLike(params);
    s.v = zeroLike(params);
    return s;
}

std::vector<Fact> augmentReciprocal(std::span<const Fact> facts, const Vocab& vocab) {
    std::vector<Fact> out;
    out.reserve(facts.size() * 2);
    out.assign(facts.begin(), facts.end());
    for (const Fact& f : facts) {
        Fact r;
        r.head = f.tail;
        r.relation = vocab.reciprocal(f.relation);
        r.tail = f.head;
        r.qualifiers = f.qualifiers;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::int32_t> sampleNegativeTails(const Fact& fact, int n, std::int32_t numEntities,
                                              Rng& rng) {
    if (numEntities < 2) {
        throw UsageError("cannot sample corrupted tails from an entity vocabulary of size " +
                         std::to_string(numEntities));
    }
    std::vector<std::int32_t> tails(static_cast<std::size_t>(n));
    for (auto& t : tails) {
        do {
            t = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(numEntities)));
        } while (t == fact.tail);
    }
    return tails;
}

namespace {

constexpr double kLogClamp = 1e-12;

double clampedLog(double x) { return std::log(std::max(x, kLogClamp)); }

double bceTerm(double p, double target) {
    return -(target * clampedLog(p) + (1.0 - target) * clampedLog(1.0 - p));
}

/// d bceTerm / d distance, with p = sigmoid(-distance). Terms whose log is
/// clamped are locally constant and contribute no gradient.
double bceTermGradWrtDistance(double p, double target) {
    double dldp = 0.0;
    if (p > kLogClamp) dldp += -target / p;
    if (1.0 - p > kLogClamp) dldp += (1.0 - target) / (1.0 - p);
    return dldp * (-p * (1.0 - p));
}

double signOrZero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// All forward intermediates needed to run one positive group's backward pass.
struct QualTrace {
    std::int32_t key = 0, value = 0;
    Vec sig_s, sig_S;
};

struct GroupTrace {
    std::int32_t head = 0, relation = 0;
    Vec rotated;     // rotation applied to the head point (before translation)
    Vec center;      // transformed head
    Vec halfwidth;   // softplus(offset)
    Vec qmin, qmax;  // query box corners
    Vec qside;       // qmax - qmin
    std::vector<QualTrace> quals;
    Vec fmin, fmax;  // fact box corners
    std::vector<std::int32_t> min_owner, max_owner;  // qualifier owning each corner coordinate
};

void forwardGroup(const Model& model, const Fact& fact, GroupTrace& t) {
    const Parameters& P = model.params();
    const Ablation& abl = model.ablation();
    const Index d = model.dim();
    const double temperature = model.config().temperature;

    t.head = fact.head;
    t.relation = fact.relation;
    model.checkEntity(fact.head);
    model.checkEntity(fact.tail);
    model.checkRelation(fact.relation);

    if (abl.no_rotation) {
        t.rotated = P.entity_points.row(fact.head).transpose();
    } else {
        t.rotated = rotateBlocks(P.entity_points.row(fact.head).transpose(),
                                 P.rel_angles.row(fact.relation).transpose());
    }
    t.center = abl.no_translation
                   ? t.rotated
                   : Vec(t.rotated + P.rel_translation.row(fact.relation).transpose());

    t.halfwidth.resize(d);
    for (Index i = 0; i < d; ++i) {
        t.halfwidth[i] = softplus(P.rel_offset(fact.relation, i), temperature);
    }
    t.qmin = t.center - t.halfwidth;
    t.qmax = t.center + t.halfwidth;
    t.qside = t.qmax - t.qmin;

    t.quals.clear();
    if (fact.qualifiers.empty() || abl.no_shrinking) {
        t.fmin = t.qmin;
        t.fmax = t.qmax;
        t.min_owner.assign(static_cast<std::size_t>(d), -1);
        t.max_owner.assign(static_cast<std::size_t>(d), -1);
        return;
    }

    t.fmin.resize(d);
    t.fmax.resize(d);
    t.min_owner.assign(static_cast<std::size_t>(d), 0);
    t.max_owner.assign(static_cast<std::size_t>(d), 0);
    for (std::size_t qi = 0; qi < fact.qualifiers.size(); ++qi) {
        const Qualifier& q = fact.qualifiers[qi];
        model.checkRelation(q.key);
        model.checkEntity(q.value);
        const auto [s, S] = model.shrinkVectors(fact.relation, q.key, q.value);
        QualTrace qt;
        qt.key = q.key;
        qt.value = q.value;
        qt.sig_s = s.unaryExpr([](double x) { return sigmoid(x); });
        qt.sig_S = S.unaryExpr([](double x) { return sigmoid(x); });
        for (Index i = 0; i < d; ++i) {
            const double lo = t.qmin[i] + qt.sig_s[i] * t.qside[i];
            const double hi = t.qmax[i] - qt.sig_S[i] * t.qside[i];
            if (qi == 0) {
                t.fmin[i] = lo;
                t.fmax[i] = hi;
            } else {
                if (lo > t.fmin[i]) {
                    t.fmin[i] = lo;
                    t.min_owner[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(qi);
                }
                if (hi < t.fmax[i]) {
                    t.fmax[i] = hi;
                    t.max_owner[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(qi);
                }
            }
        }
        t.quals.push_back(std::move(qt));
    }
}

double distanceFromTrace(const GroupTrace& t, const Parameters& P, std::int32_t tail) {
    double centerL1 = 0.0, side = 0.0, excess = 0.0;
    const Index d = t.fmin.size();
    for (Index i = 0; i < d; ++i) {
        const double e = P.entity_points(tail, i);
        const double m = t.fmin[i], M = t.fmax[i];
        centerL1 += std::abs(e - (m + M) / 2.0);
        if (m <= M) {
            side += M - m;
            excess += 2.0 * std::max({0.0, m - e, e - M});
        } else {
            excess += std::abs(e - m) + std::abs(e - M);
        }
    }
    return centerL1 / (side + kSideLengthGuard) + excess * excess;
}

/// Accumulates d(distance)/d(corners) into gmin/gmax and d(distance)/d(tail
/// point) into the tail row of the gradient buffer.
void distanceBackward(const GroupTrace& t, const Parameters& P, std::int32_t tail, double gD,
                      Vec& gmin, Vec& gmax, GradientBuffer& g) {
    const Index d = t.fmin.size();
    double centerL1 = 0.0, side = 0.0, excess = 0.0;
    for (Index i = 0; i < d; ++i) {
        const double e = P.entity_points(tail, i);
        const double m = t.fmin[i], M = t.fmax[i];
        centerL1 += std::abs(e - (m + M) / 2.0);
        if (m <= M) {
            side += M - m;
            excess += 2.0 * std::max({0.0, m - e, e - M});
        } else {
            excess += std::abs(e - m) + std::abs(e - M);
        }
    }
    const double denom = side + kSideLengthGuard;
    const double dDdA = gD / denom;                          // center-L1 path
    const double dDdSide = -gD * centerL1 / (denom * denom); // denominator path
    const double dDdX = gD * 2.0 * excess;                   // squared-excess path

    for (Index i = 0; i < d; ++i) {
        const double e = P.entity_points(tail, i);
        const double m = t.fmin[i], M = t.fmax[i];
        const double sA = signOrZero(e - (m + M) / 2.0);
        g.entity_points(tail, i) += dDdA * sA;
        double gm = dDdA * (-0.5 * sA);
        double gM = dDdA * (-0.5 * sA);
        if (m <= M) {
            if (M > m) {
                gM += dDdSide;
                gm -= dDdSide;
            }
            if (m - e > 0.0) {  // point below the interval
                gm += dDdX * 2.0;
                g.entity_points(tail, i) -= dDdX * 2.0;
            } else if (e - M > 0.0) {  // point above the interval
                gM -= dDdX * 2.0;
                g.entity_points(tail, i) += dDdX * 2.0;
            }
        } else {  // empty dimension: excess contributes |e-m| + |e-M|
            const double s1 = signOrZero(e - m);
            const double s2 = signOrZero(e - M);
            g.entity_points(tail, i) += dDdX * (s1 + s2);
            gm -= dDdX * s1;
            gM -= dDdX * s2;
        }
        gmin[i] += gm;
        gmax[i] += gM;
    }
}

/// Backward through intersection, shrinking, spanning, translation, rotation.
void boxBackward(const Model& model, const GroupTrace& t, const Vec& g_fmin, const Vec& g_fmax,
                 GradientBuffer& g) {
    const Parameters& P = model.params();
    const Ablation& abl = model.ablation();
    const Index d = model.dim();
    const double temperature = model.config().temperature;

    Vec g_qmin = Vec::Zero(d);
    Vec g_qmax = Vec::Zero(d);

    if (t.quals.empty()) {
        g_qmin = g_fmin;
        g_qmax = g_fmax;
    } else {
        std::vector<Vec> g_s(t.quals.size()), g_S(t.quals.size());
        for (std::size_t q = 0; q < t.quals.size(); ++q) {
            g_s[q] = Vec::Zero(d);
            g_S[q] = Vec::Zero(d);
        }
        for (Index i = 0; i < d; ++i) {
            const std::size_t own_lo = static_cast<std::size_t>(t.min_owner[static_cast<std::size_t>(i)]);
            const std::size_t own_hi = static_cast<std::size_t>(t.max_owner[static_cast<std::size_t>(i)]);
            const QualTrace& qlo = t.quals[own_lo];
            const QualTrace& qhi = t.quals[own_hi];
            // fmin_i = qmin_i + sig_s * (qmax_i - qmin_i)
            g_qmin[i] += g_fmin[i] * (1.0 - qlo.sig_s[i]);
            g_qmax[i] += g_fmin[i] * qlo.sig_s[i];
            g_s[own_lo][i] += g_fmin[i] * qlo.sig_s[i] * (1.0 - qlo.sig_s[i]) * t.qside[i];
            // fmax_i = qmax_i - sig_S * (qmax_i - qmin_i)
            g_qmax[i] += g_fmax[i] * (1.0 - qhi.sig_S[i]);
            g_qmin[i] += g_fmax[i] * qhi.sig_S[i];
            g_S[own_hi][i] -= g_fmax[i] * qhi.sig_S[i] * (1.0 - qhi.sig_S[i]) * t.qside[i];
        }
        // shrink-net backward per qualifier
        Vec gout(2 * d), input(3 * d), ginput(3 * d);
        for (std::size_t q = 0; q < t.quals.size(); ++q) {
            gout.segment(0, d) = g_s[q];
            gout.segment(d, d) = g_S[q];
            input.segment(0, d) = P.rel_context.row(t.relation).transpose();
            input.segment(d, d) = P.rel_context.row(t.quals[q].key).transpose();
            input.segment(2 * d, d) = P.entity_points.row(t.quals[q].value).transpose();
            g.shrink_bias.col(0) += gout;
            g.shrink_weight.noalias() += gout * input.transpose();
            ginput.noalias() = P.shrink_weight.transpose() * gout;
            g.rel_context.row(t.relation) += ginput.segment(0, d).transpose();
            g.rel_context.row(t.quals[q].key) += ginput.segment(d, d).transpose();
            g.entity_points.row(t.quals[q].value) += ginput.segment(2 * d, d).transpose();
        }
    }

    // query box: qmin = center - halfwidth, qmax = center + halfwidth
    const Vec g_center = g_qmin + g_qmax;
    for (Index i = 0; i < d; ++i) {
        g.rel_offset(t.relation, i) += (g_qmax[i] - g_qmin[i]) *
                                       softplusGrad(P.rel_offset(t.relation, i), temperature);
    }
    if (!abl.no_translation) {
        g.rel_translation.row(t.relation) += g_center.transpose();
    }
    if (abl.no_rotation) {
        g.entity_points.row(t.head) += g_center.transpose();
    } else {
        for (Index b = 0; b < d / 2; ++b) {
            const double theta = P.rel_angles(t.relation, b);
            const double c = std::cos(theta), s = std::sin(theta);
            const double gu = g_center[2 * b], gv = g_center[2 * b + 1];
            const double u = t.rotated[2 * b], v = t.rotated[2 * b + 1];
            g.rel_angles(t.relation, b) += gu * (-v) + gv * u;
            g.entity_points(t.head, 2 * b) += c * gu + s * gv;
            g.entity_points(t.head, 2 * b + 1) += -s * gu + c * gv;
        }
    }
}

/// Loss and gradients of one positive group (positive fact + its negatives).
double groupBackward(const Model& model, const Fact& fact,
                     std::span<const std::int32_t> negTails, double smoothing, double invGroups,
                     GroupTrace& trace, GradientBuffer& g) {
    forwardGroup(model, fact, trace);
    const Parameters& P = model.params();
    const Index d = model.dim();

    Vec g_fmin = Vec::Zero(d);
    Vec g_fmax = Vec::Zero(d);

    double loss = 0.0;
    auto handleTail = [&](std::int32_t tail, double target) {
        const double dist = distanceFromTrace(trace, P, tail);
        const double p = sigmoid(-dist);
        loss += bceTerm(p, target);
        const double gD = invGroups * bceTermGradWrtDistance(p, target);
        if (gD != 0.0) distanceBackward(trace, P, tail, gD, g_fmin, g_fmax, g);
    };

    handleTail(fact.tail, 1.0 - smoothing);
    for (const std::int32_t tail : negTails) {
        model.checkEntity(tail);
        handleTail(tail, smoothing);
    }

    boxBackward(model, trace, g_fmin, g_fmax, g);
    return loss;
}

double groupLoss(const Model& model, const Fact& fact, std::span<const std::int32_t> negTails,
                 double smoothing, GroupTrace& trace) {
    forwardGroup(model, fact, trace);
    const Parameters& P = model.params();
    double loss = bceTerm(sigmoid(-distanceFromTrace(trace, P, fact.tail)), 1.0 - smoothing);
    for (const std::int32_t tail : negTails) {
        loss += bceTerm(sigmoid(-distanceFromTrace(trace, P, tail)), smoothing);
    }
    return loss;
}

std::span<const std::int32_t> groupNegatives(const TrainingBatch& batch, std::size_t group) {
    if (batch.n_neg == 0) return {};
    return std::span<const std::int32_t>(batch.negative_tails)
        .subspan(group * static_cast<std::size_t>(batch.n_neg),
                 static_cast<std::size_t>(batch.n_neg));
}

void addInto(GradientBuffer& dst, const GradientBuffer& src) {
    dst.entity_points += src.entity_points;
    dst.rel_angles += src.rel_angles;
    dst.rel_translation += src.rel_translation;
    dst.rel_offset += src.rel_offset;
    dst.rel_context += src.rel_context;
    dst.shrink_weight += src.shrink_weight;
    dst.shrink_bias += src.shrink_bias;
}

void zeroInto(GradientBuffer& g) {
    for (auto [name, tensor] : g.tensors()) tensor->setZero();
}

}  // namespace

double smoothedBce(double pPositive, std::span<const double> pNegatives, double smoothing) {
    double loss = bceTerm(pPositive, 1.0 - smoothing);
    for (const double p : pNegatives) loss += bceTerm(p, smoothing);
    return loss;
}

double batchLoss(const Model& model, const TrainingBatch& batch, double smoothing) {
    if (batch.positives.empty()) throw UsageError("batchLoss: empty batch");
    GroupTrace trace;
    double total = 0.0;
    for (std::size_t gi = 0; gi < batch.positives.size(); ++gi) {
        total += groupLoss(model, batch.positives[gi], groupNegatives(batch, gi), smoothing, trace);
    }
    return total / static_cast<double>(batch.positives.size());
}

double computeGradients(const Model& model, const TrainingBatch& batch, double smoothing,
                        GradientBuffer& grads, int threads) {
    if (batch.positives.empty()) throw UsageError("computeGradients: empty batch");
    zeroInto(grads);
    const std::size_t n = batch.positives.size();
    const double invGroups = 1.0 / static_cast<double>(n);

    if (threads <= 1 || n < 2) {
        GroupTrace trace;
        double total = 0.0;
        for (std::size_t gi = 0; gi < n; ++gi) {
            total += groupBackward(model, batch.positives[gi], groupNegatives(batch, gi),
                                   smoothing, invGroups, trace, grads);
        }
        return total * invGroups;
    }

    const std::size_t lanes = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<GradientBuffer> partial;
    partial.reserve(lanes);
    for (std::size_t l = 0; l < lanes; ++l) partial.push_back(zeroLike(model.params()));
    std::vector<double> partialLoss(lanes, 0.0);

    std::vector<std::thread> workers;
    workers.reserve(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        workers.emplace_back([&, l]() {
            GroupTrace trace;
            for (std::size_t gi = l; gi < n; gi += lanes) {
                partialLoss[l] += groupBackward(model, batch.positives[gi],
                                                groupNegatives(batch, gi), smoothing, invGroups,
                                                trace, partial[l]);
            }
        });
    }
    for (auto& w : workers) w.join();

    double total = 0.0;
    for (std::size_t l = 0; l < lanes; ++l) {
        addInto(grads, partial[l]);
        total += partialLoss[l];
    }
    return total * invGroups;
}

void adamStep(Parameters& params, const GradientBuffer& grads, AdamState& state, double lr,
              const AdamConfig& adam) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));

    auto ps = params.tensors();
    const auto gs = static_cast<const Parameters&>(grads).tensors();
    auto ms = state.m.tensors();
    auto vs = state.v.tensors();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Mat& p = *ps[i].tensor;
        const Mat& g = *gs[i].tensor;
        Mat& m = *ms[i].tensor;
        Mat& v = *vs[i].tensor;
        if (p.rows() != g.rows() || p.cols() != g.cols()) {
            throw DimensionError(std::string("adamStep: shape mismatch for ") +
                                 std::string(ps[i].name));
        }
        m = adam.beta1 * m + (1.0 - adam.beta1) * g;
        v = adam.beta2 * v + (1.0 - adam.beta2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + adam.eps);
    }
}

std::string EpochRecord::line() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d\t%.9g\t%.3f", epoch, mean_loss, seconds);
    return buf;
}

int resolveThreads(int requested, bool deterministic) {
    if (deterministic) return 1;
    int t = requested;
    if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("SHRINKE_THREADS")) {
        const int c = std::atoi(cap);
        if (c > 0) t = std::min(t, c);
    }
    return std::max(1, t);
}

TrainResult train(Model& model, const std::vector<Fact>& facts, const TrainConfig& config,
                  const ProgressSink& sink, const EpochHook& afterEpoch) {
    config.validate();
    if (facts.empty()) throw UsageError("train: empty fact list");
    model.setAblation(config.ablation);

    const int threads = resolveThreads(config.threads, config.deterministic);
    Rng rng(splitmix64(config.seed));

    std::vector<std::size_t> order(facts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    GradientBuffer grads = zeroLike(model.params());
    AdamState adam = AdamState::forParams(model.params());

    TrainResult result;
    TrainingBatch batch;
    batch.n_neg = config.n_neg;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);

        double lossSum = 0.0;
        std::size_t groupCount = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.positives.clear();
            batch.negative_tails.clear();
            for (std::size_t i = start; i < end; ++i) {
                const Fact& f = facts[order[i]];
                batch.positives.push_back(f);
                const auto negs = sampleNegativeTails(f, config.n_neg, model.numEntities(), rng);
                batch.negative_tails.insert(batch.negative_tails.end(), negs.begin(), negs.end());
            }
            const double loss = computeGradients(model, batch, config.smoothing, grads, threads);
            adamStep(model.params(), grads, adam, config.learning_rate);
            lossSum += loss * static_cast<double>(batch.positives.size());
            groupCount += batch.positives.size();
        }

        if (!model.params().allFinite()) {
            throw Error("training produced non-finite parameters at epoch " +
                        std::to_string(epoch));
        }

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EpochRecord record{epoch, lossSum / static_cast<double>(groupCount), seconds};
        result.log.push_back(record);
        if (sink) sink(record);
        if (afterEpoch) afterEpoch(epoch);
    }
    return result;
}

}  // namespace shrinke
