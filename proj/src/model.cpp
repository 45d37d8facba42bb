#include "shrinke/model.hpp"

#include <cmath>

#include "shrinke/rng.hpp"

namespace shrinke {

void ModelConfig::validate() const {
    if (dim <= 0 || dim % 2 != 0) {
        throw ConfigError("dim must be a positive even integer, got " + std::to_string(dim));
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be > 0, got " + std::to_string(temperature));
    }
}

std::vector<Parameters::TensorRef> Parameters::tensors() {
    return {
        {"entity.points", &entity_points},   {"relation.angles", &rel_angles},
        {"relation.translation", &rel_translation}, {"relation.offset", &rel_offset},
        {"relation.context", &rel_context},  {"shrink.weight", &shrink_weight},
        {"shrink.bias", &shrink_bias},
    };
}

std::vector<Parameters::ConstTensorRef> Parameters::tensors() const {
    return {
        {"entity.points", &entity_points},   {"relation.angles", &rel_angles},
        {"relation.translation", &rel_translation}, {"relation.offset", &rel_offset},
        {"relation.context", &rel_context},  {"shrink.weight", &shrink_weight},
        {"shrink.bias", &shrink_bias},
    };
}

bool Parameters::allFinite() const {
    for (const auto& [name, tensor] : tensors()) {
        if (!tensor->allFinite()) return false;
    }
    return true;
}

Vec rotateBlocks(const Vec& p, const Vec& angles) {
    detail::requireDim(p.size(), 2 * angles.size(), "rotateBlocks");
    Vec out(p.size());
    for (Index b = 0; b < angles.size(); ++b) {
        const double c = std::cos(angles[b]);
        const double s = std::sin(angles[b]);
        const double x = p[2 * b];
        const double y = p[2 * b + 1];
        out[2 * b] = c * x - s * y;
        out[2 * b + 1] = s * x + c * y;
    }
    return out;
}

Model::Model(ModelConfig config, std::int32_t numEntities, std::int32_t numRelations)
    : config_(config), num_entities_(numEntities), num_relations_(numRelations) {
    config_.validate();
    if (numEntities <= 0 || numRelations <= 0) {
        throw ConfigError("entity and relation counts must be positive");
    }
    const Index d = config_.dim;
    params_.entity_points = Mat::Zero(numEntities, d);
    params_.rel_angles = Mat::Zero(numRelations, d / 2);
    params_.rel_translation = Mat::Zero(numRelations, d);
    params_.rel_offset = Mat::Zero(numRelations, d);
    params_.rel_context = Mat::Zero(numRelations, d);
    params_.shrink_weight = Mat::Zero(2 * d, 3 * d);
    params_.shrink_bias = Mat::Zero(2 * d, 1);
}

void Model::initialize() {
    Rng rng(splitmix64(config_.seed));
    const Index d = config_.dim;

    auto fillNormal = [&rng](Mat& m, double stddev) {
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal(0.0, stddev);
        }
    };

    fillNormal(params_.entity_points, config_.init_scale);
    for (Index r = 0; r < params_.rel_angles.rows(); ++r) {
        for (Index c = 0; c < params_.rel_angles.cols(); ++c) {
            params_.rel_angles(r, c) = rng.uniform(-M_PI, M_PI);
        }
    }
    fillNormal(params_.rel_translation, config_.init_scale);
    params_.rel_offset.setZero();
    fillNormal(params_.rel_context, config_.init_scale);
    fillNormal(params_.shrink_weight, 1.0 / std::sqrt(3.0 * static_cast<double>(d)));
    params_.shrink_bias.setConstant(config_.shrink_bias_init);
}

void Model::checkEntity(std::int32_t id) const {
    if (id < 0 || id >= num_entities_) {
        throw LookupError("entity id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(num_entities_) + ")");
    }
}

void Model::checkRelation(std::int32_t id) const {
    if (id < 0 || id >= num_relations_) {
        throw LookupError("relation id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(num_relations_) + ")");
    }
}

Vec Model::headTransform(std::int32_t head, std::int32_t relation) const {
    checkEntity(head);
    checkRelation(relation);
    Vec point = params_.entity_points.row(head).transpose();
    if (!ablation_.no_rotation) {
        point = rotateBlocks(point, params_.rel_angles.row(relation).transpose());
    }
    if (!ablation_.no_translation) {
        point += params_.rel_translation.row(relation).transpose();
    }
    return point;
}

Boxd Model::queryBox(std::int32_t head, std::int32_t relation) const {
    return spanBox(headTransform(head, relation),
                   Vec(params_.rel_offset.row(relation).transpose()), config_.temperature);
}

std::pair<Vec, Vec> Model::shrinkVectors(std::int32_t relation, std::int32_t key,
                                         std::int32_t value) const {
    checkRelation(relation);
    checkRelation(key);
    checkEntity(value);
    const Index d = config_.dim;
    Vec input(3 * d);
    input.segment(0, d) = params_.rel_context.row(relation).transpose();
    input.segment(d, d) = params_.rel_context.row(key).transpose();
    input.segment(2 * d, d) = params_.entity_points.row(value).transpose();
    const Vec out = params_.shrink_weight * input + params_.shrink_bias.col(0);
    return {out.segment(0, d), out.segment(d, d)};
}

Boxd Model::factBox(std::int32_t head, std::int32_t relation,
                    std::span<const Qualifier> qualifiers) const {
    const Boxd query = queryBox(head, relation);
    if (qualifiers.empty() || ablation_.no_shrinking) return query;

    std::vector<Boxd> shrunk;
    shrunk.reserve(qualifiers.size());
    for (const Qualifier& q : qualifiers) {
        const auto [s, S] = shrinkVectors(relation, q.key, q.value);
        shrunk.push_back(shrinkBox(query, s, S));
    }
    return intersectBoxes(shrunk);
}

double Model::score(const Fact& fact) const {
    checkEntity(fact.tail);
    const Boxd box = factBox(fact.head, fact.relation, fact.qualifiers);
    return pointToBoxDistance(Vec(params_.entity_points.row(fact.tail).transpose()), box);
}

double Model::plausibility(const Fact& fact) const { return sigmoid(-score(fact)); }

}  // namespace shrinke
