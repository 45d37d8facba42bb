#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "shrinke/data.hpp"
#include "shrinke/geometry.hpp"

namespace shrinke {

using Mat = Eigen::MatrixXd;

struct ModelConfig {
    Index dim = 200;
    double temperature = 1.0;
    std::uint64_t seed = 1;
    double init_scale = 0.1;       // stddev of entity point / translation init
    double shrink_bias_init = -4.0;

    void validate() const;
};

/// Component-removal switches; each one disables exactly that component.
struct Ablation {
    bool no_rotation = false;
    bool no_translation = false;
    bool no_shrinking = false;
};

/// All trainable tensors. Relation-indexed tensors cover reciprocal relations
/// too (ids >= the base relation count).
struct Parameters {
    Mat entity_points;     // |E| x d, entity point; doubles as qualifier-value context
    Mat rel_angles;        // |R| x d/2, rotation angles per 2x2 block
    Mat rel_translation;   // |R| x d
    Mat rel_offset;        // |R| x d, spanning offsets (softplus'd into half-widths)
    Mat rel_context;       // |R| x d, relation context: r_theta for primal use, k_theta for keys
    Mat shrink_weight;     // 2d x 3d
    Mat shrink_bias;       // 2d x 1

    struct TensorRef {
        std::string_view name;
        Mat* tensor;
    };
    struct ConstTensorRef {
        std::string_view name;
        const Mat* tensor;
    };
    /// Canonical tensor order; checkpoints, Adam state and gradient checks all
    /// iterate in this order.
    std::vector<TensorRef> tensors();
    std::vector<ConstTensorRef> tensors() const;

    bool allFinite() const;
};

/// Rotates p by block-diagonal 2x2 Givens rotations; |p| must equal 2*|angles|.
Vec rotateBlocks(const Vec& p, const Vec& angles);

class Model {
  public:
    Model(ModelConfig config, std::int32_t numEntities, std::int32_t numRelations);

    /// Draws every tensor from the config seed: points and translations are
    /// Gaussian, angles uniform on [-pi, pi), offsets zero (half-width
    /// softplus(0, t) everywhere), shrink weights Gaussian with fan-in scaling
    /// and the shrink bias at shrink_bias_init so shrinking starts near the
    /// identity. Bit-identical across runs for a fixed seed.
    void initialize();

    const ModelConfig& config() const { return config_; }
    const Ablation& ablation() const { return ablation_; }
    void setAblation(const Ablation& a) { ablation_ = a; }

    Parameters& params() { return params_; }
    const Parameters& params() const { return params_; }

    std::int32_t numEntities() const { return num_entities_; }
    std::int32_t numRelations() const { return num_relations_; }
    Index dim() const { return config_.dim; }

    void checkEntity(std::int32_t id) const;
    void checkRelation(std::int32_t id) const;

    /// H_r(e_h): rotation then translation of the head point.
    Vec headTransform(std::int32_t head, std::int32_t relation) const;

    /// Non-empty box spanned around the transformed head.
    Boxd queryBox(std::int32_t head, std::int32_t relation) const;

    /// Shrink vectors (s, S) for qualifier (k, v) under primal relation r:
    /// one affine layer applied to concat(r_theta, k_theta, v_theta).
    std::pair<Vec, Vec> shrinkVectors(std::int32_t relation, std::int32_t key,
                                      std::int32_t value) const;

    /// Intersection of the per-qualifier shrinkings of the query box; the
    /// query box itself when the qualifier set is empty (or shrinking is
    /// ablated). Independent of qualifier order.
    Boxd factBox(std::int32_t head, std::int32_t relation,
                 std::span<const Qualifier> qualifiers) const;

    /// Point-to-box distance from the tail point to the fact box; >= 0,
    /// lower means more plausible.
    double score(const Fact& fact) const;

    /// sigmoid(-score): in (0, 1), equal to 1/2 iff the score is 0.
    double plausibility(const Fact& fact) const;

  private:
    ModelConfig config_;
    Ablation ablation_;
    std::int32_t num_entities_ = 0;
    std::int32_t num_relations_ = 0;
    Parameters params_;
};

}  // namespace shrinke
