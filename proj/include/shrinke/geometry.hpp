#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "shrinke/errors.hpp"

namespace shrinke {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vec = VecX<double>;
using Index = Eigen::Index;

/// Guard added to the side-length denominator of pointToBoxDistance so the
/// distance stays finite on fully empty boxes.
inline constexpr double kSideLengthGuard = 1e-9;

namespace detail {

inline void requireDim(Index a, Index b, const char* where) {
    if (a != b) {
        throw DimensionError(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

}  // namespace detail

/// Numerically stable logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= Scalar(0)) {
        return Scalar(1) / (Scalar(1) + std::exp(-x));
    }
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// Tempered softplus tau_t(x) = t*log(1 + exp(x/t)), evaluated as
/// max(x,0) + t*log1p(exp(-|x|/t)) so it never overflows.
template <typename Scalar>
Scalar softplus(Scalar x, Scalar t) {
    return std::max(x, Scalar(0)) + t * std::log1p(std::exp(-std::abs(x) / t));
}

/// d/dx softplus(x, t) = sigmoid(x / t).
template <typename Scalar>
Scalar softplusGrad(Scalar x, Scalar t) {
    return sigmoid(x / t);
}

/// Axis-parallel box given by its lower-left and upper-right corners.
/// A box may be empty: that is the case iff min_i > max_i for some i.
/// A zero-width coordinate (min_i == max_i) still contains points, since
/// membership is defined with closed inequalities.
template <typename Scalar>
struct Box {
    VecX<Scalar> min;
    VecX<Scalar> max;

    Box() = default;
    Box(VecX<Scalar> lo, VecX<Scalar> hi) : min(std::move(lo)), max(std::move(hi)) {
        detail::requireDim(min.size(), max.size(), "Box");
    }

    Index dim() const { return min.size(); }

    VecX<Scalar> center() const { return (min + max) / Scalar(2); }

    /// Elementwise max(0, max - min); the side lengths an empty dimension
    /// contributes nothing to.
    VecX<Scalar> effectiveSide() const { return (max - min).cwiseMax(Scalar(0)); }
};

using Boxd = Box<double>;

template <typename Scalar>
bool isEmpty(const Box<Scalar>& b) {
    return (b.min.array() > b.max.array()).any();
}

/// Spans a point to the box [center - tau_t(offset), center + tau_t(offset)].
/// The result is non-empty in every dimension because softplus is positive.
template <typename DerivedC, typename DerivedO>
Box<typename DerivedC::Scalar> spanBox(const Eigen::MatrixBase<DerivedC>& center,
                                       const Eigen::MatrixBase<DerivedO>& offset,
                                       typename DerivedC::Scalar temperature) {
    using Scalar = typename DerivedC::Scalar;
    detail::requireDim(center.size(), offset.size(), "spanBox");
    VecX<Scalar> halfwidth =
        offset.unaryExpr([temperature](Scalar x) { return softplus(x, temperature); });
    return Box<Scalar>(center - halfwidth, center + halfwidth);
}

/// Box-to-box shrinking: min' = min + sigmoid(s) .* L, max' = max - sigmoid(S) .* L
/// with L = max - min (the raw side length, not clamped). For a non-empty input
/// the result is contained in the input, though it may itself be empty.
template <typename Scalar, typename DerivedS, typename DerivedT>
Box<Scalar> shrinkBox(const Box<Scalar>& b, const Eigen::MatrixBase<DerivedS>& s,
                      const Eigen::MatrixBase<DerivedT>& S) {
    detail::requireDim(b.dim(), s.size(), "shrinkBox");
    detail::requireDim(b.dim(), S.size(), "shrinkBox");
    const VecX<Scalar> side = b.max - b.min;
    VecX<Scalar> lo =
        b.min.array() + s.unaryExpr([](Scalar x) { return sigmoid(x); }).array() * side.array();
    VecX<Scalar> hi =
        b.max.array() - S.unaryExpr([](Scalar x) { return sigmoid(x); }).array() * side.array();
    return Box<Scalar>(std::move(lo), std::move(hi));
}

/// Intersection: elementwise max of the lower corners, min of the upper corners.
/// Exact and bit-identical under any permutation of the inputs.
template <typename Scalar>
Box<Scalar> intersectBoxes(std::span<const Box<Scalar>> boxes) {
    if (boxes.empty()) {
        throw UsageError("intersectBoxes: empty box list");
    }
    Box<Scalar> out = boxes.front();
    for (std::size_t i = 1; i < boxes.size(); ++i) {
        detail::requireDim(out.dim(), boxes[i].dim(), "intersectBoxes");
        out.min = out.min.cwiseMax(boxes[i].min);
        out.max = out.max.cwiseMin(boxes[i].max);
    }
    return out;
}

template <typename Scalar>
Box<Scalar> intersectBoxes(const std::vector<Box<Scalar>>& boxes) {
    return intersectBoxes(std::span<const Box<Scalar>>(boxes));
}

/// Sum over dimensions of the "outside excess" |e-m|_1 + |e-M|_1 - |L_eff|_1.
/// For a non-empty dimension this reduces exactly to 2*max(0, m-e, e-M), which
/// is what gets evaluated so that the excess is exactly zero iff the point is
/// inside the (closed) box; an empty dimension contributes |e-m| + |e-M|.
template <typename Scalar, typename Derived>
Scalar outsideExcess(const Eigen::MatrixBase<Derived>& point, const Box<Scalar>& b) {
    detail::requireDim(point.size(), b.dim(), "outsideExcess");
    Scalar excess = 0;
    for (Index i = 0; i < b.dim(); ++i) {
        const Scalar e = point[i], m = b.min[i], M = b.max[i];
        if (m <= M) {
            excess += Scalar(2) * std::max({Scalar(0), m - e, e - M});
        } else {
            excess += std::abs(e - m) + std::abs(e - M);
        }
    }
    return excess;
}

/// Point-to-box distance
///   D(e, b) = |e - c|_1 / (|L_eff|_1 + guard) + (|e-m|_1 + |e-M|_1 - |L_eff|_1)^2
/// with c the center and L_eff the effective side lengths. The squared term is
/// exactly zero iff the box is non-empty and the point lies inside it.
template <typename Scalar, typename Derived>
Scalar pointToBoxDistance(const Eigen::MatrixBase<Derived>& point, const Box<Scalar>& b) {
    detail::requireDim(point.size(), b.dim(), "pointToBoxDistance");
    Scalar centerL1 = 0;
    Scalar side = 0;
    for (Index i = 0; i < b.dim(); ++i) {
        const Scalar m = b.min[i], M = b.max[i];
        centerL1 += std::abs(point[i] - (m + M) / Scalar(2));
        side += std::max(Scalar(0), M - m);
    }
    const Scalar excess = outsideExcess(point, b);
    return centerL1 / (side + Scalar(kSideLengthGuard)) + excess * excess;
}

/// True iff inner is a subset of outer. An empty inner box is contained in
/// everything; a non-empty inner box must satisfy the corner inequalities in
/// every dimension.
template <typename Scalar>
bool boxContains(const Box<Scalar>& outer, const Box<Scalar>& inner) {
    detail::requireDim(outer.dim(), inner.dim(), "boxContains");
    if (isEmpty(inner)) return true;
    return (outer.min.array() <= inner.min.array()).all() &&
           (inner.max.array() <= outer.max.array()).all();
}

/// True iff the boxes share no point, i.e. their intersection is empty.
/// Boxes are closed, so touching boundaries do not count as disjoint.
template <typename Scalar>
bool boxesDisjoint(const Box<Scalar>& a, const Box<Scalar>& b) {
    detail::requireDim(a.dim(), b.dim(), "boxesDisjoint");
    return (a.min.cwiseMax(b.min).array() > a.max.cwiseMin(b.max).array()).any();
}

}  // namespace shrinke
