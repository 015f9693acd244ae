#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "skillroute/errors.hpp"

namespace skillroute {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }

    bool is_zero() const noexcept {
        return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
    }

    bool all_finite() const noexcept {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

    double l2_norm() const noexcept {
        double sum = 0.0;
        for (double v : values) {
            sum += v * v;
        }
        return std::sqrt(sum);
    }

    bool operator==(const EmbeddingVector& other) const noexcept { return values == other.values; }
};

/// Cosine similarity, clamped to [-1, 1] against rounding drift.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch(a.dim(), b.dim());
    }
    if (a.is_zero() || b.is_zero()) {
        throw ZeroVector();
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
    }
    double sim = dot / (a.l2_norm() * b.l2_norm());
    return std::clamp(sim, -1.0, 1.0);
}

} // namespace skillroute
