#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "skillroute/errors.hpp"
#include "skillroute/provider.hpp"
#include "skillroute/query_set.hpp"
#include "skillroute/registry.hpp"
#include "skillroute/router.hpp"

namespace skillroute {

enum class LossKind { margin, logistic };

struct LossConfig {
    LossKind kind = LossKind::logistic;
    double margin_gamma = 0.0; // margin kind
    double beta = 5.0;         // logistic kind

    void validate() const {
        if (kind == LossKind::margin && margin_gamma < 0.0) {
            throw UsageError("margin loss requires gamma >= 0");
        }
        if (kind == LossKind::logistic && beta <= 0.0) {
            throw UsageError("logistic loss requires beta > 0");
        }
    }
};

/// ell(x) for the score gap x = max benign score - malicious score.
inline double loss_term(const LossConfig& loss, double x) {
    if (loss.kind == LossKind::margin) {
        return std::max(0.0, x + loss.margin_gamma);
    }
    // ln(1 + e^(beta x)), evaluated without overflow for large beta x.
    double bx = loss.beta * x;
    return bx > 0.0 ? bx + std::log1p(std::exp(-bx)) : std::log1p(std::exp(bx));
}

struct QueryMargin {
    std::string query_id;
    double margin; // max benign score - malicious score; negative means the malicious agent wins
};

/// Per-query score gap between the best target-domain reference and the
/// malicious description, under the attacker's view of the routing backend
/// (a corpus of the references plus the candidate description).
inline std::vector<QueryMargin> score_margins(const std::string& malicious_description, const QuerySet& queries,
                                              const DescriptionSet& refs, const BackendConfig& backend,
                                              EmbeddingProvider* embedder = nullptr) {
    if (queries.empty()) {
        throw UsageError("score_margins requires a nonempty query set");
    }
    if (refs.empty()) {
        throw UsageError("score_margins requires a nonempty reference set");
    }
    std::vector<std::string> texts;
    texts.reserve(refs.size() + 1);
    for (const auto& [agent_id, text] : refs.descriptions) {
        (void)agent_id;
        texts.push_back(text);
    }
    texts.push_back(malicious_description);
    TextScorer scorer(std::move(texts), backend, embedder);

    std::vector<QueryMargin> margins;
    margins.reserve(queries.size());
    for (const auto& query : queries.queries) {
        std::vector<double> scores = scorer.scores(query.text);
        double malicious = scores.back();
        double best_benign = scores.front();
        for (std::size_t i = 1; i + 1 < scores.size(); ++i) {
            best_benign = std::max(best_benign, scores[i]);
        }
        margins.push_back({query.query_id, best_benign - malicious});
    }
    return margins;
}

inline double objective_from_margins(const std::vector<QueryMargin>& margins) {
    if (margins.empty()) {
        throw UsageError("objective requires at least one query margin");
    }
    std::size_t wins = 0;
    for (const auto& m : margins) {
        if (m.margin < 0.0) { // strict: a tie with the best benign score is a failure
            ++wins;
        }
    }
    return static_cast<double>(wins) / static_cast<double>(margins.size());
}

inline double loss_from_margins(const LossConfig& loss, const std::vector<QueryMargin>& margins) {
    loss.validate();
    double total = 0.0;
    for (const auto& m : margins) {
        total += loss_term(loss, m.margin);
    }
    return total;
}

/// Fraction of queries the malicious description wins strictly against every
/// reference description.
inline double attack_objective(const std::string& malicious_description, const QuerySet& queries,
                               const DescriptionSet& refs, const BackendConfig& backend,
                               EmbeddingProvider* embedder = nullptr) {
    return objective_from_margins(score_margins(malicious_description, queries, refs, backend, embedder));
}

/// Total surrogate loss plus the per-query gaps it was computed from.
inline std::pair<double, std::vector<QueryMargin>> surrogate_loss(const std::string& malicious_description,
                                                                  const QuerySet& queries, const DescriptionSet& refs,
                                                                  const BackendConfig& backend, const LossConfig& loss,
                                                                  EmbeddingProvider* embedder = nullptr) {
    auto margins = score_margins(malicious_description, queries, refs, backend, embedder);
    return {loss_from_margins(loss, margins), std::move(margins)};
}

} // namespace skillroute
