#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillroute/bm25.hpp"
#include "skillroute/embedding.hpp"
#include "skillroute/errors.hpp"
#include "skillroute/provider.hpp"
#include "skillroute/registry.hpp"
#include "skillroute/tokenizer.hpp"

namespace skillroute {

enum class BackendKind { bm25, dense };

struct BackendConfig {
    BackendKind kind = BackendKind::bm25;
    double k1 = 1.2;
    double b = 0.75;
    std::string model;    // dense only
    std::string provider; // dense only: which provider entry serves this model

    std::string backend_id() const { return kind == BackendKind::bm25 ? "bm25" : model; }

    void validate() const {
        if (k1 < 0.0) {
            throw UsageError("backend k1 must be >= 0");
        }
        if (b < 0.0 || b > 1.0) {
            throw UsageError("backend b must be in [0, 1]");
        }
        if (kind == BackendKind::dense && model.empty()) {
            throw UsageError("dense backend requires a model identifier");
        }
    }
};

/// Routing scores for a fixed set of texts under one backend. BM25 corpus
/// statistics (or dense embeddings) are prepared once at construction; each
/// scores() call handles one query.
class TextScorer {
public:
    TextScorer(std::vector<std::string> texts, const BackendConfig& backend, EmbeddingProvider* embedder = nullptr)
        : backend_(backend) {
        backend_.validate();
        if (texts.empty()) {
            throw UsageError("TextScorer requires at least one text");
        }
        if (backend_.kind == BackendKind::bm25) {
            docs_.reserve(texts.size());
            for (const auto& text : texts) {
                docs_.push_back(count_tokens(tokenize(text)));
            }
            stats_ = build_bm25_stats(docs_);
        } else {
            if (embedder == nullptr) {
                throw UsageError("dense backend requires an embedding provider");
            }
            embedder_ = embedder;
            doc_vectors_ = embedder_->embed_batch(texts);
        }
    }

    std::size_t size() const noexcept {
        return backend_.kind == BackendKind::bm25 ? docs_.size() : doc_vectors_.size();
    }

    std::vector<double> scores(const std::string& query) const {
        std::vector<double> out;
        out.reserve(size());
        if (backend_.kind == BackendKind::bm25) {
            auto query_tokens = tokenize(query);
            for (const auto& doc : docs_) {
                out.push_back(bm25_score(query_tokens, doc, stats_, backend_.k1, backend_.b));
            }
        } else {
            EmbeddingVector query_vec = embedder_->embed(query);
            for (const auto& doc_vec : doc_vectors_) {
                out.push_back(cosine_similarity(query_vec, doc_vec));
            }
        }
        return out;
    }

private:
    BackendConfig backend_;
    // bm25
    std::vector<DocTokens> docs_;
    Bm25Stats stats_;
    // dense
    EmbeddingProvider* embedder_ = nullptr;
    std::vector<EmbeddingVector> doc_vectors_;
};

struct RankedEntry {
    std::string agent_id;
    double score;

    bool operator==(const RankedEntry&) const = default;
};

/// All agents ordered by routing score (non-increasing); equal scores keep
/// registry insertion order. Rank positions are 1-based.
struct Ranking {
    std::string query_id;
    std::string backend_id;
    std::vector<RankedEntry> entries;

    bool operator==(const Ranking&) const = default;
};

/// Scores one registry under one backend; reusable across many queries.
class Scorer {
public:
    Scorer(const Registry& registry, const BackendConfig& backend, EmbeddingProvider* embedder = nullptr)
        : backend_id_(backend.backend_id()), text_scorer_(descriptions_of(registry), backend, embedder) {
        for (const auto& card : registry.agents()) {
            agent_ids_.push_back(card.agent_id);
        }
    }

    Ranking score_query(std::string query_id, const std::string& query_text) const {
        std::vector<double> scores = text_scorer_.scores(query_text);
        std::vector<std::size_t> order(scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

        Ranking ranking;
        ranking.query_id = std::move(query_id);
        ranking.backend_id = backend_id_;
        ranking.entries.reserve(order.size());
        for (std::size_t idx : order) {
            ranking.entries.push_back({agent_ids_[idx], scores[idx]});
        }
        return ranking;
    }

private:
    static std::vector<std::string> descriptions_of(const Registry& registry) {
        if (registry.empty()) {
            throw EmptyRegistry();
        }
        std::vector<std::string> texts;
        texts.reserve(registry.size());
        for (const auto& card : registry.agents()) {
            texts.push_back(card.description);
        }
        return texts;
    }

    std::string backend_id_;
    std::vector<std::string> agent_ids_;
    TextScorer text_scorer_;
};

inline Ranking score_all(const std::string& query_id, const std::string& query_text, const Registry& registry,
                         const BackendConfig& backend, EmbeddingProvider* embedder = nullptr) {
    return Scorer(registry, backend, embedder).score_query(query_id, query_text);
}

/// First min(K, N) agent ids of the ranking.
inline std::vector<std::string> top_k(const Ranking& ranking, std::size_t k) {
    if (k < 1) {
        throw UsageError("top_k requires K >= 1");
    }
    std::vector<std::string> out;
    out.reserve(std::min(k, ranking.entries.size()));
    for (std::size_t i = 0; i < ranking.entries.size() && i < k; ++i) {
        out.push_back(ranking.entries[i].agent_id);
    }
    return out;
}

/// 1-based position of the agent in the ranking.
inline std::size_t rank_of(const Ranking& ranking, std::string_view agent_id) {
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
        if (ranking.entries[i].agent_id == agent_id) {
            return i + 1;
        }
    }
    throw UnknownAgentId(std::string(agent_id));
}

inline nlohmann::ordered_json ranking_to_json(const Ranking& ranking) {
    nlohmann::ordered_json j;
    j["query_id"] = ranking.query_id;
    j["backend_id"] = ranking.backend_id;
    j["entries"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
        nlohmann::ordered_json entry;
        entry["agent_id"] = ranking.entries[i].agent_id;
        entry["score"] = ranking.entries[i].score;
        entry["rank"] = i + 1;
        j["entries"].push_back(std::move(entry));
    }
    return j;
}

} // namespace skillroute
