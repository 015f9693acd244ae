#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "skillroute/errors.hpp"

namespace skillroute {

/// Term counts for one document, precomputed so scoring many queries against
/// the same corpus does not re-scan token lists.
struct DocTokens {
    std::unordered_map<std::string, std::size_t> counts;
    std::size_t length = 0;
};

inline DocTokens count_tokens(const std::vector<std::string>& tokens) {
    DocTokens doc;
    doc.length = tokens.size();
    for (const auto& t : tokens) {
        ++doc.counts[t];
    }
    return doc;
}

/// Corpus-level statistics: document count, per-term document frequency and
/// average document length (in tokens).
struct Bm25Stats {
    std::size_t doc_count = 0;
    double avg_doc_len = 0.0;
    std::unordered_map<std::string, std::size_t> doc_freq;
};

inline Bm25Stats build_bm25_stats(const std::vector<DocTokens>& docs) {
    Bm25Stats stats;
    stats.doc_count = docs.size();
    std::size_t total_len = 0;
    for (const auto& doc : docs) {
        total_len += doc.length;
        for (const auto& [term, count] : doc.counts) {
            (void)count;
            ++stats.doc_freq[term];
        }
    }
    stats.avg_doc_len = docs.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(docs.size());
    return stats;
}

inline Bm25Stats build_bm25_stats(const std::vector<std::vector<std::string>>& token_docs) {
    std::vector<DocTokens> docs;
    docs.reserve(token_docs.size());
    for (const auto& toks : token_docs) {
        docs.push_back(count_tokens(toks));
    }
    return build_bm25_stats(docs);
}

/// Smoothed IDF: ln(1 + (N - n + 0.5) / (n + 0.5)). Non-negative for any
/// document frequency n in [0, N].
inline double bm25_idf(const Bm25Stats& stats, const std::string& term) {
    auto it = stats.doc_freq.find(term);
    double n = it == stats.doc_freq.end() ? 0.0 : static_cast<double>(it->second);
    double big_n = static_cast<double>(stats.doc_count);
    return std::log(1.0 + (big_n - n + 0.5) / (n + 0.5));
}

/// BM25 relevance of one document for one query. Sums over the query token
/// list as given, so a repeated query term contributes once per occurrence.
inline double bm25_score(const std::vector<std::string>& query_tokens, const DocTokens& doc, const Bm25Stats& stats,
                         double k1 = 1.2, double b = 0.75) {
    if (stats.doc_count == 0) {
        throw InconsistentStats();
    }
    double len_ratio = stats.avg_doc_len > 0.0 ? static_cast<double>(doc.length) / stats.avg_doc_len : 0.0;
    double norm = k1 * (1.0 - b + b * len_ratio);
    double score = 0.0;
    for (const auto& term : query_tokens) {
        auto it = doc.counts.find(term);
        if (it == doc.counts.end()) {
            continue;
        }
        double tf = static_cast<double>(it->second);
        score += bm25_idf(stats, term) * tf * (k1 + 1.0) / (tf + norm);
    }
    return score;
}

inline double bm25_score(const std::vector<std::string>& query_tokens, const std::vector<std::string>& doc_tokens,
                         const Bm25Stats& stats, double k1 = 1.2, double b = 0.75) {
    return bm25_score(query_tokens, count_tokens(doc_tokens), stats, k1, b);
}

} // namespace skillroute
