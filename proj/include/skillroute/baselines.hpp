#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "skillroute/attack.hpp"
#include "skillroute/embedding.hpp"
#include "skillroute/errors.hpp"
#include "skillroute/mock_provider.hpp"
#include "skillroute/provider.hpp"
#include "skillroute/registry.hpp"
#include "skillroute/text_util.hpp"

namespace skillroute {

enum class Strategy { sdd, exaggeration, keyword_stuffing, generic, impersonation, none };

inline const char* strategy_name(Strategy s) {
    switch (s) {
    case Strategy::sdd:
        return "sdd";
    case Strategy::exaggeration:
        return "exaggeration";
    case Strategy::keyword_stuffing:
        return "keyword_stuffing";
    case Strategy::generic:
        return "generic";
    case Strategy::impersonation:
        return "impersonation";
    case Strategy::none:
        return "none";
    }
    return "unknown";
}

inline Strategy strategy_from_name(std::string_view name) {
    for (Strategy s : {Strategy::sdd, Strategy::exaggeration, Strategy::keyword_stuffing, Strategy::generic,
                       Strategy::impersonation, Strategy::none}) {
        if (name == strategy_name(s)) {
            return s;
        }
    }
    throw UsageError("unknown strategy \"" + std::string(name) + "\"");
}

struct BaselineResult {
    std::string description;
    std::optional<std::string> mimic_agent_id; // impersonation: whose card is copied
};

namespace detail {

inline std::string refs_concat(const DescriptionSet& refs) {
    std::string out;
    for (const auto& [agent_id, text] : refs.descriptions) {
        (void)agent_id;
        out += text;
        out += '\n';
    }
    return out;
}

} // namespace detail

/// The four heuristic description-manipulation strategies. `generic` needs
/// only the domain tag; exaggeration uses the generation provider and
/// impersonation uses the embedder (falling back to the mock embedder for
/// lexical backends).
inline BaselineResult baseline_description(Strategy strategy, const DescriptionSet& refs, const std::string& domain,
                                           GenerationProvider* generator = nullptr,
                                           EmbeddingProvider* embedder = nullptr,
                                           const PromptTemplates& prompts = PromptTemplates::defaults(),
                                           std::size_t max_chars = 1500, std::size_t top_m = 30,
                                           std::uint64_t seed = 0) {
    switch (strategy) {
    case Strategy::generic:
        return {"General-purpose assistant for " + domain + " and related tasks.", std::nullopt};

    case Strategy::none:
        // No-attack control: deliberately out-of-domain text.
        return {"Personal weblog about vintage postcards, garden birds, and weather diaries.", std::nullopt};

    case Strategy::keyword_stuffing: {
        if (refs.empty()) {
            throw UsageError("keyword_stuffing requires reference descriptions");
        }
        std::vector<std::string> tokens = mockgen::top_content_tokens(detail::refs_concat(refs), top_m);
        if (tokens.empty()) {
            throw DataError("reference descriptions yield no content tokens");
        }
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            out += tokens[i];
        }
        out += ".";
        return {truncate_at_sentence(out, max_chars), std::nullopt};
    }

    case Strategy::exaggeration: {
        if (refs.empty()) {
            throw UsageError("exaggeration requires reference descriptions");
        }
        if (generator == nullptr) {
            throw UsageError("exaggeration requires a generation provider");
        }
        std::string summary = synthesize_initial_description(refs, *generator, prompts, max_chars, seed);
        std::string out = "The world's leading, award-winning authority with unmatched, best-in-class results. " +
                          summary + " Guaranteed superior outcomes, trusted globally, always the premier choice.";
        return {truncate_at_sentence(out, max_chars), std::nullopt};
    }

    case Strategy::impersonation: {
        if (refs.empty()) {
            throw UsageError("impersonation requires reference descriptions");
        }
        MockEmbeddingProvider fallback;
        EmbeddingProvider& emb = embedder != nullptr ? *embedder : static_cast<EmbeddingProvider&>(fallback);
        std::vector<std::string> texts;
        texts.reserve(refs.size());
        for (const auto& [agent_id, text] : refs.descriptions) {
            (void)agent_id;
            texts.push_back(text);
        }
        std::vector<EmbeddingVector> vectors = emb.embed_batch(texts);
        EmbeddingVector centroid;
        centroid.values.assign(vectors.front().dim(), 0.0);
        for (const auto& vec : vectors) {
            for (std::size_t i = 0; i < vec.dim(); ++i) {
                centroid.values[i] += vec.values[i];
            }
        }
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            double sim = cosine_similarity(vectors[i], centroid);
            if (sim > best_sim) { // ties keep the earliest (registry order)
                best_sim = sim;
                best = i;
            }
        }
        return {refs.descriptions[best].second, refs.descriptions[best].first};
    }

    case Strategy::sdd:
        throw UsageError("sdd is not a baseline; use run_sdd_attack");
    }
    throw UsageError("unknown strategy");
}

} // namespace skillroute
