#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillroute/errors.hpp"
#include "skillroute/hash.hpp"
#include "skillroute/loss.hpp"
#include "skillroute/prompts.hpp"
#include "skillroute/provider.hpp"
#include "skillroute/query_set.hpp"
#include "skillroute/registry.hpp"
#include "skillroute/router.hpp"
#include "skillroute/text_util.hpp"

namespace skillroute {

struct AttackConfig {
    std::string target_domain;
    std::size_t query_count = 100;            // K: queries generated to drive the attack
    std::size_t max_iterations = 10;          // N_max
    std::size_t candidates_per_iteration = 3; // C
    LossConfig loss;
    std::size_t worst_query_budget = 5; // W: failing queries shown to the rewriter
    double early_stop_objective = 0.95;
    std::uint64_t seed = 0;
    std::size_t max_description_chars = 1500;

    void validate() const {
        if (target_domain.empty()) {
            throw UsageError("attack target_domain must be set");
        }
        if (query_count < 1 || candidates_per_iteration < 1 || worst_query_budget < 1) {
            throw UsageError("attack counts must be >= 1");
        }
        if (early_stop_objective > 1.0) {
            throw UsageError("early_stop_objective must be <= 1");
        }
        if (max_description_chars < 16) {
            throw UsageError("max_description_chars is unreasonably small");
        }
        loss.validate();
    }
};

struct CandidateRecord {
    std::string text;
    double objective = 0.0;
    double loss = 0.0;
    bool accepted = false;
};

struct IterationRecord {
    std::size_t iteration = 0;
    std::vector<CandidateRecord> candidates;
    int accepted_index = -1; // -1: incumbent kept
    double objective = 0.0;  // incumbent after the acceptance decision
    double loss = 0.0;
};

struct AttackState {
    std::size_t iteration = 0;
    std::string initial_description;
    std::string current_description;
    std::vector<double> objective_history; // incumbent objective per iteration, index 0 = initial
    std::vector<double> loss_history;
    std::vector<QueryMargin> per_query_margins; // for the current incumbent
    std::string best_description;
    double best_objective = 0.0;
    std::vector<IterationRecord> iterations;
    bool early_stopped = false;
    bool aborted = false;
    std::string abort_reason;
};

/// Exactly K distinct domain queries from the generation provider. Short
/// batches are re-requested up to 3 times; persistent duplicates fail rather
/// than being padded.
inline QuerySet generate_queries(const DescriptionSet& refs, std::size_t k, GenerationProvider& provider,
                                 const PromptTemplates& prompts = PromptTemplates::defaults(), std::uint64_t seed = 0) {
    if (refs.empty()) {
        throw UsageError("generate_queries requires a nonempty reference set");
    }
    if (k < 1) {
        throw UsageError("generate_queries requires K >= 1");
    }
    std::string refs_text;
    for (const auto& [agent_id, text] : refs.descriptions) {
        (void)agent_id;
        refs_text += text;
        refs_text += '\n';
    }

    std::vector<std::string> collected;
    for (std::size_t attempt = 0; attempt < 4 && collected.size() < k; ++attempt) {
        GenerationRequest request;
        request.system_prompt = PromptTemplates::query_gen_system();
        request.user_prompt = render_template(
            prompts.query_gen_user,
            {{"refs", refs_text}, {"count", std::to_string(k - collected.size())}, {"queries", ""}});
        request.seed = seed + attempt;
        request.temperature = 0.8;
        std::istringstream lines(provider.generate(request));
        std::string line;
        while (std::getline(lines, line)) {
            std::string text = trim_copy(line);
            if (text.empty()) {
                continue;
            }
            if (std::find(collected.begin(), collected.end(), text) == collected.end()) {
                collected.push_back(std::move(text));
            }
            if (collected.size() == k) {
                break;
            }
        }
    }
    if (collected.size() < k) {
        throw InsufficientDiversity(k, collected.size());
    }

    QuerySet set;
    set.domain = refs.domain;
    set.provenance = QueryProvenance::llm_generated;
    for (std::size_t i = 0; i < collected.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "q%04zu", i + 1);
        set.queries.push_back({id, std::move(collected[i])});
    }
    set.validate();
    return set;
}

/// Initial malicious description: a provider-written summary of the common
/// capabilities in the reference set, capped at max_chars.
inline std::string synthesize_initial_description(const DescriptionSet& refs, GenerationProvider& provider,
                                                  const PromptTemplates& prompts = PromptTemplates::defaults(),
                                                  std::size_t max_chars = 1500, std::uint64_t seed = 0) {
    if (refs.empty()) {
        throw UsageError("synthesize_initial_description requires a nonempty reference set");
    }
    std::string refs_text;
    for (const auto& [agent_id, text] : refs.descriptions) {
        (void)agent_id;
        refs_text += text;
        refs_text += '\n';
    }
    GenerationRequest request;
    request.system_prompt = PromptTemplates::synthesize_system();
    request.user_prompt =
        render_template(prompts.synthesize_user, {{"refs", refs_text}, {"max_chars", std::to_string(max_chars)}});
    request.seed = seed;
    std::string description = trim_copy(provider.generate(request));
    if (description.empty()) {
        throw EmptyCompletion();
    }
    return truncate_at_sentence(description, max_chars);
}

namespace detail {

inline std::string format_worst_queries(const std::vector<QueryMargin>& margins, const QuerySet& queries,
                                        std::size_t budget) {
    // Worst first: largest gap to the best competitor.
    std::vector<QueryMargin> sorted = margins;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const QueryMargin& a, const QueryMargin& b) { return a.margin > b.margin; });
    std::map<std::string, const std::string*> text_by_id;
    for (const auto& q : queries.queries) {
        text_by_id[q.query_id] = &q.text;
    }
    std::string out;
    std::size_t take = std::min(budget, sorted.size());
    for (std::size_t i = 0; i < take; ++i) {
        char margin_buf[48];
        std::snprintf(margin_buf, sizeof(margin_buf), "margin=%+.6f", sorted[i].margin);
        out += margin_buf;
        out += " | ";
        auto it = text_by_id.find(sorted[i].query_id);
        out += it != text_by_id.end() ? *it->second : sorted[i].query_id;
        out += '\n';
    }
    return out;
}

inline std::uint64_t candidate_seed(std::uint64_t base, std::size_t iteration, std::size_t candidate) {
    std::string material =
        std::to_string(base) + "/" + std::to_string(iteration) + "/" + std::to_string(candidate);
    return fnv1a64(material);
}

} // namespace detail

/// C rewrite candidates for the current incumbent. The prompt carries the
/// incumbent text plus the W worst queries (by margin, descending) and their
/// margins; candidates are truncated to the length cap.
inline std::vector<std::string> rewrite_candidates(const AttackState& state, const QuerySet& queries,
                                                   const AttackConfig& config, GenerationProvider& provider,
                                                   const PromptTemplates& prompts = PromptTemplates::defaults()) {
    if (state.per_query_margins.empty()) {
        throw UsageError("rewrite_candidates requires an evaluated attack state");
    }
    std::string worst =
        detail::format_worst_queries(state.per_query_margins, queries, config.worst_query_budget);

    std::vector<std::string> candidates;
    for (std::size_t c = 0; c < config.candidates_per_iteration; ++c) {
        std::uint64_t seed = detail::candidate_seed(config.seed, state.iteration + 1, c);
        GenerationRequest request;
        request.system_prompt = PromptTemplates::rewrite_system();
        request.user_prompt = render_template(prompts.rewrite_user,
                                              {{"current_description", state.current_description},
                                               {"worst_queries_with_margins", worst},
                                               {"max_chars", std::to_string(config.max_description_chars)},
                                               {"variant", std::to_string(seed % 997)},
                                               {"queries", ""}});
        request.seed = seed;
        request.temperature = 0.9;
        std::string text = truncate_at_sentence(trim_copy(provider.generate(request)), config.max_description_chars);
        if (!text.empty()) {
            candidates.push_back(std::move(text));
        }
    }
    if (candidates.empty()) {
        throw AllCandidatesInvalid();
    }
    return candidates;
}

struct AttackOutcome {
    AttackState state;
    Registry registry; // input registry with best_description installed on the malicious card
    QuerySet queries;  // the query set the attack optimized against
};

/// Full deceptive-description optimization: collect references, generate (or
/// take) the query set, synthesize an initial description, then hill-climb
/// with C rewrite candidates per iteration. A candidate replaces the
/// incumbent when its objective strictly improves, or stays equal while its
/// surrogate loss strictly drops; on full ties the incumbent stays. Provider
/// failures abort with the state so far (`state.aborted`), never losing the
/// trace.
inline AttackOutcome run_sdd_attack(const AttackConfig& config, const Registry& registry,
                                    const std::string& malicious_id, const BackendConfig& backend,
                                    GenerationProvider& generator, EmbeddingProvider* embedder = nullptr,
                                    const PromptTemplates& prompts = PromptTemplates::defaults(),
                                    const QuerySet* preset_queries = nullptr) {
    config.validate();
    backend.validate();
    registry.card(malicious_id); // UnknownAgentId if absent

    DescriptionSet refs = collect_domain_descriptions(registry, config.target_domain);

    AttackOutcome outcome;
    outcome.registry = registry;
    AttackState& state = outcome.state;

    try {
        if (preset_queries != nullptr) {
            outcome.queries = *preset_queries;
            outcome.queries.validate();
            if (outcome.queries.empty()) {
                throw UsageError("preset query set is empty");
            }
        } else {
            outcome.queries = generate_queries(refs, config.query_count, generator, prompts, config.seed);
        }

        state.initial_description = synthesize_initial_description(refs, generator, prompts,
                                                                   config.max_description_chars, config.seed);
        state.current_description = state.initial_description;
        auto [initial_loss, initial_margins] =
            surrogate_loss(state.current_description, outcome.queries, refs, backend, config.loss, embedder);
        state.per_query_margins = std::move(initial_margins);
        double incumbent_objective = objective_from_margins(state.per_query_margins);
        double incumbent_loss = initial_loss;
        state.objective_history.push_back(incumbent_objective);
        state.loss_history.push_back(incumbent_loss);
        state.best_description = state.current_description;
        state.best_objective = incumbent_objective;

        for (std::size_t n = 1; n <= config.max_iterations; ++n) {
            if (incumbent_objective >= config.early_stop_objective) {
                state.early_stopped = true;
                break;
            }
            std::vector<std::string> candidates = rewrite_candidates(state, outcome.queries, config, generator, prompts);

            IterationRecord record;
            record.iteration = n;
            int best_index = -1;
            double best_cand_objective = 0.0;
            double best_cand_loss = 0.0;
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                auto [cand_loss, cand_margins] =
                    surrogate_loss(candidates[c], outcome.queries, refs, backend, config.loss, embedder);
                double cand_objective = objective_from_margins(cand_margins);
                record.candidates.push_back({candidates[c], cand_objective, cand_loss, false});
                bool better_than_best =
                    best_index < 0 || cand_objective > best_cand_objective ||
                    (cand_objective == best_cand_objective && cand_loss < best_cand_loss);
                if (better_than_best) {
                    best_index = static_cast<int>(c);
                    best_cand_objective = cand_objective;
                    best_cand_loss = cand_loss;
                }
            }

            bool accept = best_cand_objective > incumbent_objective ||
                          (best_cand_objective == incumbent_objective && best_cand_loss < incumbent_loss);
            if (accept) {
                record.accepted_index = best_index;
                record.candidates[static_cast<std::size_t>(best_index)].accepted = true;
                state.current_description = candidates[static_cast<std::size_t>(best_index)];
                incumbent_objective = best_cand_objective;
                incumbent_loss = best_cand_loss;
                state.per_query_margins =
                    score_margins(state.current_description, outcome.queries, refs, backend, embedder);
            }

            state.iteration = n;
            state.objective_history.push_back(incumbent_objective);
            state.loss_history.push_back(incumbent_loss);
            if (incumbent_objective > state.best_objective) { // earliest description achieving the max is kept
                state.best_objective = incumbent_objective;
                state.best_description = state.current_description;
            }
            record.objective = incumbent_objective;
            record.loss = incumbent_loss;
            state.iterations.push_back(std::move(record));
        }
        if (!state.early_stopped && incumbent_objective >= config.early_stop_objective) {
            state.early_stopped = true;
        }
    } catch (const ProviderError& e) {
        state.aborted = true;
        state.abort_reason = e.what();
        return outcome;
    }

    outcome.registry = replace_description(registry, malicious_id, state.best_description);
    return outcome;
}

inline nlohmann::ordered_json attack_state_to_json(const AttackState& state) {
    nlohmann::ordered_json j;
    j["initial_description"] = state.initial_description;
    j["initial_objective"] = nlohmann::ordered_json();
    j["initial_loss"] = nlohmann::ordered_json();
    if (!state.objective_history.empty()) {
        j["initial_objective"] = state.objective_history.front();
        j["initial_loss"] = state.loss_history.front();
    }
    j["iterations"] = nlohmann::ordered_json::array();
    for (const auto& record : state.iterations) {
        nlohmann::ordered_json it;
        it["iteration"] = record.iteration;
        it["candidates"] = nlohmann::ordered_json::array();
        for (const auto& cand : record.candidates) {
            nlohmann::ordered_json c;
            c["text"] = cand.text;
            c["objective"] = cand.objective;
            c["loss"] = cand.loss;
            c["accepted"] = cand.accepted;
            it["candidates"].push_back(std::move(c));
        }
        it["accepted_index"] = record.accepted_index;
        it["objective"] = record.objective;
        it["loss"] = record.loss;
        j["iterations"].push_back(std::move(it));
    }
    j["objective_history"] = state.objective_history;
    j["loss_history"] = state.loss_history;
    j["best_objective"] = state.best_objective;
    j["best_description"] = state.best_description;
    j["final_description"] = state.current_description;
    j["early_stopped"] = state.early_stopped;
    j["aborted"] = state.aborted;
    j["abort_reason"] = state.abort_reason;
    return j;
}

} // namespace skillroute
