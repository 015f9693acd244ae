#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "skillroute/attack.hpp"
#include "skillroute/baselines.hpp"
#include "skillroute/loss.hpp"
#include "skillroute/mock_provider.hpp"
#include "support/test_util.hpp"

using namespace skillroute;
using testsupport::make_card;

namespace {

DescriptionSet tax_refs() {
    DescriptionSet refs;
    refs.domain = "finance";
    refs.descriptions = {{"r1", "tax filing for tax season and tax deductions"},
                         {"r2", "tax audit support and tax planning"},
                         {"r3", "payroll tax reports and invoice bookkeeping"}};
    return refs;
}

QuerySet tax_queries(std::size_t n = 3) {
    QuerySet set;
    set.domain = "finance";
    const char* texts[] = {"help with tax filing", "need a tax audit", "payroll tax question",
                           "invoice bookkeeping request", "tax deductions advice"};
    for (std::size_t i = 0; i < n && i < 5; ++i) {
        set.queries.push_back({"q" + std::to_string(i + 1), texts[i]});
    }
    return set;
}

BackendConfig bm25_backend() { return BackendConfig{}; }

BackendConfig dense_backend() {
    BackendConfig backend;
    backend.kind = BackendKind::dense;
    backend.model = "mock-bow-256";
    return backend;
}

} // namespace

TEST_CASE("generate_queries produces exactly K distinct domain queries") {
    MockGenerationProvider provider(2);
    QuerySet set = generate_queries(tax_refs(), 5, provider);
    REQUIRE(set.size() == 5);
    std::set<std::string> texts;
    for (const auto& q : set.queries) {
        texts.insert(q.text);
        CHECK(to_lower_copy(q.text).find("tax") != std::string::npos);
    }
    CHECK(texts.size() == 5);
    CHECK(set.provenance == QueryProvenance::llm_generated);

    QuerySet one = generate_queries(tax_refs(), 1, provider);
    CHECK(one.size() == 1);

    QuerySet hundred = generate_queries(tax_refs(), 100, provider);
    CHECK(hundred.size() == 100);
}

TEST_CASE("generate_queries fails when the generator cannot diversify") {
    testsupport::ScriptedGenerationProvider stuck({"the same line\nthe same line"});
    CHECK_THROWS_AS(generate_queries(tax_refs(), 3, stuck), InsufficientDiversity);
}

TEST_CASE("synthesized initial description tracks the reference domain") {
    MockGenerationProvider provider;
    std::string d0 = synthesize_initial_description(tax_refs(), provider);
    CHECK(d0.find("tax") != std::string::npos);

    DescriptionSet single;
    single.domain = "law";
    single.descriptions = {{"r1", "contract drafting and contract review"}};
    std::string from_one = synthesize_initial_description(single, provider);
    CHECK(from_one.find("contract") != std::string::npos);

    // d0 sits closer to every finance reference than to an off-domain control.
    auto d0_vec = mock_embed(d0);
    double control = cosine_similarity(d0_vec, mock_embed("orbit comet quasar nebula"));
    for (const auto& [id, text] : tax_refs().descriptions) {
        (void)id;
        CHECK(cosine_similarity(d0_vec, mock_embed(text)) > control);
    }
}

TEST_CASE("synthesized description respects the length cap at sentence boundaries") {
    testsupport::ScriptedGenerationProvider wordy(
        {"First sentence about taxes. Second sentence about audits. Third sentence that overflows the cap."});
    std::string capped = synthesize_initial_description(tax_refs(), wordy, PromptTemplates::defaults(), 60);
    CHECK(capped.size() <= 60);
    CHECK(capped == "First sentence about taxes.");
}

TEST_CASE("attack objective is zero for token-disjoint descriptions under bm25") {
    CHECK(attack_objective("orbit comet quasar", tax_queries(), tax_refs(), bm25_backend()) == 0.0);
}

TEST_CASE("attack objective reaches one when the malicious text owns the queries") {
    DescriptionSet offdomain;
    offdomain.domain = "space";
    offdomain.descriptions = {{"r1", "orbit comet"}, {"r2", "quasar nebula"}};
    QuerySet queries = tax_queries(5);
    std::string everything;
    for (const auto& q : queries.queries) {
        everything += q.text + ". ";
    }
    CHECK(attack_objective(everything, queries, offdomain, bm25_backend()) == 1.0);

    // Brute-force verification of every per-query comparison over the same
    // corpus (references plus the malicious text).
    std::vector<std::vector<std::string>> corpus;
    for (const auto& [id, text] : offdomain.descriptions) {
        (void)id;
        corpus.push_back(tokenize(text));
    }
    corpus.push_back(tokenize(everything));
    for (const auto& q : queries.queries) {
        double malicious = testsupport::oracle_bm25(tokenize(q.text), corpus, corpus.size() - 1);
        for (std::size_t r = 0; r + 1 < corpus.size(); ++r) {
            REQUIRE(malicious > testsupport::oracle_bm25(tokenize(q.text), corpus, r));
        }
    }
}

TEST_CASE("an exact score tie counts as failure") {
    DescriptionSet refs;
    refs.domain = "finance";
    refs.descriptions = {{"r1", "tax audit ledger"}};
    QuerySet queries;
    queries.domain = "finance";
    queries.queries = {{"q1", "tax audit"}};
    MockEmbeddingProvider mock;
    // Identical text gives exactly equal scores under both backends.
    CHECK(attack_objective("tax audit ledger", queries, refs, dense_backend(), &mock) == 0.0);
    CHECK(attack_objective("tax audit ledger", queries, refs, bm25_backend()) == 0.0);
}

TEST_CASE("surrogate loss analytic values") {
    DescriptionSet refs;
    refs.domain = "finance";
    refs.descriptions = {{"r1", "tax audit ledger"}};
    QuerySet one_query;
    one_query.domain = "finance";
    one_query.queries = {{"q1", "tax audit"}};

    LossConfig margin0{LossKind::margin, 0.0, 5.0};
    auto [margin_total, margin_terms] =
        surrogate_loss("tax audit ledger", one_query, refs, bm25_backend(), margin0);
    REQUIRE(margin_terms.size() == 1);
    CHECK(margin_terms[0].margin == 0.0); // identical text, exact tie
    CHECK(margin_total == 0.0);

    LossConfig logistic1{LossKind::logistic, 0.0, 1.0};
    auto [log_total, log_terms] = surrogate_loss("tax audit ledger", one_query, refs, bm25_backend(), logistic1);
    (void)log_terms;
    CHECK(log_total == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("surrogate loss matches hand-summed terms on a 3-query bm25 fixture") {
    DescriptionSet refs = tax_refs();
    QuerySet queries = tax_queries(3);
    std::string d_m = "tax help with payroll";
    LossConfig logistic{LossKind::logistic, 0.0, 5.0};

    auto [total, per_query] = surrogate_loss(d_m, queries, refs, bm25_backend(), logistic);
    REQUIRE(per_query.size() == 3);

    std::vector<std::vector<std::string>> corpus;
    for (const auto& [id, text] : refs.descriptions) {
        (void)id;
        corpus.push_back(tokenize(text));
    }
    corpus.push_back(tokenize(d_m));
    double expected_total = 0.0;
    for (std::size_t i = 0; i < queries.queries.size(); ++i) {
        auto q_tokens = tokenize(queries.queries[i].text);
        double best_benign = 0.0;
        for (std::size_t r = 0; r + 1 < corpus.size(); ++r) {
            best_benign = std::max(best_benign, testsupport::oracle_bm25(q_tokens, corpus, r));
        }
        double x = best_benign - testsupport::oracle_bm25(q_tokens, corpus, corpus.size() - 1);
        CHECK(per_query[i].margin == Catch::Approx(x).margin(1e-12));
        expected_total += x > 0.0 ? 5.0 * x + std::log1p(std::exp(-5.0 * x)) : std::log1p(std::exp(5.0 * x));
    }
    CHECK(total == Catch::Approx(expected_total).margin(1e-12));
}

TEST_CASE("logistic loss strictly decreases when the malicious score rises") {
    LossConfig logistic{LossKind::logistic, 0.0, 5.0};
    CHECK(loss_term(logistic, 0.1) > loss_term(logistic, 0.05));
    CHECK(loss_term(logistic, -0.2) > loss_term(logistic, -0.3));
    CHECK(loss_term(logistic, 800.0) > loss_term(logistic, 700.0)); // no overflow
    CHECK(std::isfinite(loss_term(logistic, 1e6)));

    // End to end: appending a query token raises s(q, d_m) and lowers the
    // total, with benign scores fixed.
    DescriptionSet refs = tax_refs();
    QuerySet queries;
    queries.domain = "finance";
    queries.queries = {{"q1", "amortization schedule"}};
    MockEmbeddingProvider mock;
    auto [before, m1] = surrogate_loss("payroll ledger", queries, refs, dense_backend(), logistic, &mock);
    auto [after, m2] = surrogate_loss("payroll ledger amortization", queries, refs, dense_backend(), logistic, &mock);
    (void)m1;
    (void)m2;
    CHECK(after < before);
}

TEST_CASE("margin loss coherence with the objective") {
    LossConfig margin0{LossKind::margin, 0.0, 5.0};
    std::vector<QueryMargin> all_wins = {{"q1", -0.2}, {"q2", -0.01}};
    CHECK(objective_from_margins(all_wins) == 1.0);
    CHECK(loss_from_margins(margin0, all_wins) == 0.0);

    std::vector<QueryMargin> one_tie = {{"q1", -0.2}, {"q2", 0.0}};
    CHECK(objective_from_margins(one_tie) == 0.5);  // strict-win rule
    CHECK(loss_from_margins(margin0, one_tie) == 0.0);

    LossConfig margin_gamma{LossKind::margin, 0.5, 5.0};
    CHECK(loss_from_margins(margin_gamma, {{"q1", -0.5}}) == 0.0);
    CHECK(loss_from_margins(margin_gamma, {{"q1", -0.4}}) == Catch::Approx(0.1).margin(1e-12));
}

TEST_CASE("rewrite candidates carry the worst query's top token") {
    AttackState state;
    state.current_description = "Bookkeeping help.";
    state.per_query_margins = {{"q1", 0.9}, {"q2", 0.1}, {"q3", -0.4}};
    QuerySet queries;
    queries.domain = "finance";
    queries.queries = {{"q1", "please get help with amortization"},
                       {"q2", "ledger reconciliation"},
                       {"q3", "budget planning"}};
    AttackConfig config;
    config.target_domain = "finance";
    config.worst_query_budget = 1; // only the worst query reaches the prompt
    config.candidates_per_iteration = 3;
    MockGenerationProvider provider;

    auto candidates = rewrite_candidates(state, queries, config, provider);
    REQUIRE(candidates.size() == 3);
    for (const auto& cand : candidates) {
        CHECK(cand.find("amortization") != std::string::npos);
        CHECK(cand.rfind("Bookkeeping help.", 0) == 0);
    }

    config.candidates_per_iteration = 1;
    CHECK(rewrite_candidates(state, queries, config, provider).size() == 1);

    config.worst_query_budget = 50; // larger than |Q|: clamp, no error
    CHECK_NOTHROW(rewrite_candidates(state, queries, config, provider));
}

namespace {

Registry attack_registry() {
    std::vector<AgentCard> cards;
    cards.push_back(make_card("f1", "tax filing for tax season and tax deductions", {"finance"}));
    cards.push_back(make_card("f2", "tax audit support and tax planning", {"finance"}));
    cards.push_back(make_card("f3", "payroll tax reports and invoice bookkeeping", {"finance"}));
    cards.push_back(make_card("f4", "budget forecasts and expense tracking", {"finance"}));
    cards.push_back(make_card("f5", "loan comparison and amortization schedules", {"finance"}));
    cards.push_back(make_card("h1", "medieval archive research", {"history"}));
    cards.push_back(make_card("mal", "Pending registration.", {"finance"}, true));
    return Registry::from_cards(std::move(cards));
}

AttackConfig small_attack(std::uint64_t seed = 0) {
    AttackConfig config;
    config.target_domain = "finance";
    config.query_count = 10;
    config.max_iterations = 10;
    config.candidates_per_iteration = 3;
    config.worst_query_budget = 5;
    config.seed = seed;
    return config;
}

} // namespace

TEST_CASE("run_sdd_attack with zero iterations evaluates only the initial description") {
    MockGenerationProvider provider(1);
    AttackConfig config = small_attack();
    config.max_iterations = 0;
    AttackOutcome outcome = run_sdd_attack(config, attack_registry(), "mal", bm25_backend(), provider);
    CHECK_FALSE(outcome.state.aborted);
    CHECK(outcome.state.iterations.empty());
    REQUIRE(outcome.state.objective_history.size() == 1);
    CHECK(outcome.state.current_description == outcome.state.initial_description);
    CHECK(outcome.state.best_description == outcome.state.initial_description);
}

TEST_CASE("run_sdd_attack stops immediately when the threshold is already met") {
    MockGenerationProvider provider(1);
    AttackConfig config = small_attack();
    config.early_stop_objective = 0.0;
    AttackOutcome outcome = run_sdd_attack(config, attack_registry(), "mal", bm25_backend(), provider);
    CHECK(outcome.state.early_stopped);
    CHECK(outcome.state.iterations.empty());
    CHECK(outcome.state.objective_history.size() == 1);
}

TEST_CASE("accepted objectives never decrease and the best is installed") {
    Registry reg = attack_registry();
    std::vector<std::string> benign_before;
    for (const auto& card : reg.agents()) {
        if (!card.is_malicious) {
            benign_before.push_back(card.description);
        }
    }

    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL, 3ULL, 4ULL}) {
        MockGenerationProvider provider(seed);
        AttackOutcome outcome = run_sdd_attack(small_attack(seed), reg, "mal", bm25_backend(), provider);
        REQUIRE_FALSE(outcome.state.aborted);

        const auto& history = outcome.state.objective_history;
        REQUIRE(!history.empty());
        for (std::size_t i = 0; i + 1 < history.size(); ++i) {
            REQUIRE(history[i] <= history[i + 1]);
        }
        CHECK(outcome.state.best_objective == *std::max_element(history.begin(), history.end()));
        CHECK(outcome.state.best_objective >= history.front());
        CHECK(outcome.registry.card("mal").description == outcome.state.best_description);

        // Benign cards are byte-identical to their pre-attack values.
        std::size_t b = 0;
        for (const auto& card : outcome.registry.agents()) {
            if (!card.is_malicious) {
                REQUIRE(card.description == benign_before[b++]);
            }
        }
    }
}

TEST_CASE("candidate acceptance can descend the loss across an objective plateau") {
    MockGenerationProvider provider(3);
    AttackConfig config = small_attack(3);
    config.max_iterations = 6;
    AttackOutcome outcome = run_sdd_attack(config, attack_registry(), "mal", bm25_backend(), provider);
    REQUIRE_FALSE(outcome.state.aborted);
    // Whenever a candidate was accepted without improving the objective, its
    // loss must have strictly dropped.
    for (std::size_t i = 0; i < outcome.state.iterations.size(); ++i) {
        const auto& record = outcome.state.iterations[i];
        double prev_obj = outcome.state.objective_history[record.iteration - 1];
        double prev_loss = outcome.state.loss_history[record.iteration - 1];
        if (record.accepted_index >= 0 && record.objective == prev_obj) {
            REQUIRE(record.loss < prev_loss);
        }
        if (record.accepted_index < 0) {
            REQUIRE(record.objective == prev_obj);
            REQUIRE(record.loss == prev_loss);
        }
    }
}

TEST_CASE("provider failure aborts with the state so far") {
    testsupport::FailingGenerationProvider failing;
    AttackOutcome outcome = run_sdd_attack(small_attack(), attack_registry(), "mal", bm25_backend(), failing);
    CHECK(outcome.state.aborted);
    CHECK_FALSE(outcome.state.abort_reason.empty());
    CHECK(content_equal(outcome.registry, attack_registry()));
}

TEST_CASE("run_sdd_attack validates its inputs") {
    MockGenerationProvider provider;
    AttackConfig config = small_attack();
    config.target_domain = "astrology";
    CHECK_THROWS_AS(run_sdd_attack(config, attack_registry(), "mal", bm25_backend(), provider), EmptyDomain);
    CHECK_THROWS_AS(run_sdd_attack(small_attack(), attack_registry(), "ghost", bm25_backend(), provider),
                    UnknownAgentId);
}

TEST_CASE("baseline descriptions") {
    MockGenerationProvider generator;
    DescriptionSet refs;
    refs.domain = "medicine";
    refs.descriptions = {{"r1", "diagnosis support and diagnosis triage"},
                         {"r2", "diagnosis review with dosage checks"},
                         {"r3", "therapy scheduling for patients"}};

    SECTION("generic is the exact fixed template") {
        auto result = baseline_description(Strategy::generic, refs, "law");
        CHECK(result.description == "General-purpose assistant for law and related tasks.");
        CHECK_FALSE(result.mimic_agent_id.has_value());
    }

    SECTION("keyword stuffing leads with the top-frequency token") {
        auto result = baseline_description(Strategy::keyword_stuffing, refs, "medicine");
        CHECK(result.description.rfind("diagnosis", 0) == 0);
        CHECK(result.description.find("dosage") != std::string::npos);
    }

    SECTION("exaggeration wraps a provider summary in superlatives") {
        auto result = baseline_description(Strategy::exaggeration, refs, "medicine", &generator);
        CHECK(result.description.find("diagnosis") != std::string::npos);
        CHECK(result.description.find("world") != std::string::npos);
    }

    SECTION("impersonation copies the centroid-closest reference verbatim") {
        DescriptionSet trio;
        trio.domain = "finance";
        trio.descriptions = {{"r1", "tax audit ledger"}, {"r2", "tax audit invoice"}, {"r3", "orbit comet quasar"}};
        auto result = baseline_description(Strategy::impersonation, trio, "finance");
        REQUIRE(result.mimic_agent_id.has_value());
        CHECK(*result.mimic_agent_id == "r1"); // tie between r1/r2 resolves to the earlier card
        bool verbatim = false;
        for (const auto& [id, text] : trio.descriptions) {
            (void)id;
            verbatim |= result.description == text;
        }
        CHECK(verbatim);
    }

    SECTION("sdd is rejected as a baseline") {
        CHECK_THROWS_AS(baseline_description(Strategy::sdd, refs, "medicine"), UsageError);
    }

    SECTION("strategy names round-trip") {
        CHECK(strategy_from_name("keyword_stuffing") == Strategy::keyword_stuffing);
        CHECK_THROWS_AS(strategy_from_name("hypnosis"), UsageError);
    }
}
