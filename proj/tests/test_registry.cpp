#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "skillroute/registry.hpp"
#include "support/test_util.hpp"

using namespace skillroute;
using testsupport::make_card;

namespace {

std::string three_line_registry() {
    return R"({"agent_id": "a1", "name": "Alpha", "description": "first helper", "domains": ["finance"]})"
           "\n"
           R"({"agent_id": "a2", "name": "Beta", "description": "second helper"})"
           "\n"
           R"({"agent_id": "a3", "name": "Gamma", "description": "third helper", "is_malicious": true})"
           "\n";
}

} // namespace

TEST_CASE("parse_registry ingests valid lines in order") {
    Registry reg = parse_registry(three_line_registry());
    REQUIRE(reg.size() == 3);
    CHECK(reg.agents()[0].agent_id == "a1");
    CHECK(reg.agents()[1].agent_id == "a2");
    CHECK(reg.agents()[2].agent_id == "a3");
    CHECK(reg.agents()[0].has_domain("finance"));
    CHECK(reg.agents()[2].is_malicious);
    CHECK_FALSE(reg.source_digest().empty());
}

TEST_CASE("parse_registry rejects duplicates naming the id and both lines") {
    std::string content = three_line_registry() +
                          R"({"agent_id": "a2", "name": "Dup", "description": "again"})"
                          "\n";
    try {
        parse_registry(content);
        FAIL("expected DuplicateAgentId");
    } catch (const DuplicateAgentId& e) {
        CHECK(e.agent_id() == "a2");
        CHECK(std::string(e.what()).find("2") != std::string::npos);
        CHECK(std::string(e.what()).find("4") != std::string::npos);
    }
}

TEST_CASE("parse_registry error cases") {
    CHECK_THROWS_AS(parse_registry(""), EmptyRegistry);
    CHECK_THROWS_AS(parse_registry("not json\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_registry(R"({"agent_id": "x", "name": "X"})" "\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_registry(R"({"agent_id": "x", "name": "X", "description": "   "})" "\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_registry(R"({"agent_id": "", "name": "X", "description": "y"})" "\n"), MalformedRecord);
    CHECK_THROWS_AS(parse_registry(R"({"agent_id": "x", "name": "X", "description": "y", "domains": "finance"})" "\n"),
                    MalformedRecord);
}

TEST_CASE("unknown fields are rejected in strict mode and kept out in lenient mode") {
    std::string content = R"({"agent_id": "x", "name": "X", "description": "y", "extra": 1})" "\n";
    CHECK_THROWS_AS(parse_registry(content), MalformedRecord);
    Registry reg = parse_registry(content, /*lenient=*/true);
    CHECK(reg.size() == 1);
}

TEST_CASE("malformed record reports its line number") {
    std::string content = three_line_registry() + "oops\n";
    try {
        parse_registry(content);
        FAIL("expected MalformedRecord");
    } catch (const MalformedRecord& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("inject_agent appends one card and leaves the input untouched") {
    Registry reg = parse_registry(three_line_registry());
    Registry bigger = inject_agent(reg, make_card("a4", "fourth helper"));
    CHECK(reg.size() == 3);
    REQUIRE(bigger.size() == 4);
    CHECK(bigger.agents()[3].agent_id == "a4");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(bigger.agents()[i] == reg.agents()[i]);
    }
    CHECK_THROWS_AS(inject_agent(bigger, make_card("a1", "imposter")), DuplicateAgentId);

    Registry empty;
    Registry one = inject_agent(empty, make_card("solo", "only card"));
    CHECK(one.size() == 1);
}

TEST_CASE("a 527-card pool grows to 528 candidates on injection") {
    std::vector<AgentCard> cards;
    for (int i = 0; i < 527; ++i) {
        cards.push_back(make_card("agent-" + std::to_string(i), "benign service number " + std::to_string(i)));
    }
    Registry pool = Registry::from_cards(std::move(cards));
    REQUIRE(pool.size() == 527);
    Registry with_malicious = inject_agent(pool, make_card("mal-1", "pending", {}, true));
    CHECK(with_malicious.size() == 528);
}

TEST_CASE("replace_description swaps exactly one description") {
    Registry reg = parse_registry(three_line_registry());
    std::string original = reg.card("a3").description;

    Registry step1 = replace_description(reg, "a3", "optimized text v1");
    CHECK(step1.card("a3").description == "optimized text v1");
    CHECK(step1.card("a1").description == reg.card("a1").description);
    CHECK(step1.card("a2").description == reg.card("a2").description);

    Registry step2 = replace_description(step1, "a3", original);
    CHECK(content_equal(step2, reg));

    CHECK_THROWS_AS(replace_description(reg, "nope", "text"), UnknownAgentId);
    CHECK_THROWS_AS(replace_description(reg, "a3", "   \t  "), EmptyDescription);
}

TEST_CASE("collect_domain_descriptions excludes malicious cards and respects order") {
    std::vector<AgentCard> cards;
    cards.push_back(make_card("m1", "medical helper one", {"medicine"}));
    cards.push_back(make_card("f1", "finance helper one", {"finance"}));
    cards.push_back(make_card("m2", "medical helper two", {"medicine"}));
    cards.push_back(make_card("m3", "medical helper three", {"medicine"}));
    cards.push_back(make_card("m4", "medical helper four", {"medicine"}));
    cards.push_back(make_card("evil", "fake medical helper", {"medicine"}, true));
    Registry reg = Registry::from_cards(std::move(cards));

    DescriptionSet set = collect_domain_descriptions(reg, "medicine");
    REQUIRE(set.size() == 4);
    CHECK(set.descriptions[0].first == "m1");
    CHECK(set.descriptions[1].first == "m2");
    CHECK(set.descriptions[2].first == "m3");
    CHECK(set.descriptions[3].first == "m4");

    DescriptionSet fin = collect_domain_descriptions(reg, "FINANCE"); // tags are case-normalized
    CHECK(fin.size() == 1);

    CHECK_THROWS_AS(collect_domain_descriptions(reg, "astrology"), EmptyDomain);
}

TEST_CASE("serialize/parse round trip preserves content") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        std::uniform_int_distribution<std::size_t> n_cards(1, 12);
        std::vector<AgentCard> cards;
        std::size_t n = n_cards(rng);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::string> domains;
            if (rng() % 2 == 0) {
                domains.push_back(testsupport::small_vocab()[rng() % 5]);
            }
            cards.push_back(make_card("id-" + std::to_string(i), testsupport::random_text(rng, 1, 10), domains,
                                      rng() % 5 == 0));
        }
        Registry reg = Registry::from_cards(std::move(cards));
        Registry round = parse_registry(serialize_registry(reg));
        REQUIRE(content_equal(round, reg));
    }
}

TEST_CASE("load_registry reads files and validate_registry_file collects all issues") {
    testsupport::TempDir tmp("registry");
    auto path = tmp.path() / "reg.jsonl";
    {
        std::ofstream out(path);
        out << three_line_registry();
        out << "broken json\n";
        out << R"({"agent_id": "a1", "name": "Dup", "description": "dup id"})" << "\n";
        out << R"({"agent_id": "a9", "name": "NoDesc", "description": ""})" << "\n";
    }
    CHECK_THROWS_AS(load_registry(path), MalformedRecord);

    RegistryDiagnostics diag = validate_registry_file(path);
    CHECK(diag.card_count == 3);
    REQUIRE(diag.issues.size() == 3);
    CHECK(diag.issues[0].line == 4);
    CHECK(diag.issues[1].line == 5);
    CHECK(diag.issues[1].message.find("a1") != std::string::npos);
    CHECK(diag.issues[2].line == 6);
    CHECK_FALSE(diag.ok());

    CHECK_THROWS_AS(load_registry(tmp.path() / "missing.jsonl"), IoFailure);
}

TEST_CASE("domain tags are normalized to lowercase unique sets") {
    AgentCard card = make_card("x", "text", {"Finance", "LAW", "finance", " law "});
    Registry reg = Registry::from_cards({card});
    const auto& domains = reg.agents()[0].domains;
    REQUIRE(domains == std::vector<std::string>{"finance", "law"});
    CHECK(reg.agents()[0].has_domain("Finance"));
}
