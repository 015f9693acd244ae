#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "skillroute/experiment.hpp"
#include "support/test_util.hpp"

using namespace skillroute;

namespace {

const char* kTestRegistry =
    R"({"agent_id": "f1", "name": "TaxHelp", "description": "tax filing for tax season and tax deductions", "domains": ["finance"]})"
    "\n"
    R"({"agent_id": "f2", "name": "AuditPro", "description": "tax audit support and budget planning", "domains": ["finance"]})"
    "\n"
    R"({"agent_id": "f3", "name": "Payday", "description": "payroll processing and invoice bookkeeping", "domains": ["finance"]})"
    "\n"
    R"({"agent_id": "h1", "name": "Archivist", "description": "archive research on treaty and empire records", "domains": ["history"]})"
    "\n"
    R"({"agent_id": "h2", "name": "Chronicler", "description": "dynasty timelines and empire chronology", "domains": ["history"]})"
    "\n"
    R"({"agent_id": "h3", "name": "RelicLab", "description": "relic cataloging and archive dating", "domains": ["history"]})"
    "\n";

std::filesystem::path write_test_config(const std::filesystem::path& dir, const std::string& output_subdir,
                                        std::uint64_t seed) {
    {
        std::ofstream reg(dir / "registry.jsonl", std::ios::binary);
        reg << kTestRegistry;
    }
    nlohmann::ordered_json j;
    j["registry_path"] = "registry.jsonl";
    j["domains"] = {"finance", "history"};
    j["backends"] = {nlohmann::ordered_json{{"kind", "bm25"}},
                     nlohmann::ordered_json{{"kind", "dense"}, {"model", "mock-bow-256"}}};
    j["strategies"] = {"sdd", "generic"};
    j["attack"] = nlohmann::ordered_json{{"query_count", 6},
                                         {"max_iterations", 3},
                                         {"candidates_per_iteration", 2},
                                         {"worst_query_budget", 3},
                                         {"early_stop_objective", 0.95}};
    j["query_source"] = "generate";
    j["output_dir"] = output_subdir;
    j["seed"] = seed;
    auto config_path = dir / ("config-" + output_subdir + ".json");
    std::ofstream out(config_path, std::ios::binary);
    out << j.dump(2) << "\n";
    out.close();
    return config_path;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("experiment config loads with resolved paths and strict fields") {
    testsupport::TempDir tmp("config");
    auto path = write_test_config(tmp.path(), "out", 5);
    ExperimentConfig config = ExperimentConfig::load(path);
    CHECK(config.registry_path == tmp.path() / "registry.jsonl");
    CHECK(config.output_dir == tmp.path() / "out");
    CHECK(config.seed == 5);
    CHECK(config.domains.size() == 2);
    CHECK(config.backends.size() == 2);
    CHECK(config.strategies == std::vector<Strategy>{Strategy::sdd, Strategy::generic});
    CHECK(config.attack.query_count == 6);
    CHECK_FALSE(config.config_digest.empty());

    // Unknown fields are rejected unless lenient.
    auto bad_path = tmp.path() / "bad.json";
    {
        std::ofstream out(bad_path);
        out << R"({"registry_path": "registry.jsonl", "domains": ["finance"], "backends": [{"kind": "bm25"}],)"
            << R"( "strategies": ["generic"], "output_dir": "out", "typo_field": 1})";
    }
    CHECK_THROWS_AS(ExperimentConfig::load(bad_path), UsageError);
    CHECK_NOTHROW(ExperimentConfig::load(bad_path, /*lenient=*/true));
}

TEST_CASE("resolve_backend maps labels onto configured backends") {
    testsupport::TempDir tmp("resolve");
    ExperimentConfig config = ExperimentConfig::load(write_test_config(tmp.path(), "out", 1));
    CHECK(resolve_backend(config, "bm25").kind == BackendKind::bm25);
    CHECK(resolve_backend(config, "mock-bow-256").kind == BackendKind::dense);
    BackendConfig other = resolve_backend(config, "some-model");
    CHECK(other.kind == BackendKind::dense);
    CHECK(other.model == "some-model");
}

TEST_CASE("sdd attack cell persists a complete audit trail") {
    testsupport::TempDir tmp("attackcell");
    ExperimentConfig config = ExperimentConfig::load(write_test_config(tmp.path(), "out", 11));
    CellSpec spec{"finance", config.backends[0], Strategy::sdd};

    run_attack_cell(config, spec, /*mock=*/true);
    auto dir = cell_dir(config, spec, true);
    REQUIRE(std::filesystem::exists(dir / "manifest.json"));
    REQUIRE(std::filesystem::exists(dir / "trace.json"));
    REQUIRE(std::filesystem::exists(dir / "queries.jsonl"));
    REQUIRE(std::filesystem::exists(dir / "description.txt"));
    REQUIRE(std::filesystem::exists(dir / "registry.jsonl"));
    CHECK(trace_valid(dir));

    nlohmann::json trace = nlohmann::json::parse(slurp(dir / "trace.json"));
    auto history = trace.at("objective_history").get<std::vector<double>>();
    REQUIRE(!history.empty());
    for (std::size_t i = 0; i + 1 < history.size(); ++i) {
        CHECK(history[i] <= history[i + 1]);
    }
    CHECK(trace.at("provider_calls").at("generation").get<int>() > 0);

    // Snapshot: benign cards byte-identical, malicious card carries the
    // installed description.
    Registry base = load_registry(config.registry_path);
    Registry snapshot = load_registry(dir / "registry.jsonl");
    REQUIRE(snapshot.size() == base.size() + 1);
    for (const auto& card : base.agents()) {
        CHECK(snapshot.card(card.agent_id).description == card.description);
    }
    CHECK(snapshot.card(config.malicious.agent_id).description == slurp(dir / "description.txt"));
    CHECK(snapshot.card(config.malicious.agent_id).is_malicious);

    nlohmann::json manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("backend") == "bm25");
    CHECK(manifest.at("strategy") == "sdd");
    CHECK(manifest.at("mock_providers") == true);
}

TEST_CASE("generic attack cell makes zero provider calls") {
    testsupport::TempDir tmp("genericcell");
    ExperimentConfig config = ExperimentConfig::load(write_test_config(tmp.path(), "out", 3));
    CellSpec spec{"history", config.backends[0], Strategy::generic};
    run_attack_cell(config, spec, true);

    auto dir = cell_dir(config, spec, true);
    nlohmann::json trace = nlohmann::json::parse(slurp(dir / "trace.json"));
    CHECK(trace.at("final_description") == "General-purpose assistant for history and related tasks.");
    CHECK(trace.at("provider_calls").at("generation") == 0);
    CHECK(trace.at("provider_calls").at("embedding") == 0);
    CHECK_FALSE(std::filesystem::exists(dir / "queries.jsonl")); // no attack queries for one-shot baselines
}

TEST_CASE("eval cell labels its query source") {
    testsupport::TempDir tmp("evalcell");
    ExperimentConfig config = ExperimentConfig::load(write_test_config(tmp.path(), "out", 17));

    CellSpec sdd_spec{"finance", config.backends[0], Strategy::sdd};
    run_attack_cell(config, sdd_spec, true);
    MetricsRow sdd_row = run_eval_cell(config, sdd_spec, true);
    CHECK(sdd_row.query_source == "attack_generated");
    CHECK(sdd_row.n_queries == 6);
    CHECK(metrics_valid(cell_dir(config, sdd_spec, true)));

    CellSpec gen_spec{"finance", config.backends[0], Strategy::generic};
    run_attack_cell(config, gen_spec, true);
    MetricsRow gen_row = run_eval_cell(config, gen_spec, true);
    CHECK(gen_row.query_source == "generated");
    CHECK(std::filesystem::exists(cell_dir(config, gen_spec, true) / "queries.jsonl"));

    // Held-out file.
    auto held_out = tmp.path() / "held.jsonl";
    {
        std::ofstream out(held_out);
        out << R"({"query_id": "h1", "text": "tax filing help"})" << "\n";
    }
    MetricsRow held_row = run_eval_cell(config, sdd_spec, true, held_out);
    CHECK(held_row.query_source == "file:" + held_out.string());
    CHECK(held_row.n_queries == 1);

    CellSpec missing{"finance", config.backends[0], Strategy::impersonation};
    CHECK_THROWS_AS(run_eval_cell(config, missing, true), MissingRunArtifacts);
}

TEST_CASE("sweep covers the grid, resumes, and reproduces byte-identical reports") {
    testsupport::TempDir tmp("sweep");
    auto config_path = write_test_config(tmp.path(), "out-a", 7);
    ExperimentConfig config = ExperimentConfig::load(config_path);

    std::ostringstream log;
    SweepResult first = cmd_sweep(config, /*mock=*/true, /*jobs=*/1, &log);
    CHECK(first.failures.empty());
    REQUIRE(first.rows.size() == 8); // 2 domains x 2 backends x 2 strategies
    REQUIRE(std::filesystem::exists(config.output_dir / "report.csv"));
    REQUIRE(std::filesystem::exists(config.output_dir / "report.json"));
    REQUIRE(std::filesystem::exists(config.output_dir / "plots" / "finance.json"));
    std::string csv_first = slurp(config.output_dir / "report.csv");

    // Resume: wipe one cell, keep another; only the wiped cell is recomputed.
    CellSpec wiped{"finance", config.backends[0], Strategy::sdd};
    CellSpec kept{"history", config.backends[1], Strategy::generic};
    auto kept_mtime = std::filesystem::last_write_time(cell_dir(config, kept, true) / "trace.json");
    std::filesystem::remove_all(cell_dir(config, wiped, true));

    SweepResult resumed = cmd_sweep(config, true, 1, nullptr);
    CHECK(resumed.failures.empty());
    CHECK(resumed.rows.size() == 8);
    CHECK(std::filesystem::last_write_time(cell_dir(config, kept, true) / "trace.json") == kept_mtime);
    CHECK(std::filesystem::exists(cell_dir(config, wiped, true) / "metrics.json"));
    CHECK(slurp(config.output_dir / "report.csv") == csv_first);

    // Identical config and seed into a fresh output directory: identical CSV.
    ExperimentConfig config_b = ExperimentConfig::load(write_test_config(tmp.path(), "out-b", 7));
    SweepResult second = cmd_sweep(config_b, true, 1, nullptr);
    CHECK(second.failures.empty());
    CHECK(slurp(config_b.output_dir / "report.csv") == csv_first);

    // Concurrency does not change the consolidated bytes.
    ExperimentConfig config_c = ExperimentConfig::load(write_test_config(tmp.path(), "out-c", 7));
    cmd_sweep(config_c, true, /*jobs=*/3, nullptr);
    CHECK(slurp(config_c.output_dir / "report.csv") == csv_first);

    // report re-consolidates from the persisted cells alone.
    std::filesystem::remove(config.output_dir / "report.csv");
    auto rows = cmd_report(config, true);
    CHECK(rows.size() == 8);
    CHECK(slurp(config.output_dir / "report.csv") == csv_first);
}
