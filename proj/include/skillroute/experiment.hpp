#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillroute/attack.hpp"
#include "skillroute/baselines.hpp"
#include "skillroute/embedding_cache.hpp"
#include "skillroute/errors.hpp"
#include "skillroute/http_provider.hpp"
#include "skillroute/metrics.hpp"
#include "skillroute/mock_provider.hpp"
#include "skillroute/prompts.hpp"
#include "skillroute/query_set.hpp"
#include "skillroute/registry.hpp"
#include "skillroute/report.hpp"
#include "skillroute/router.hpp"

namespace skillroute {

inline constexpr const char* kVersion = "0.1.0";

struct MaliciousAgentConfig {
    std::string agent_id = "malicious-001";
    std::string name = "Omni Task Services";
};

/// Full experiment description, loadable from a JSON config file. Relative
/// paths resolve against the config file's directory.
struct ExperimentConfig {
    std::filesystem::path registry_path;
    std::vector<std::string> domains;
    std::vector<BackendConfig> backends;
    std::vector<Strategy> strategies;
    AttackConfig attack; // target_domain and seed are filled per cell
    ProviderConfig embedding_provider;
    ProviderConfig generation_provider;
    std::string query_source = "generate"; // "generate" or "file:<path>"
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    MaliciousAgentConfig malicious;
    std::vector<std::size_t> k_list = {3, 5};
    std::filesystem::path cache_path; // empty: in-memory cache only
    std::filesystem::path prompt_dir; // empty: built-in templates
    bool lenient = false;
    std::string config_digest; // sha256 of the config file bytes

    static ExperimentConfig load(const std::filesystem::path& path, bool lenient_flag = false);

    void validate() const {
        if (registry_path.empty()) {
            throw UsageError("config: registry_path is required");
        }
        if (domains.empty() || backends.empty() || strategies.empty()) {
            throw UsageError("config: domains, backends and strategies must be nonempty");
        }
        if (output_dir.empty()) {
            throw UsageError("config: output_dir is required");
        }
        for (const auto& backend : backends) {
            backend.validate();
        }
        if (query_source != "generate" && query_source.rfind("file:", 0) != 0) {
            throw UsageError("config: query_source must be \"generate\" or \"file:<path>\"");
        }
        if (k_list.empty()) {
            throw UsageError("config: k_list must be nonempty");
        }
    }

    PromptTemplates prompts() const {
        return prompt_dir.empty() ? PromptTemplates::defaults() : PromptTemplates::load_dir(prompt_dir);
    }

    std::optional<std::filesystem::path> query_file() const {
        if (query_source.rfind("file:", 0) == 0) {
            return std::filesystem::path(query_source.substr(5));
        }
        return std::nullopt;
    }
};

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) {
        return p;
    }
    return base / p;
}

inline BackendConfig parse_backend(const nlohmann::json& j) {
    BackendConfig backend;
    std::string kind = j.value("kind", "bm25");
    if (kind == "bm25") {
        backend.kind = BackendKind::bm25;
    } else if (kind == "dense") {
        backend.kind = BackendKind::dense;
    } else {
        throw UsageError("config: backend kind must be \"bm25\" or \"dense\", got \"" + kind + "\"");
    }
    backend.k1 = j.value("k1", 1.2);
    backend.b = j.value("b", 0.75);
    backend.model = j.value("model", std::string());
    backend.provider = j.value("provider", std::string());
    backend.validate();
    return backend;
}

inline ProviderConfig parse_provider(const nlohmann::json& j) {
    ProviderConfig provider;
    provider.base_url = j.value("base_url", std::string());
    provider.model_id = j.value("model_id", std::string());
    provider.api_key_env = j.value("api_key_env", std::string());
    provider.timeout_seconds = j.value("timeout_seconds", 30.0);
    provider.max_retries = j.value("max_retries", 2);
    provider.request_batch_size = j.value("request_batch_size", std::size_t{16});
    return provider;
}

inline LossConfig parse_loss(const nlohmann::json& j) {
    LossConfig loss;
    std::string kind = j.value("kind", "logistic");
    if (kind == "margin") {
        loss.kind = LossKind::margin;
    } else if (kind == "logistic") {
        loss.kind = LossKind::logistic;
    } else {
        throw UsageError("config: loss kind must be \"margin\" or \"logistic\"");
    }
    loss.margin_gamma = j.value("margin_gamma", 0.0);
    loss.beta = j.value("beta", 5.0);
    loss.validate();
    return loss;
}

inline AttackConfig parse_attack(const nlohmann::json& j) {
    AttackConfig attack;
    attack.query_count = j.value("query_count", std::size_t{100});
    attack.max_iterations = j.value("max_iterations", std::size_t{10});
    attack.candidates_per_iteration = j.value("candidates_per_iteration", std::size_t{3});
    attack.worst_query_budget = j.value("worst_query_budget", std::size_t{5});
    attack.early_stop_objective = j.value("early_stop_objective", 0.95);
    attack.max_description_chars = j.value("max_description_chars", std::size_t{1500});
    if (j.contains("loss")) {
        attack.loss = parse_loss(j.at("loss"));
    }
    return attack;
}

inline std::string sanitize_label(std::string_view label) {
    std::string out;
    for (char c : label) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '-' ||
                  c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "_" : out;
}

inline std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

} // namespace detail

inline ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path, bool lenient_flag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open config file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string content = buf.str();

    nlohmann::json j = nlohmann::json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw UsageError("config file is not a JSON object: " + path.string());
    }
    static const char* known[] = {"registry_path", "domains",     "backends",  "strategies", "attack",
                                  "providers",     "query_source", "output_dir", "seed",      "malicious_agent",
                                  "k_list",        "cache_path",  "prompt_dir", "lenient"};
    if (!lenient_flag) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::find_if(std::begin(known), std::end(known),
                             [&](const char* k) { return it.key() == k; }) == std::end(known)) {
                throw UsageError("config: unknown field \"" + it.key() + "\" (use --lenient to ignore)");
            }
        }
    }

    ExperimentConfig config;
    config.config_digest = sha256_hex(content);
    std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    config.registry_path = detail::resolve_path(base, j.value("registry_path", std::string()));
    config.domains = j.value("domains", std::vector<std::string>{});
    if (j.contains("backends")) {
        for (const auto& bj : j.at("backends")) {
            config.backends.push_back(detail::parse_backend(bj));
        }
    }
    if (j.contains("strategies")) {
        for (const auto& sj : j.at("strategies")) {
            config.strategies.push_back(strategy_from_name(sj.get<std::string>()));
        }
    }
    if (j.contains("attack")) {
        config.attack = detail::parse_attack(j.at("attack"));
    }
    if (j.contains("providers")) {
        const auto& pj = j.at("providers");
        if (pj.contains("embedding")) {
            config.embedding_provider = detail::parse_provider(pj.at("embedding"));
        }
        if (pj.contains("generation")) {
            config.generation_provider = detail::parse_provider(pj.at("generation"));
        }
    }
    config.query_source = j.value("query_source", std::string("generate"));
    if (auto qf = config.query_file()) {
        config.query_source = "file:" + detail::resolve_path(base, *qf).string();
    }
    config.output_dir = detail::resolve_path(base, j.value("output_dir", std::string()));
    config.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("malicious_agent")) {
        config.malicious.agent_id = j.at("malicious_agent").value("agent_id", config.malicious.agent_id);
        config.malicious.name = j.at("malicious_agent").value("name", config.malicious.name);
    }
    config.k_list = j.value("k_list", std::vector<std::size_t>{3, 5});
    config.cache_path = detail::resolve_path(base, j.value("cache_path", std::string()));
    config.prompt_dir = detail::resolve_path(base, j.value("prompt_dir", std::string()));
    config.lenient = lenient_flag || j.value("lenient", false);
    config.validate();
    return config;
}

// -- providers with call counting ---------------------------------------------

class CountingEmbeddingProvider : public EmbeddingProvider {
public:
    explicit CountingEmbeddingProvider(std::unique_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        ++calls_;
        return inner_->embed_batch(texts);
    }

    std::string model_id() const override { return inner_->model_id(); }
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::unique_ptr<EmbeddingProvider> inner_;
    std::atomic<std::size_t> calls_{0};
};

class CountingGenerationProvider : public GenerationProvider {
public:
    explicit CountingGenerationProvider(std::unique_ptr<GenerationProvider> inner) : inner_(std::move(inner)) {}

    std::string generate(const GenerationRequest& request) override {
        ++calls_;
        return inner_->generate(request);
    }

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::unique_ptr<GenerationProvider> inner_;
    std::atomic<std::size_t> calls_{0};
};

// -- cells ---------------------------------------------------------------------

struct CellSpec {
    std::string domain;
    BackendConfig backend;
    Strategy strategy = Strategy::none;
};

/// With mock providers a dense backend always runs the mock embedder, so the
/// recorded backend id reflects what actually scored the run.
inline BackendConfig effective_backend(const BackendConfig& backend, bool mock) {
    BackendConfig eff = backend;
    if (mock && eff.kind == BackendKind::dense) {
        eff.model = MockEmbeddingProvider().model_id();
    }
    return eff;
}

inline std::filesystem::path cell_dir(const ExperimentConfig& config, const CellSpec& spec, bool mock) {
    return config.output_dir / detail::sanitize_label(spec.domain) /
           detail::sanitize_label(effective_backend(spec.backend, mock).backend_id()) /
           detail::sanitize_label(strategy_name(spec.strategy));
}

inline std::uint64_t cell_seed(const ExperimentConfig& config, const CellSpec& spec, bool mock) {
    std::string material = "cell|" + spec.domain + "|" + effective_backend(spec.backend, mock).backend_id() + "|" +
                           strategy_name(spec.strategy);
    return config.seed ^ fnv1a64(material);
}

/// All cells in one domain share this seed so every strategy and backend is
/// evaluated against the same generated query set.
inline std::uint64_t query_seed(const ExperimentConfig& config, const std::string& domain) {
    return config.seed ^ fnv1a64("queries|" + domain);
}

struct CellProviders {
    std::shared_ptr<EmbeddingCache> cache;
    std::unique_ptr<CountingEmbeddingProvider> embedder; // null for bm25 backends
    std::unique_ptr<CountingGenerationProvider> generator;
};

inline CellProviders make_cell_providers(const ExperimentConfig& config, const CellSpec& spec, bool mock,
                                         std::uint64_t seed, std::shared_ptr<EmbeddingCache> shared_cache) {
    CellProviders providers;
    providers.cache = std::move(shared_cache);
    if (mock) {
        providers.generator = std::make_unique<CountingGenerationProvider>(std::make_unique<MockGenerationProvider>(seed));
    } else {
        providers.generator =
            std::make_unique<CountingGenerationProvider>(std::make_unique<HttpGenerationProvider>(config.generation_provider));
    }
    if (spec.backend.kind == BackendKind::dense) {
        if (mock) {
            providers.embedder = std::make_unique<CountingEmbeddingProvider>(std::make_unique<MockEmbeddingProvider>());
        } else {
            ProviderConfig provider_config = config.embedding_provider;
            if (!spec.backend.model.empty()) {
                provider_config.model_id = spec.backend.model;
            }
            providers.embedder = std::make_unique<CountingEmbeddingProvider>(
                std::make_unique<HttpEmbeddingProvider>(provider_config, providers.cache));
        }
    }
    return providers;
}

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) {
        throw IoFailure("invalid JSON in " + path.string());
    }
    return j;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace detail

/// True when the cell's attack artifacts exist and describe a completed,
/// non-aborted attack.
inline bool trace_valid(const std::filesystem::path& dir) {
    auto trace_path = dir / "trace.json";
    if (!std::filesystem::exists(trace_path) || !std::filesystem::exists(dir / "description.txt") ||
        !std::filesystem::exists(dir / "registry.jsonl")) {
        return false;
    }
    try {
        nlohmann::json trace = detail::read_json_file(trace_path);
        return !trace.value("aborted", true) && !trace.value("final_description", std::string()).empty();
    } catch (const Error&) {
        return false;
    }
}

inline bool metrics_valid(const std::filesystem::path& dir) {
    auto metrics_path = dir / "metrics.json";
    if (!std::filesystem::exists(metrics_path)) {
        return false;
    }
    try {
        metrics_row_from_json(detail::read_json_file(metrics_path));
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

inline nlohmann::ordered_json provider_calls(const CellProviders& providers) {
    nlohmann::ordered_json j;
    j["generation"] = providers.generator ? providers.generator->calls() : 0;
    j["embedding"] = providers.embedder ? providers.embedder->calls() : 0;
    return j;
}

/// Runs the attack stage of one cell and persists its artifacts:
/// manifest.json, queries.jsonl (the optimization queries, sdd only),
/// trace.json, description.txt and the injected-registry snapshot
/// registry.jsonl. On provider failure the partial trace is persisted before
/// the error propagates.
inline void run_attack_cell(const ExperimentConfig& config, const CellSpec& spec, bool mock) {
    BackendConfig backend = effective_backend(spec.backend, mock);
    std::uint64_t seed = cell_seed(config, spec, mock);
    std::filesystem::path dir = cell_dir(config, spec, mock);
    std::filesystem::create_directories(dir);

    auto shared_cache = config.cache_path.empty() || mock
                            ? std::make_shared<EmbeddingCache>()
                            : std::make_shared<EmbeddingCache>(config.cache_path);
    CellProviders providers = make_cell_providers(config, spec, mock, seed, shared_cache);
    PromptTemplates prompts = config.prompts();

    Registry base = load_registry(config.registry_path, config.lenient);
    DescriptionSet refs = collect_domain_descriptions(base, spec.domain);

    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["config_digest"] = config.config_digest;
    manifest["domain"] = spec.domain;
    manifest["backend"] = backend.backend_id();
    manifest["strategy"] = strategy_name(spec.strategy);
    manifest["cell_seed"] = seed;
    manifest["query_seed"] = query_seed(config, spec.domain);
    manifest["mock_providers"] = mock;
    manifest["embedding_model"] = providers.embedder ? providers.embedder->model_id() : "";
    manifest["generation_model"] = mock ? "mock-gen" : config.generation_provider.model_id;
    manifest["registry_digest"] = base.source_digest();
    manifest["created_at"] = detail::timestamp_utc();

    AgentCard card;
    card.agent_id = config.malicious.agent_id;
    card.name = config.malicious.name;
    card.description = "Pending registration.";
    card.domains = {to_lower_copy(spec.domain)};
    card.is_malicious = true;

    auto write_trace_and_finish = [&](const nlohmann::ordered_json& trace, const std::string& description,
                                      const Registry* final_registry) {
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
        write_text_file(dir / "trace.json", trace.dump(2) + "\n");
        if (final_registry != nullptr) {
            write_text_file(dir / "description.txt", description);
            write_text_file(dir / "registry.jsonl", serialize_registry(*final_registry));
        }
    };

    if (spec.strategy == Strategy::sdd) {
        AttackConfig attack = config.attack;
        attack.target_domain = spec.domain;
        attack.seed = seed;

        Registry injected = inject_agent(base, card);
        QuerySet queries;
        AttackOutcome outcome;
        try {
            queries = generate_queries(refs, attack.query_count, *providers.generator, prompts,
                                       query_seed(config, spec.domain));
            save_query_set(queries, dir / "queries.jsonl");
            outcome = run_sdd_attack(attack, injected, config.malicious.agent_id, backend, *providers.generator,
                                     providers.embedder.get(), prompts, &queries);
        } catch (const ProviderError& e) {
            nlohmann::ordered_json trace;
            trace["strategy"] = "sdd";
            trace["aborted"] = true;
            trace["abort_reason"] = e.what();
            trace["provider_calls"] = provider_calls(providers);
            write_trace_and_finish(trace, "", nullptr);
            throw;
        }

        nlohmann::ordered_json trace = attack_state_to_json(outcome.state);
        trace["strategy"] = "sdd";
        trace["provider_calls"] = provider_calls(providers);
        if (outcome.state.aborted) {
            write_trace_and_finish(trace, "", nullptr);
            throw ProviderUnreachable("attack aborted: " + outcome.state.abort_reason);
        }
        write_trace_and_finish(trace, outcome.state.best_description, &outcome.registry);
        return;
    }

    // Heuristic baselines and the no-attack control are one-shot.
    BaselineResult baseline;
    try {
        baseline = baseline_description(spec.strategy, refs, spec.domain, providers.generator.get(),
                                        providers.embedder.get(), prompts, config.attack.max_description_chars, 30,
                                        seed);
    } catch (const ProviderError& e) {
        nlohmann::ordered_json trace;
        trace["strategy"] = strategy_name(spec.strategy);
        trace["aborted"] = true;
        trace["abort_reason"] = e.what();
        trace["provider_calls"] = provider_calls(providers);
        write_trace_and_finish(trace, "", nullptr);
        throw;
    }
    if (baseline.mimic_agent_id) {
        card.name = base.card(*baseline.mimic_agent_id).name; // alias the mimicked agent
    }
    card.description = baseline.description;
    Registry final_registry = inject_agent(base, card);

    nlohmann::ordered_json trace;
    trace["strategy"] = strategy_name(spec.strategy);
    trace["final_description"] = baseline.description;
    trace["best_description"] = baseline.description;
    trace["iterations"] = nlohmann::ordered_json::array();
    if (baseline.mimic_agent_id) {
        trace["mimic_agent_id"] = *baseline.mimic_agent_id;
    }
    trace["aborted"] = false;
    trace["abort_reason"] = "";
    trace["provider_calls"] = provider_calls(providers);
    write_trace_and_finish(trace, baseline.description, &final_registry);
}

/// Evaluates one attacked cell: loads the snapshot registry, resolves the
/// query source (explicit file > config file > the cell's attack queries >
/// freshly generated), scores every query and writes metrics.json /
/// metrics.csv.
inline MetricsRow run_eval_cell(const ExperimentConfig& config, const CellSpec& spec, bool mock,
                                const std::optional<std::filesystem::path>& queries_override = std::nullopt,
                                const std::optional<std::filesystem::path>& dir_override = std::nullopt) {
    BackendConfig backend = effective_backend(spec.backend, mock);
    std::uint64_t seed = cell_seed(config, spec, mock);
    std::filesystem::path dir = dir_override ? *dir_override : cell_dir(config, spec, mock);

    if (!std::filesystem::exists(dir / "description.txt") || !std::filesystem::exists(dir / "registry.jsonl")) {
        throw MissingRunArtifacts("run directory lacks description.txt / registry.jsonl: " + dir.string());
    }
    if (trim_copy(detail::read_text_file(dir / "description.txt")).empty()) {
        throw MissingRunArtifacts("description.txt is empty in " + dir.string());
    }
    Registry registry = load_registry(dir / "registry.jsonl", config.lenient);

    auto shared_cache = config.cache_path.empty() || mock
                            ? std::make_shared<EmbeddingCache>()
                            : std::make_shared<EmbeddingCache>(config.cache_path);
    CellProviders providers = make_cell_providers(config, spec, mock, seed, shared_cache);
    PromptTemplates prompts = config.prompts();

    QuerySet queries;
    std::string source_label;
    std::optional<std::filesystem::path> file = queries_override ? queries_override : config.query_file();
    if (file) {
        queries = load_query_file(*file, spec.domain);
        source_label = "file:" + file->string();
    } else if (std::filesystem::exists(dir / "queries.jsonl")) {
        queries = load_query_file(dir / "queries.jsonl", spec.domain);
        queries.provenance = QueryProvenance::llm_generated;
        source_label = "attack_generated";
    } else {
        DescriptionSet refs = collect_domain_descriptions(registry, spec.domain);
        queries = generate_queries(refs, config.attack.query_count, *providers.generator, prompts,
                                   query_seed(config, spec.domain));
        save_query_set(queries, dir / "queries.jsonl");
        source_label = "generated";
    }

    EvaluationResult result = evaluate(queries, registry, backend, config.malicious.agent_id, spec.strategy,
                                       providers.embedder.get(), config.k_list);
    result.row.query_source = source_label;

    write_text_file(dir / "metrics.json", metrics_row_json(result.row).dump(2) + "\n");
    write_text_file(dir / "metrics.csv", metrics_csv({result.row}));
    return result.row;
}

// -- CLI-level drivers -----------------------------------------------------------

inline int cmd_validate(const std::filesystem::path& registry_path, bool lenient, std::ostream& out) {
    RegistryDiagnostics diag = validate_registry_file(registry_path, lenient);
    out << diag.card_count << " agents, " << diag.issues.size() << " errors\n";
    for (const auto& issue : diag.issues) {
        out << "line " << issue.line << ": " << issue.message << "\n";
    }
    return diag.ok() ? 0 : 1;
}

/// Resolves a backend flag value against the configured backends; "bm25"
/// works without configuration, any other label must match a configured
/// backend id or names a dense model directly.
inline BackendConfig resolve_backend(const ExperimentConfig& config, const std::string& label) {
    for (const auto& backend : config.backends) {
        if (backend.backend_id() == label) {
            return backend;
        }
    }
    if (label == "bm25") {
        return BackendConfig{};
    }
    BackendConfig dense;
    dense.kind = BackendKind::dense;
    dense.model = label;
    return dense;
}

struct CellFailure {
    CellSpec spec;
    std::string stage; // "attack" or "eval"
    std::string kind;  // "data", "usage", "provider"
    std::string message;
};

struct SweepResult {
    std::vector<MetricsRow> rows;
    std::vector<CellFailure> failures;
    bool any_provider_failure = false;
};

/// Runs the full cartesian product of domains x backends x strategies.
/// Completed cells (valid trace + metrics) are skipped, so a sweep is
/// resumable; per-cell failures are recorded and the sweep continues.
inline SweepResult cmd_sweep(const ExperimentConfig& config, bool mock, std::size_t jobs = 1,
                             std::ostream* log = nullptr) {
    config.validate();
    std::vector<CellSpec> cells;
    for (const auto& domain : config.domains) {
        for (const auto& backend : config.backends) {
            for (Strategy strategy : config.strategies) {
                cells.push_back({domain, backend, strategy});
            }
        }
    }

    std::vector<std::string> cell_logs(cells.size());
    std::vector<std::optional<CellFailure>> failures(cells.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) {
                return;
            }
            const CellSpec& spec = cells[i];
            std::filesystem::path dir = cell_dir(config, spec, mock);
            std::string label = spec.domain + "/" + effective_backend(spec.backend, mock).backend_id() + "/" +
                                strategy_name(spec.strategy);
            try {
                bool attack_done = trace_valid(dir);
                if (!attack_done) {
                    run_attack_cell(config, spec, mock);
                }
                bool eval_done = attack_done && metrics_valid(dir);
                if (!eval_done) {
                    run_eval_cell(config, spec, mock);
                }
                cell_logs[i] = label + ": " + (attack_done && eval_done ? "skipped (complete)" : "ok");
            } catch (const ProviderError& e) {
                failures[i] = CellFailure{spec, "attack/eval", "provider", e.what()};
                cell_logs[i] = label + ": provider error: " + e.what();
            } catch (const UsageError& e) {
                failures[i] = CellFailure{spec, "attack/eval", "usage", e.what()};
                cell_logs[i] = label + ": usage error: " + e.what();
            } catch (const std::exception& e) {
                failures[i] = CellFailure{spec, "attack/eval", "data", e.what()};
                cell_logs[i] = label + ": error: " + e.what();
            }
        }
    };

    jobs = std::max<std::size_t>(1, jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < jobs; ++t) {
            threads.emplace_back(worker);
        }
        for (auto& t : threads) {
            t.join();
        }
    }

    SweepResult result;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (log != nullptr) {
            (*log) << cell_logs[i] << "\n";
        }
        if (failures[i]) {
            result.failures.push_back(*failures[i]);
            result.any_provider_failure |= failures[i]->kind == "provider";
            continue;
        }
        result.rows.push_back(metrics_row_from_json(detail::read_json_file(cell_dir(config, cells[i], mock) / "metrics.json")));
    }

    if (!result.rows.empty()) {
        emit_report(result.rows, ReportFormat::csv, config.output_dir / "report.csv");
        emit_report(result.rows, ReportFormat::json, config.output_dir / "report.json");
        write_plot_data(result.rows, config.output_dir / "plots");
    }
    if (!result.failures.empty()) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& failure : result.failures) {
            arr.push_back(nlohmann::ordered_json{{"domain", failure.spec.domain},
                                                 {"backend", effective_backend(failure.spec.backend, mock).backend_id()},
                                                 {"strategy", strategy_name(failure.spec.strategy)},
                                                 {"stage", failure.stage},
                                                 {"kind", failure.kind},
                                                 {"message", failure.message}});
        }
        write_text_file(config.output_dir / "failures.json", arr.dump(2) + "\n");
    }
    return result;
}

/// Rebuilds the consolidated report from whatever per-cell metrics.json
/// files already exist under output_dir, in configuration order.
inline std::vector<MetricsRow> cmd_report(const ExperimentConfig& config, bool mock) {
    std::vector<MetricsRow> rows;
    for (const auto& domain : config.domains) {
        for (const auto& backend : config.backends) {
            for (Strategy strategy : config.strategies) {
                std::filesystem::path dir = cell_dir(config, {domain, backend, strategy}, mock);
                if (metrics_valid(dir)) {
                    rows.push_back(metrics_row_from_json(detail::read_json_file(dir / "metrics.json")));
                }
            }
        }
    }
    if (rows.empty()) {
        throw MissingRunArtifacts("no completed cells under " + config.output_dir.string());
    }
    emit_report(rows, ReportFormat::csv, config.output_dir / "report.csv");
    emit_report(rows, ReportFormat::json, config.output_dir / "report.json");
    write_plot_data(rows, config.output_dir / "plots");
    return rows;
}

} // namespace skillroute
