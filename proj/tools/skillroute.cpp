// Command-line driver for the task-routing red-team testbed: registry
// validation, single attack/eval cells, full sweeps and report
// consolidation. Exit codes: 0 ok, 1 data error, 2 usage error, 3 provider
// error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "skillroute/experiment.hpp"

namespace {

skillroute::ExperimentConfig load_config_or_die(const std::string& path, bool lenient,
                                                const std::optional<std::uint64_t>& seed_override) {
    if (path.empty()) {
        throw skillroute::UsageError("--config is required for this subcommand");
    }
    skillroute::ExperimentConfig config = skillroute::ExperimentConfig::load(path, lenient);
    if (seed_override) {
        config.seed = *seed_override;
    }
    return config;
}

void print_row_summary(const skillroute::MetricsRow& row, std::ostream& out) {
    out << row.domain << "/" << row.backend << "/" << row.strategy << ": asr=" << skillroute::format_fixed6(row.asr)
        << " hit3=" << skillroute::format_fixed6(row.hit3) << " hit5=" << skillroute::format_fixed6(row.hit5)
        << " mean_rank=" << skillroute::format_fixed6(row.mean_rank) << " (" << row.n_queries << " queries, "
        << row.query_source << ")\n";
}

} // namespace

int main(int argc, char** argv) {
    using namespace skillroute;

    CLI::App app{"Semantic task-routing deception testbed"};
    app.require_subcommand(1);

    std::string config_path;
    bool mock = false;
    bool lenient = false;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    app.add_option("--config", config_path, "experiment config JSON file");
    app.add_flag("--mock-providers", mock, "use deterministic offline mock providers");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--jobs", jobs, "concurrent sweep cells")->check(CLI::PositiveNumber);
    app.add_flag("--lenient", lenient, "ignore unknown fields in registry and config files");

    auto* validate_cmd = app.add_subcommand("validate", "check a registry file and print diagnostics");
    std::string registry_arg;
    validate_cmd->add_option("registry", registry_arg, "registry JSONL file")->required();

    std::string domain;
    std::string backend_label;
    std::string strategy_arg;
    auto* attack_cmd = app.add_subcommand("attack", "run one attack cell and persist its artifacts");
    attack_cmd->add_option("--domain", domain, "target domain tag")->required();
    attack_cmd->add_option("--backend", backend_label, "backend id (bm25 or a dense model id)")->required();
    attack_cmd->add_option("--strategy", strategy_arg, "sdd | exaggeration | keyword_stuffing | generic | impersonation | none")
        ->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate an attacked cell and emit metrics");
    std::string eval_queries;
    std::string eval_run_dir;
    eval_cmd->add_option("--domain", domain, "target domain tag");
    eval_cmd->add_option("--backend", backend_label, "backend id");
    eval_cmd->add_option("--strategy", strategy_arg, "attack strategy of the cell");
    eval_cmd->add_option("--queries", eval_queries, "held-out query JSONL file");
    eval_cmd->add_option("--run-dir", eval_run_dir, "cell directory (defaults to the derived layout)");

    auto* sweep_cmd = app.add_subcommand("sweep", "run the configured domains x backends x strategies grid");
    auto* report_cmd = app.add_subcommand("report", "re-consolidate reports from existing cell metrics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*validate_cmd) {
            return cmd_validate(registry_arg, lenient, std::cout);
        }

        ExperimentConfig config = load_config_or_die(config_path, lenient, seed);

        if (*attack_cmd) {
            CellSpec spec{domain, resolve_backend(config, backend_label), strategy_from_name(strategy_arg)};
            run_attack_cell(config, spec, mock);
            std::cout << "attack artifacts: " << cell_dir(config, spec, mock).string() << "\n";
            return 0;
        }

        if (*eval_cmd) {
            CellSpec spec;
            std::optional<std::filesystem::path> dir_override;
            if (!eval_run_dir.empty()) {
                dir_override = std::filesystem::path(eval_run_dir);
                nlohmann::json manifest = detail::read_json_file(*dir_override / "manifest.json");
                spec.domain = manifest.at("domain").get<std::string>();
                spec.backend = resolve_backend(config, manifest.at("backend").get<std::string>());
                spec.strategy = strategy_from_name(manifest.at("strategy").get<std::string>());
            } else {
                if (domain.empty() || backend_label.empty() || strategy_arg.empty()) {
                    throw UsageError("eval needs --run-dir or the full --domain/--backend/--strategy triple");
                }
                spec = CellSpec{domain, resolve_backend(config, backend_label), strategy_from_name(strategy_arg)};
            }
            std::optional<std::filesystem::path> queries_file;
            if (!eval_queries.empty()) {
                queries_file = std::filesystem::path(eval_queries);
            }
            MetricsRow row = run_eval_cell(config, spec, mock, queries_file, dir_override);
            print_row_summary(row, std::cout);
            return 0;
        }

        if (*sweep_cmd) {
            SweepResult result = cmd_sweep(config, mock, jobs, &std::cout);
            std::cout << result.rows.size() << " cells complete, " << result.failures.size() << " failed\n";
            if (!result.rows.empty()) {
                std::cout << "consolidated report: " << (config.output_dir / "report.csv").string() << "\n";
            }
            if (!result.failures.empty()) {
                return result.any_provider_failure ? 3 : 1;
            }
            return 0;
        }

        if (*report_cmd) {
            auto rows = cmd_report(config, mock);
            std::cout << rows.size() << " rows -> " << (config.output_dir / "report.csv").string() << "\n";
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
