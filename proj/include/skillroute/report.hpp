#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillroute/errors.hpp"
#include "skillroute/metrics.hpp"

namespace skillroute {

inline std::string format_fixed6(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

/// CSV with the pinned column order:
/// domain,backend,strategy,n_queries,asr,hit3,hit5,mean_rank,rho_m, then one
/// rho_m_k_{K} column per configured K. All ratios carry six fractional
/// digits so regression diffs are bit-stable.
inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) {
        throw DataError("report requires at least one metrics row");
    }
    const auto& k_list = rows.front().rho_m_k;
    std::string out = "domain,backend,strategy,n_queries,asr,hit3,hit5,mean_rank,rho_m";
    for (const auto& [k, value] : k_list) {
        (void)value;
        out += ",rho_m_k_" + std::to_string(k);
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.rho_m_k.size() != k_list.size()) {
            throw DataError("metrics rows disagree on the configured K list");
        }
        out += row.domain + "," + row.backend + "," + row.strategy + "," + std::to_string(row.n_queries);
        out += "," + format_fixed6(row.asr);
        out += "," + format_fixed6(row.hit3);
        out += "," + format_fixed6(row.hit5);
        out += "," + format_fixed6(row.mean_rank);
        out += "," + format_fixed6(row.rho_m);
        for (std::size_t i = 0; i < row.rho_m_k.size(); ++i) {
            if (row.rho_m_k[i].first != k_list[i].first) {
                throw DataError("metrics rows disagree on the configured K list");
            }
            out += "," + format_fixed6(row.rho_m_k[i].second);
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json metrics_row_json(const MetricsRow& row) {
    nlohmann::ordered_json j;
    j["domain"] = row.domain;
    j["backend"] = row.backend;
    j["strategy"] = row.strategy;
    j["n_queries"] = row.n_queries;
    j["asr"] = row.asr;
    j["hit3"] = row.hit3;
    j["hit5"] = row.hit5;
    j["mean_rank"] = row.mean_rank;
    j["rho_m"] = row.rho_m;
    nlohmann::ordered_json rho_k = nlohmann::ordered_json::object();
    for (const auto& [k, value] : row.rho_m_k) {
        rho_k[std::to_string(k)] = value;
    }
    j["rho_m_k"] = std::move(rho_k);
    if (!row.query_source.empty()) {
        j["query_source"] = row.query_source;
    }
    if (!row.per_query_ranks.empty()) {
        nlohmann::ordered_json ranks = nlohmann::ordered_json::array();
        for (const auto& [query_id, rank] : row.per_query_ranks) {
            ranks.push_back(nlohmann::ordered_json{{"query_id", query_id}, {"rank", rank}});
        }
        j["per_query_ranks"] = std::move(ranks);
    }
    return j;
}

inline MetricsRow metrics_row_from_json(const nlohmann::json& j) {
    MetricsRow row;
    row.domain = j.at("domain").get<std::string>();
    row.backend = j.at("backend").get<std::string>();
    row.strategy = j.at("strategy").get<std::string>();
    row.n_queries = j.at("n_queries").get<std::size_t>();
    row.asr = j.at("asr").get<double>();
    row.hit3 = j.at("hit3").get<double>();
    row.hit5 = j.at("hit5").get<double>();
    row.mean_rank = j.at("mean_rank").get<double>();
    row.rho_m = j.at("rho_m").get<double>();
    std::vector<std::pair<std::size_t, double>> rho_k;
    for (const auto& [key, value] : j.at("rho_m_k").items()) {
        rho_k.emplace_back(static_cast<std::size_t>(std::stoul(key)), value.get<double>());
    }
    std::sort(rho_k.begin(), rho_k.end());
    row.rho_m_k = std::move(rho_k);
    if (j.contains("query_source")) {
        row.query_source = j.at("query_source").get<std::string>();
    }
    return row;
}

inline nlohmann::ordered_json metrics_json(const std::vector<MetricsRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        arr.push_back(metrics_row_json(row));
    }
    return arr;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoFailure("cannot write file: " + path.string());
    }
    out << content;
    if (!out) {
        throw IoFailure("write failed: " + path.string());
    }
}

enum class ReportFormat { csv, json };

/// Writes one consolidated report file in the requested format.
inline void emit_report(const std::vector<MetricsRow>& rows, ReportFormat format,
                        const std::filesystem::path& path) {
    if (rows.empty()) {
        throw DataError("report requires at least one metrics row");
    }
    if (format == ReportFormat::csv) {
        write_text_file(path, metrics_csv(rows));
    } else {
        write_text_file(path, metrics_json(rows).dump(2) + "\n");
    }
}

/// Per-domain plot data: a flat {label, metric, value} array per domain so
/// any plotting tool can render the per-domain bar groups.
inline void write_plot_data(const std::vector<MetricsRow>& rows, const std::filesystem::path& dir) {
    std::map<std::string, std::vector<const MetricsRow*>> by_domain;
    for (const auto& row : rows) {
        by_domain[row.domain].push_back(&row);
    }
    std::filesystem::create_directories(dir);
    for (const auto& [domain, domain_rows] : by_domain) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const MetricsRow* row : domain_rows) {
            std::string label = row->backend + "/" + row->strategy;
            for (const auto& [metric, value] :
                 std::initializer_list<std::pair<const char*, double>>{{"asr", row->asr},
                                                                       {"hit3", row->hit3},
                                                                       {"hit5", row->hit5},
                                                                       {"mean_rank", row->mean_rank}}) {
                arr.push_back(nlohmann::ordered_json{{"label", label}, {"metric", metric}, {"value", value}});
            }
        }
        write_text_file(dir / (domain + ".json"), arr.dump(2) + "\n");
    }
}

} // namespace skillroute
