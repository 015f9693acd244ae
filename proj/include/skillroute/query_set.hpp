#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillroute/errors.hpp"
#include "skillroute/text_util.hpp"

namespace skillroute {

struct Query {
    std::string query_id;
    std::string text;

    bool operator==(const Query&) const = default;
};

enum class QueryProvenance { llm_generated, file_loaded };

struct QuerySet {
    std::string domain;
    std::vector<Query> queries;
    QueryProvenance provenance = QueryProvenance::llm_generated;

    std::size_t size() const noexcept { return queries.size(); }
    bool empty() const noexcept { return queries.empty(); }

    void validate() const {
        std::unordered_set<std::string> ids;
        for (const auto& q : queries) {
            if (q.query_id.empty() || !ids.insert(q.query_id).second) {
                throw DataError("query ids must be nonempty and unique (offender: \"" + q.query_id + "\")");
            }
            if (trim_copy(q.text).empty()) {
                throw DataError("query \"" + q.query_id + "\" has empty text");
            }
        }
    }
};

/// JSONL, one {"query_id": ..., "text": ...} per line; query_id optional
/// (auto-assigned q0001, q0002, ... by position).
inline QuerySet load_query_file(const std::filesystem::path& path, std::string domain) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open query file: " + path.string());
    }
    QuerySet set;
    set.domain = std::move(domain);
    set.provenance = QueryProvenance::file_loaded;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
            throw MalformedRecord(line_no, "query record needs a string \"text\" field");
        }
        Query q;
        q.text = j.at("text").get<std::string>();
        if (auto it = j.find("query_id"); it != j.end() && it->is_string()) {
            q.query_id = it->get<std::string>();
        } else {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "q%04zu", line_no);
            q.query_id = buf;
        }
        set.queries.push_back(std::move(q));
    }
    if (set.queries.empty()) {
        throw DataError("query file is empty: " + path.string());
    }
    set.validate();
    return set;
}

inline void save_query_set(const QuerySet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoFailure("cannot write query file: " + path.string());
    }
    for (const auto& q : set.queries) {
        nlohmann::ordered_json j;
        j["query_id"] = q.query_id;
        j["text"] = q.text;
        out << j.dump() << '\n';
    }
}

} // namespace skillroute
