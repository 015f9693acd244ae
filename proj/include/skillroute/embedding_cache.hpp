#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "skillroute/embedding.hpp"
#include "skillroute/errors.hpp"
#include "skillroute/hash.hpp"

namespace skillroute {

/// Content-addressed embedding cache. Keys are a pure function of
/// (model_id, exact text bytes), so identical inputs always map to identical
/// entries and reruns are fully offline once the cache file is populated.
///
/// File format: append-only JSONL, one record per entry:
///   {"key": "<sha256 hex>", "dim": N, "values": [...], "created_at": <unix seconds>}
class EmbeddingCache {
public:
    EmbeddingCache() = default; // memory-only

    explicit EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            load_file();
        } else if (path_.has_parent_path()) {
            std::filesystem::create_directories(path_.parent_path());
        }
        out_.open(path_, std::ios::app | std::ios::binary);
        if (!out_) {
            throw IoFailure("cannot open embedding cache for append: " + path_.string());
        }
    }

    static std::string key_for(std::string_view model_id, std::string_view text) {
        std::string material;
        material.reserve(model_id.size() + 1 + text.size());
        material.append(model_id);
        material.push_back('\0');
        material.append(text);
        return sha256_hex(material);
    }

    std::optional<EmbeddingVector> get(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    void put(const std::string& key, const EmbeddingVector& vector) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = entries_.emplace(key, vector);
        if (!inserted) {
            return; // content-addressed: an existing entry is identical
        }
        if (out_.is_open()) {
            nlohmann::ordered_json j;
            j["key"] = key;
            j["dim"] = vector.dim();
            j["values"] = vector.values;
            j["created_at"] =
                std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
                    .count();
            out_ << j.dump() << '\n';
            out_.flush();
        }
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

private:
    void load_file() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) {
            throw IoFailure("cannot read embedding cache: " + path_.string());
        }
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) {
                continue;
            }
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("key") || !j.contains("values")) {
                throw IoFailure("corrupt cache record at " + path_.string() + ":" + std::to_string(line_no));
            }
            EmbeddingVector vec;
            vec.values = j.at("values").get<std::vector<double>>();
            entries_[j.at("key").get<std::string>()] = std::move(vec);
        }
    }

    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> entries_;
    std::filesystem::path path_;
    std::ofstream out_;
};

} // namespace skillroute
