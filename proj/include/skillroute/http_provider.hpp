#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "skillroute/embedding.hpp"
#include "skillroute/embedding_cache.hpp"
#include "skillroute/errors.hpp"
#include "skillroute/provider.hpp"

namespace skillroute {

struct ParsedUrl {
    std::string origin;      // scheme://host[:port]
    std::string path_prefix; // e.g. "/v1", possibly empty
};

inline ParsedUrl parse_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw UsageError("provider base_url must start with http:// or https://: " + url);
    }
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw UsageError("unsupported provider URL scheme \"" + scheme + "\"");
    }
    auto path_begin = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    if (path_begin == std::string::npos) {
        parsed.origin = url;
    } else {
        parsed.origin = url.substr(0, path_begin);
        parsed.path_prefix = url.substr(path_begin);
        while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') {
            parsed.path_prefix.pop_back();
        }
    }
    return parsed;
}

namespace detail {

/// POSTs JSON with retry and exponential backoff. Connection failures and
/// 5xx responses are retried up to max_retries times (max_retries+1 wire
/// attempts total); 4xx responses are rejected immediately.
class HttpJsonClient {
public:
    explicit HttpJsonClient(ProviderConfig config) : config_(std::move(config)), url_(parse_base_url(config_.base_url)) {
        config_.validate();
    }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        httplib::Client client(url_.origin);
        auto timeout = std::chrono::milliseconds(static_cast<long long>(config_.timeout_seconds * 1000.0));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        httplib::Headers headers;
        if (!config_.api_key_env.empty()) {
            if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }

        std::string payload = body.dump();
        std::string last_failure = "no attempt made";
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::milliseconds(std::min<long long>(50LL << (attempt - 1), 2000LL));
                std::this_thread::sleep_for(delay);
            }
            auto res = client.Post(url_.path_prefix + path, headers, payload, "application/json");
            if (!res) {
                last_failure = "connection error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_failure = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                throw ProviderRejected(res->status, res->body.substr(0, 200));
            }
            nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) {
                throw ProviderRejected(res->status, "response is not valid JSON: " + res->body.substr(0, 200));
            }
            return parsed;
        }
        throw ProviderUnreachable("provider unreachable after " + std::to_string(config_.max_retries + 1) +
                                  " attempts to " + url_.origin + " (" + last_failure + ")");
    }

    const ProviderConfig& config() const noexcept { return config_; }

private:
    ProviderConfig config_;
    ParsedUrl url_;
};

} // namespace detail

/// OpenAI-compatible embeddings endpoint: POST {model, input:[...]} to
/// <base_url>/embeddings. Results are cached content-addressed by
/// (model_id, text) so unchanged texts are never re-fetched.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(ProviderConfig config, std::shared_ptr<EmbeddingCache> cache = nullptr)
        : client_(std::move(config)), cache_(std::move(cache)) {}

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        check_embed_inputs(texts);

        std::unordered_map<std::string, EmbeddingVector> resolved;
        std::vector<std::string> misses; // unique, first-occurrence order
        for (const auto& text : texts) {
            if (resolved.count(text) > 0) {
                continue;
            }
            if (cache_) {
                if (auto hit = cache_->get(EmbeddingCache::key_for(model_id(), text))) {
                    check_dim(*hit);
                    resolved.emplace(text, std::move(*hit));
                    continue;
                }
            }
            if (std::find(misses.begin(), misses.end(), text) == misses.end()) {
                misses.push_back(text);
            }
        }

        for (std::size_t begin = 0; begin < misses.size(); begin += client_.config().request_batch_size) {
            std::size_t end = std::min(misses.size(), begin + client_.config().request_batch_size);
            std::vector<std::string> batch(misses.begin() + begin, misses.begin() + end);
            auto vectors = fetch_batch(batch);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (cache_) {
                    cache_->put(EmbeddingCache::key_for(model_id(), batch[i]), vectors[i]);
                }
                resolved.emplace(batch[i], std::move(vectors[i]));
            }
        }

        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            out.push_back(resolved.at(text));
        }
        return out;
    }

    std::string model_id() const override { return client_.config().model_id; }

private:
    std::vector<EmbeddingVector> fetch_batch(const std::vector<std::string>& batch) {
        nlohmann::json body;
        body["model"] = model_id();
        body["input"] = batch;
        nlohmann::json res = client_.post("/embeddings", body);

        auto data = res.find("data");
        if (data == res.end() || !data->is_array() || data->size() != batch.size()) {
            throw ProviderRejected(200, "embedding response lacks a data array of the requested size");
        }
        std::vector<EmbeddingVector> vectors(batch.size());
        std::vector<bool> filled(batch.size(), false);
        for (const auto& item : *data) {
            if (!item.contains("index") || !item.contains("embedding")) {
                throw ProviderRejected(200, "embedding item lacks index/embedding fields");
            }
            std::size_t index = item.at("index").get<std::size_t>();
            if (index >= batch.size() || filled[index]) {
                throw ProviderRejected(200, "embedding response has out-of-range or duplicate index");
            }
            EmbeddingVector vec;
            vec.values = item.at("embedding").get<std::vector<double>>();
            if (vec.dim() == 0 || !vec.all_finite()) {
                throw ProviderRejected(200, "embedding vector is empty or non-finite");
            }
            check_dim(vec);
            vectors[index] = std::move(vec);
            filled[index] = true;
        }
        if (!std::all_of(filled.begin(), filled.end(), [](bool b) { return b; })) {
            throw ProviderRejected(200, "embedding response is missing indices");
        }
        return vectors;
    }

    void check_dim(const EmbeddingVector& vec) {
        if (session_dim_ == 0) {
            session_dim_ = vec.dim();
        } else if (vec.dim() != session_dim_) {
            throw DimMismatch("provider returned dim " + std::to_string(vec.dim()) + " but session dim is " +
                              std::to_string(session_dim_));
        }
    }

    detail::HttpJsonClient client_;
    std::shared_ptr<EmbeddingCache> cache_;
    std::size_t session_dim_ = 0;
};

/// OpenAI-compatible chat completions endpoint: POST {model, messages, ...}
/// to <base_url>/chat/completions; returns the first choice's content.
class HttpGenerationProvider : public GenerationProvider {
public:
    explicit HttpGenerationProvider(ProviderConfig config) : client_(std::move(config)) {}

    std::string generate(const GenerationRequest& request) override {
        request.validate();
        nlohmann::json body;
        body["model"] = client_.config().model_id;
        body["messages"] = nlohmann::json::array({nlohmann::json{{"role", "system"}, {"content", request.system_prompt}},
                                                  nlohmann::json{{"role", "user"}, {"content", request.user_prompt}}});
        body["temperature"] = request.temperature;
        body["max_tokens"] = request.max_output_tokens;
        if (request.seed) {
            body["seed"] = *request.seed;
        }
        nlohmann::json res = client_.post("/chat/completions", body);

        try {
            std::string content = res.at("choices").at(0).at("message").at("content").get<std::string>();
            if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
                throw EmptyCompletion();
            }
            return content;
        } catch (const nlohmann::json::exception&) {
            throw ProviderRejected(200, "completion response lacks choices[0].message.content");
        }
    }

private:
    detail::HttpJsonClient client_;
};

} // namespace skillroute
