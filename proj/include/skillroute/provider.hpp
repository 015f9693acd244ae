#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "skillroute/embedding.hpp"
#include "skillroute/errors.hpp"

namespace skillroute {

struct ProviderConfig {
    std::string base_url;    // e.g. "http://127.0.0.1:8089/v1"
    std::string model_id;
    std::string api_key_env; // name of the env var holding the credential; never the credential itself
    double timeout_seconds = 30.0;
    int max_retries = 2;
    std::size_t request_batch_size = 16;

    void validate() const {
        if (timeout_seconds <= 0.0) {
            throw UsageError("provider timeout must be > 0");
        }
        if (request_batch_size < 1) {
            throw UsageError("provider request_batch_size must be >= 1");
        }
        if (max_retries < 0) {
            throw UsageError("provider max_retries must be >= 0");
        }
    }
};

struct GenerationRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;
    std::size_t max_output_tokens = 1024;

    void validate() const {
        if (system_prompt.empty() || user_prompt.empty()) {
            throw UsageError("generation request prompts must be nonempty");
        }
        if (temperature < 0.0) {
            throw UsageError("generation temperature must be >= 0");
        }
        if (max_output_tokens == 0) {
            throw UsageError("generation max_output_tokens must be positive");
        }
    }
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// One vector per input text, order-aligned with the inputs.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;

    virtual std::string model_id() const = 0;

    EmbeddingVector embed(const std::string& text) { return embed_batch({text}).front(); }
};

class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;

    virtual std::string generate(const GenerationRequest& request) = 0;
};

inline void check_embed_inputs(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw UsageError("embed_batch requires at least one text");
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) {
            throw UsageError("embed_batch input " + std::to_string(i) + " is empty");
        }
    }
}

} // namespace skillroute
