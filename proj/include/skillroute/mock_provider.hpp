#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "skillroute/embedding.hpp"
#include "skillroute/errors.hpp"
#include "skillroute/hash.hpp"
#include "skillroute/provider.hpp"
#include "skillroute/text_util.hpp"
#include "skillroute/tokenizer.hpp"

namespace skillroute {

inline constexpr std::size_t kMockEmbeddingDim = 256;

/// Deterministic bag-of-words embedding: each token is hashed (FNV-1a 64)
/// to one of `dim` buckets, counts are accumulated and the vector is
/// L2-normalized. Empty text yields the zero vector, which cosine rejects.
inline EmbeddingVector mock_embed(std::string_view text, std::size_t dim = kMockEmbeddingDim) {
    EmbeddingVector vec;
    vec.values.assign(dim, 0.0);
    for (const auto& token : tokenize(text)) {
        vec.values[fnv1a64(token) % dim] += 1.0;
    }
    double norm = vec.l2_norm();
    if (norm > 0.0) {
        for (auto& v : vec.values) {
            v /= norm;
        }
    }
    return vec;
}

class MockEmbeddingProvider : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dim = kMockEmbeddingDim) : dim_(dim) {}

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        check_embed_inputs(texts);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            out.push_back(mock_embed(t, dim_));
        }
        return out;
    }

    std::string model_id() const override { return "mock-bow-" + std::to_string(dim_); }

private:
    std::size_t dim_;
};

// Role tags carried on the first line of the system prompt ("role: <tag>").
namespace roles {
inline constexpr std::string_view kQueryGen = "query_gen";
inline constexpr std::string_view kSynthesize = "synthesize";
inline constexpr std::string_view kRewrite = "rewrite";
} // namespace roles

namespace mockgen {

inline const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",    "and",   "are",  "as",    "at",     "be",   "by",    "can",  "do",      "for",  "from",
        "get",  "help",  "how",   "i",    "in",    "into",   "is",   "it",    "its",  "looking", "me",   "my",
        "need", "of",    "on",    "or",   "our",   "per",    "plus", "please", "s",   "service", "t",    "that",
        "the",  "their", "them",  "they", "this",  "to",     "we",   "what",  "when", "where",   "which", "who",
        "will", "with",  "you",   "your", "way",   "best",   "also", "expert", "agent"};
    return words;
}

inline bool is_content_token(const std::string& token) {
    if (token.size() < 2 || stopwords().count(token) > 0) {
        return false;
    }
    return !std::all_of(token.begin(), token.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

/// Content tokens of `text` ranked by frequency (descending), ties broken
/// lexicographically so the order never depends on hash-map iteration.
inline std::vector<std::string> top_content_tokens(std::string_view text, std::size_t limit) {
    std::unordered_map<std::string, std::size_t> counts;
    for (auto& token : tokenize(text)) {
        if (is_content_token(token)) {
            ++counts[token];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (const auto& [token, count] : ranked) {
        (void)count;
        if (out.size() >= limit) {
            break;
        }
        out.push_back(token);
    }
    return out;
}

/// Substring between <tag> and </tag>; the whole text when the tags are
/// absent (hand-edited templates may drop them).
inline std::string extract_block(std::string_view text, std::string_view tag) {
    std::string open = "<" + std::string(tag) + ">";
    std::string close = "</" + std::string(tag) + ">";
    auto begin = text.find(open);
    if (begin == std::string_view::npos) {
        return std::string(text);
    }
    begin += open.size();
    auto end = text.find(close, begin);
    if (end == std::string_view::npos) {
        end = text.size();
    }
    return std::string(text.substr(begin, end - begin));
}

inline std::string strip_blocks(std::string_view text) {
    std::string out(text);
    for (;;) {
        auto open = out.find('<');
        if (open == std::string::npos) {
            break;
        }
        auto tag_end = out.find('>', open);
        if (tag_end == std::string::npos) {
            break;
        }
        std::string tag = out.substr(open + 1, tag_end - open - 1);
        auto close = out.find("</" + tag + ">", tag_end);
        if (close == std::string::npos) {
            break;
        }
        out.erase(open, close + tag.size() + 3 - open);
    }
    return out;
}

inline std::size_t first_integer(std::string_view text, std::size_t fallback) {
    std::size_t value = 0;
    bool in_number = false;
    for (char c : text) {
        if (c >= '0' && c <= '9') {
            in_number = true;
            value = value * 10 + static_cast<std::size_t>(c - '0');
        } else if (in_number) {
            return value;
        }
    }
    return in_number ? value : fallback;
}

} // namespace mockgen

/// Offline stand-in for the LLM generation roles. All outputs are pure
/// functions of (request, seed): query generation emits templated questions
/// over the most frequent content tokens of the supplied reference
/// descriptions, synthesis folds those tokens into a capability summary, and
/// rewriting appends tokens drawn from the failing queries named in the
/// prompt.
class MockGenerationProvider : public GenerationProvider {
public:
    explicit MockGenerationProvider(std::uint64_t seed = 0) : seed_(seed) {}

    std::string generate(const GenerationRequest& request) override {
        request.validate();
        std::string role = parse_role(request.system_prompt);
        std::uint64_t seed = request.seed.value_or(seed_);
        if (role == roles::kQueryGen) {
            return generate_queries(request, seed);
        }
        if (role == roles::kSynthesize) {
            return synthesize(request);
        }
        if (role == roles::kRewrite) {
            return rewrite(request, seed);
        }
        throw UnknownRole(role.empty() ? "<missing>" : role);
    }

    std::string model_id() const { return "mock-gen"; }

private:
    static std::string parse_role(std::string_view system_prompt) {
        auto eol = system_prompt.find('\n');
        std::string_view first = system_prompt.substr(0, eol);
        constexpr std::string_view prefix = "role:";
        if (first.substr(0, prefix.size()) != prefix) {
            return "";
        }
        std::string role(first.substr(prefix.size()));
        return trim_role(role);
    }

    static std::string trim_role(const std::string& s) {
        auto begin = s.find_first_not_of(" \t");
        auto end = s.find_last_not_of(" \t\r");
        if (begin == std::string::npos) {
            return "";
        }
        return s.substr(begin, end - begin + 1);
    }

    std::string generate_queries(const GenerationRequest& request, std::uint64_t seed) const {
        static const char* kFormats[] = {
            "How can I get help with % and %?",       "I need an expert service for % and %.",
            "Looking for an agent that covers % plus %.", "What is the best way to manage % and %?",
            "Please assist with a % request involving %.", "Who can take care of % and % for me?"};
        constexpr std::size_t kFormatCount = sizeof(kFormats) / sizeof(kFormats[0]);

        std::string refs = mockgen::extract_block(request.user_prompt, "references");
        std::size_t count = mockgen::first_integer(mockgen::strip_blocks(request.user_prompt), 1);
        std::vector<std::string> tokens = mockgen::top_content_tokens(refs, 10);
        if (tokens.empty()) {
            tokens.push_back("assistance");
        }
        std::size_t n = tokens.size();

        std::vector<std::string> lines;
        std::set<std::string> seen;
        for (std::size_t i = 0; lines.size() < count; ++i) {
            const std::string& a = tokens[(i + seed) % n];
            const std::string& b0 = tokens[(i + seed + 1 + i / n) % n];
            const std::string& b = (&b0 == &a) ? tokens[(i + seed + 2 + i / n) % n] : b0;
            std::string line = fill_two(kFormats[(i + seed) % kFormatCount], a, b);
            if (!seen.insert(line).second) {
                line += " (case " + std::to_string(i) + ")";
                seen.insert(line);
            }
            lines.push_back(std::move(line));
        }
        std::string out;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (i > 0) {
                out += '\n';
            }
            out += lines[i];
        }
        return out;
    }

    static std::string fill_two(std::string_view format, const std::string& a, const std::string& b) {
        std::string out;
        bool first = true;
        for (char c : format) {
            if (c == '%') {
                out += first ? a : b;
                first = false;
            } else {
                out.push_back(c);
            }
        }
        return out;
    }

    std::string synthesize(const GenerationRequest& request) const {
        std::string refs = mockgen::extract_block(request.user_prompt, "references");
        std::vector<std::string> tokens = mockgen::top_content_tokens(refs, 12);
        if (tokens.empty()) {
            tokens.push_back("assistance");
        }
        std::string out = "Full-service support for " + join_range(tokens, 0, 4) + ".";
        if (tokens.size() > 4) {
            out += " Handles " + join_range(tokens, 4, 8) + " requests.";
        }
        if (tokens.size() > 8) {
            out += " Covers " + join_range(tokens, 8, 12) + " work end to end.";
        }
        return out;
    }

    std::string rewrite(const GenerationRequest& request, std::uint64_t seed) const {
        std::string current = mockgen::extract_block(request.user_prompt, "current_description");
        std::string failing = mockgen::extract_block(request.user_prompt, "failing_queries");

        // Failing-query lines read "margin=<x> | <query text>".
        std::string query_text;
        std::istringstream in(failing);
        std::string line;
        while (std::getline(in, line)) {
            auto bar = line.find('|');
            query_text += bar == std::string::npos ? line : line.substr(bar + 1);
            query_text += '\n';
        }
        std::vector<std::string> tokens = mockgen::top_content_tokens(query_text, 12);

        std::string trimmed = trim_copy(current);
        if (tokens.empty()) {
            return trimmed + " Also handles general requests.";
        }
        // The top failing token is always appended; the seed varies the extras.
        std::size_t take = std::min<std::size_t>(tokens.size(), 2 + seed % 3);
        std::size_t offset = (seed / 3) % tokens.size();
        std::vector<std::string> chosen{tokens.front()};
        for (std::size_t i = 0; chosen.size() < take && i < tokens.size(); ++i) {
            const std::string& tok = tokens[(offset + i) % tokens.size()];
            if (std::find(chosen.begin(), chosen.end(), tok) == chosen.end()) {
                chosen.push_back(tok);
            }
        }
        return trimmed + " Also handles " + join_range(chosen, 0, chosen.size()) + " requests.";
    }

    static std::string join_range(const std::vector<std::string>& items, std::size_t begin, std::size_t end) {
        std::string out;
        end = std::min(end, items.size());
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) {
                out += i + 1 == end ? (end - begin > 2 ? ", and " : " and ") : ", ";
            }
            out += items[i];
        }
        return out;
    }

    std::uint64_t seed_;
};

} // namespace skillroute
