#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillroute/errors.hpp"
#include "skillroute/hash.hpp"
#include "skillroute/text_util.hpp"

namespace skillroute {

/// One agent's registry entry. `is_malicious` is testbed bookkeeping only:
/// routing code receives (agent_id, description) pairs and never sees it.
struct AgentCard {
    std::string agent_id;
    std::string name;
    std::string description;
    std::vector<std::string> domains; // lowercase, sorted, unique
    bool is_malicious = false;

    bool has_domain(std::string_view tag) const {
        return std::binary_search(domains.begin(), domains.end(), to_lower_copy(tag));
    }

    bool operator==(const AgentCard& other) const = default;
};

inline void normalize_domains(std::vector<std::string>& domains) {
    for (auto& d : domains) {
        d = to_lower_copy(trim_copy(d));
    }
    std::sort(domains.begin(), domains.end());
    domains.erase(std::unique(domains.begin(), domains.end()), domains.end());
    domains.erase(std::remove(domains.begin(), domains.end(), std::string()), domains.end());
}

/// Benign reference descriptions for one target domain, in registry order.
struct DescriptionSet {
    std::string domain;
    std::vector<std::pair<std::string, std::string>> descriptions; // (agent_id, text)

    bool empty() const noexcept { return descriptions.empty(); }
    std::size_t size() const noexcept { return descriptions.size(); }
};

/// Immutable, insertion-ordered collection of agent cards. All mutating
/// operations return a new Registry so attack iterations can snapshot and
/// roll back cheaply.
class Registry {
public:
    Registry() = default;

    static Registry from_cards(std::vector<AgentCard> cards, std::string source_digest = "") {
        Registry reg;
        reg.agents_ = std::move(cards);
        for (std::size_t i = 0; i < reg.agents_.size(); ++i) {
            auto& card = reg.agents_[i];
            if (trim_copy(card.agent_id).empty()) {
                throw MalformedRecord(i + 1, "agent_id is empty");
            }
            if (trim_copy(card.description).empty()) {
                throw EmptyDescription();
            }
            normalize_domains(card.domains);
            auto [it, inserted] = reg.index_.emplace(card.agent_id, i);
            if (!inserted) {
                throw DuplicateAgentId(card.agent_id);
            }
        }
        reg.source_digest_ = source_digest.empty() ? reg.content_digest() : std::move(source_digest);
        return reg;
    }

    const std::vector<AgentCard>& agents() const noexcept { return agents_; }
    std::size_t size() const noexcept { return agents_.size(); }
    bool empty() const noexcept { return agents_.empty(); }
    const std::string& source_digest() const noexcept { return source_digest_; }

    bool contains(std::string_view agent_id) const { return index_.count(std::string(agent_id)) > 0; }

    const AgentCard& card(std::string_view agent_id) const {
        auto it = index_.find(std::string(agent_id));
        if (it == index_.end()) {
            throw UnknownAgentId(std::string(agent_id));
        }
        return agents_[it->second];
    }

    std::string content_digest() const;

private:
    friend Registry inject_agent(const Registry&, AgentCard);
    friend Registry replace_description(const Registry&, std::string_view, std::string_view);

    std::vector<AgentCard> agents_;
    std::unordered_map<std::string, std::size_t> index_;
    std::string source_digest_;
};

inline bool content_equal(const Registry& a, const Registry& b) {
    return a.agents() == b.agents();
}

/// JSONL serialization; one card per line with a fixed field order so
/// identical registries serialize to identical bytes.
inline std::string serialize_registry(const Registry& registry) {
    std::string out;
    for (const auto& card : registry.agents()) {
        nlohmann::ordered_json j;
        j["agent_id"] = card.agent_id;
        j["name"] = card.name;
        j["description"] = card.description;
        j["domains"] = card.domains;
        j["is_malicious"] = card.is_malicious;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::string Registry::content_digest() const {
    return sha256_hex(serialize_registry(*this));
}

namespace detail {

inline AgentCard parse_card(const nlohmann::json& j, std::size_t line, bool lenient) {
    if (!j.is_object()) {
        throw MalformedRecord(line, "record is not a JSON object");
    }
    static const char* known[] = {"agent_id", "name", "description", "domains", "is_malicious"};
    if (!lenient) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::find_if(std::begin(known), std::end(known),
                             [&](const char* k) { return it.key() == k; }) == std::end(known)) {
                throw MalformedRecord(line, "unknown field \"" + it.key() + "\" (use --lenient to ignore)");
            }
        }
    }
    AgentCard card;
    for (const char* field : {"agent_id", "name", "description"}) {
        auto it = j.find(field);
        if (it == j.end() || !it->is_string()) {
            throw MalformedRecord(line, std::string("required string field \"") + field + "\" missing or not a string");
        }
    }
    card.agent_id = j.at("agent_id").get<std::string>();
    card.name = j.at("name").get<std::string>();
    card.description = j.at("description").get<std::string>();
    if (trim_copy(card.agent_id).empty()) {
        throw MalformedRecord(line, "agent_id is empty");
    }
    if (trim_copy(card.description).empty()) {
        throw MalformedRecord(line, "description is empty after trimming");
    }
    if (auto it = j.find("domains"); it != j.end()) {
        if (!it->is_array()) {
            throw MalformedRecord(line, "\"domains\" must be an array of strings");
        }
        for (const auto& d : *it) {
            if (!d.is_string()) {
                throw MalformedRecord(line, "\"domains\" must be an array of strings");
            }
            card.domains.push_back(d.get<std::string>());
        }
    }
    if (auto it = j.find("is_malicious"); it != j.end()) {
        if (!it->is_boolean()) {
            throw MalformedRecord(line, "\"is_malicious\" must be a boolean");
        }
        card.is_malicious = it->get<bool>();
    }
    normalize_domains(card.domains);
    return card;
}

} // namespace detail

/// Parses line-delimited JSON agent records. Every line must hold one valid
/// record; the first violation throws. `source_digest` is the SHA-256 of the
/// exact input bytes.
inline Registry parse_registry(std::string_view content, bool lenient = false) {
    std::vector<AgentCard> cards;
    std::unordered_map<std::string, std::size_t> seen; // agent_id -> first line
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw MalformedRecord(line_no, "invalid JSON");
        }
        AgentCard card = detail::parse_card(j, line_no, lenient);
        auto [it, inserted] = seen.emplace(card.agent_id, line_no);
        if (!inserted) {
            throw DuplicateAgentId(card.agent_id,
                                   "lines " + std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        cards.push_back(std::move(card));
    }
    if (cards.empty()) {
        throw EmptyRegistry();
    }
    return Registry::from_cards(std::move(cards), sha256_hex(content));
}

inline Registry load_registry(const std::filesystem::path& path, bool lenient = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open registry file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_registry(buf.str(), lenient);
}

/// Returns a new Registry with `card` appended; the input is untouched.
inline Registry inject_agent(const Registry& registry, AgentCard card) {
    if (registry.contains(card.agent_id)) {
        throw DuplicateAgentId(card.agent_id);
    }
    std::vector<AgentCard> cards = registry.agents();
    cards.push_back(std::move(card));
    return Registry::from_cards(std::move(cards));
}

/// Returns a new Registry identical except for one card's description text.
/// Callers enforce the attacker constraint: only the malicious card's id is
/// ever passed from the attack driver.
inline Registry replace_description(const Registry& registry, std::string_view agent_id,
                                    std::string_view new_description) {
    if (!registry.contains(agent_id)) {
        throw UnknownAgentId(std::string(agent_id));
    }
    if (trim_copy(new_description).empty()) {
        throw EmptyDescription();
    }
    std::vector<AgentCard> cards = registry.agents();
    for (auto& card : cards) {
        if (card.agent_id == agent_id) {
            card.description = std::string(new_description);
            break;
        }
    }
    return Registry::from_cards(std::move(cards));
}

/// Benign cards tagged with `domain`, in registry order. Malicious cards are
/// excluded regardless of their tags.
inline DescriptionSet collect_domain_descriptions(const Registry& registry, std::string_view domain) {
    DescriptionSet set;
    set.domain = to_lower_copy(domain);
    for (const auto& card : registry.agents()) {
        if (!card.is_malicious && card.has_domain(set.domain)) {
            set.descriptions.emplace_back(card.agent_id, card.description);
        }
    }
    if (set.descriptions.empty()) {
        throw EmptyDomain(set.domain);
    }
    return set;
}

/// Full-file diagnostics for `validate`: unlike load_registry this does not
/// stop at the first problem.
struct RegistryDiagnostics {
    struct Issue {
        std::size_t line;
        std::string message;
    };
    std::size_t card_count = 0;
    std::vector<Issue> issues;

    bool ok() const noexcept { return issues.empty() && card_count > 0; }
};

inline RegistryDiagnostics validate_registry_file(const std::filesystem::path& path, bool lenient = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open registry file: " + path.string());
    }
    RegistryDiagnostics diag;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            diag.issues.push_back({line_no, "invalid JSON"});
            continue;
        }
        try {
            AgentCard card = detail::parse_card(j, line_no, lenient);
            auto [it, inserted] = seen.emplace(card.agent_id, line_no);
            if (!inserted) {
                diag.issues.push_back({line_no, "duplicate agent_id \"" + card.agent_id + "\" (first seen at line " +
                                                    std::to_string(it->second) + ")"});
                continue;
            }
            ++diag.card_count;
        } catch (const DataError& e) {
            diag.issues.push_back({line_no, e.what()});
        }
    }
    if (line_no == 0) {
        diag.issues.push_back({0, "registry file is empty"});
    }
    return diag;
}

} // namespace skillroute
