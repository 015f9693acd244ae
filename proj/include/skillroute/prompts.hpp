#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "skillroute/errors.hpp"

namespace skillroute {

/// Replaces {name} placeholders with the given values. Unknown placeholders
/// are left verbatim so templates stay inspectable when partially rendered.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        auto close = tmpl.find('}', open + 1);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        std::string name(tmpl.substr(open + 1, close - open - 1));
        auto it = vars.find(name);
        if (it != vars.end()) {
            out.append(it->second);
        } else {
            out.append(tmpl.substr(open, close - open + 1));
        }
        pos = close + 1;
    }
    return out;
}

/// User-prompt templates for the three generation roles. The system prompts
/// are fixed (they carry the role tag the mock provider dispatches on); only
/// the user prompts are editable, optionally loaded from a directory of
/// {query_gen,synthesize,rewrite}.txt files.
struct PromptTemplates {
    std::string query_gen_user;
    std::string synthesize_user;
    std::string rewrite_user;

    static const std::string& query_gen_system() {
        static const std::string s = "role: query_gen\n"
                                     "You simulate end users of a multi-agent service network. You write short, "
                                     "realistic task requests.";
        return s;
    }

    static const std::string& synthesize_system() {
        static const std::string s = "role: synthesize\n"
                                     "You write skill descriptions for service agents. Respond with the description "
                                     "text only.";
        return s;
    }

    static const std::string& rewrite_system() {
        static const std::string s = "role: rewrite\n"
                                     "You revise skill descriptions for service agents. Respond with the revised "
                                     "description text only.";
        return s;
    }

    static PromptTemplates defaults() {
        PromptTemplates t;
        t.query_gen_user = "<references>\n"
                           "{refs}\n"
                           "</references>\n"
                           "\n"
                           "The references above are skill descriptions of service agents in one domain. "
                           "Write exactly {count} short, semantically diverse user requests that those agents "
                           "could plausibly handle. Return one request per line with no numbering and no "
                           "commentary.\n";
        t.synthesize_user = "<references>\n"
                            "{refs}\n"
                            "</references>\n"
                            "\n"
                            "Summarize the common capabilities described above into a single skill description "
                            "for a new agent offering the same services. Keep it professional and plausible, at "
                            "most {max_chars} characters. Return only the description.\n";
        t.rewrite_user = "<current_description>\n"
                         "{current_description}\n"
                         "</current_description>\n"
                         "\n"
                         "<failing_queries>\n"
                         "{worst_queries_with_margins}\n"
                         "</failing_queries>\n"
                         "\n"
                         "The description above loses the routing competition for the queries listed (each "
                         "margin is the score gap to the best competitor; larger is worse). Rewrite the "
                         "description so it aligns better with those queries while staying plausible and "
                         "professional. At most {max_chars} characters. Return only the rewritten description. "
                         "Variation seed: {variant}.\n";
        return t;
    }

    /// Loads {query_gen,synthesize,rewrite}.txt from `dir`; missing files keep
    /// their defaults.
    static PromptTemplates load_dir(const std::filesystem::path& dir) {
        PromptTemplates t = defaults();
        auto read_if_present = [&](const char* name, std::string& target) {
            auto path = dir / name;
            if (!std::filesystem::exists(path)) {
                return;
            }
            std::ifstream in(path, std::ios::binary);
            if (!in) {
                throw IoFailure("cannot read prompt template: " + path.string());
            }
            std::ostringstream buf;
            buf << in.rdbuf();
            target = buf.str();
        };
        read_if_present("query_gen.txt", t.query_gen_user);
        read_if_present("synthesize.txt", t.synthesize_user);
        read_if_present("rewrite.txt", t.rewrite_user);
        return t;
    }
};

} // namespace skillroute
