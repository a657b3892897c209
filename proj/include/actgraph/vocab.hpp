#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/core.hpp"

namespace actgraph {

// The extensible name sets the rule language draws from. Loaded from a config
// file so new atomic actions extend the language without a code change.
struct Vocabulary {
    std::set<std::string> elements;        // actors/objects: person, car, bag, ...
    std::set<std::string> actions;         // atomic actions: use-phone, talk, ...
    std::set<std::string> spatial_unary;   // stop, move, disappear, re-identified
    std::set<std::string> spatial_binary;  // near, approach, same-camera
    std::set<std::string> temporal;        // then, and, or, not

    bool is_element(const std::string& n) const { return elements.count(n) != 0; }
    bool is_action(const std::string& n) const { return actions.count(n) != 0; }
    bool is_spatial_unary(const std::string& n) const { return spatial_unary.count(n) != 0; }
    bool is_spatial_binary(const std::string& n) const { return spatial_binary.count(n) != 0; }
    bool is_temporal(const std::string& n) const { return temporal.count(n) != 0; }

    bool is_operator(const std::string& n) const {
        return is_action(n) || is_spatial_unary(n) || is_spatial_binary(n);
    }
};

inline bool valid_vocab_token(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

namespace detail {

inline void check_disjoint(const Vocabulary& v) {
    const std::vector<std::pair<std::string, const std::set<std::string>*>> sets = {
        {"elements", &v.elements},
        {"actions", &v.actions},
        {"spatial_unary", &v.spatial_unary},
        {"spatial_binary", &v.spatial_binary},
        {"temporal", &v.temporal},
    };
    for (size_t i = 0; i < sets.size(); ++i) {
        for (const auto& name : *sets[i].second) {
            if (!valid_vocab_token(name))
                throw Error("vocabulary: invalid token '" + name + "' in " + sets[i].first);
            for (size_t j = i + 1; j < sets.size(); ++j) {
                if (sets[j].second->count(name))
                    throw Error("vocabulary: '" + name + "' appears in both " + sets[i].first +
                                " and " + sets[j].first);
            }
        }
    }
}

}  // namespace detail

// File format: one `key: name name ...` entry per line, `#` comments.
inline Vocabulary parse_vocabulary(std::istream& in) {
    Vocabulary v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key.back() != ':')
            throw Error("vocabulary line " + std::to_string(lineno) + ": expected 'key:'");
        key.pop_back();
        std::set<std::string>* target = nullptr;
        if (key == "elements") target = &v.elements;
        else if (key == "actions") target = &v.actions;
        else if (key == "spatial_unary") target = &v.spatial_unary;
        else if (key == "spatial_binary") target = &v.spatial_binary;
        else if (key == "temporal") target = &v.temporal;
        else throw Error("vocabulary line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        std::string name;
        while (ls >> name) target->insert(name);
    }
    detail::check_disjoint(v);
    return v;
}

inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vocabulary file: " + path);
    return parse_vocabulary(in);
}

// The stock vocabulary used by the bundled rules and the trace generator.
inline Vocabulary default_vocabulary() {
    Vocabulary v;
    v.elements = {"person", "car", "bag", "bike"};
    v.actions = {"use-phone", "talk", "open-door", "give-stuff", "ride"};
    v.spatial_unary = {"stop", "move", "disappear", "re-identified"};
    v.spatial_binary = {"near", "approach", "same-camera"};
    v.temporal = {"then", "and", "or", "not"};
    detail::check_disjoint(v);
    return v;
}

}  // namespace actgraph
