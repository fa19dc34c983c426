// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#include "dcan/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcan/common.hpp"

namespace dcan {

namespace {

struct SchemaEntry {
    const char* key;
    const char* def;
};

// The full key space. Types are enforced lazily by the typed getters so the
// schema stays a single flat table.
const SchemaEntry kSchema[] = {
    {"seed", "1"},

    {"model.dim", "128"},
    {"model.word_dim", "200"},
    {"model.heads", "decay,circle,log,gamma,none,none,none,none"},
    {"model.blocks", "2"},
    {"model.news_blocks", "1"},
    {"model.title_len", "30"},
    {"model.history", "50"},
    {"model.dropout", "0.2"},
    {"model.eta", "0.9"},
    {"model.freq", "10000"},
    {"model.beta", "1.0"},
    {"model.phi_decay", "true"},
    {"model.phi_circle", "true"},
    {"model.phi_log", "true"},
    {"model.phi_gamma", "true"},
    {"model.circle_literal_sin", "false"},
    {"model.value_injection", "pre"},
    {"model.mask_zero_coverage", "false"},
    {"model.embedding_file", ""},

    {"train.lr", "0.001"},
    {"train.beta1", "0.9"},
    {"train.beta2", "0.999"},
    {"train.adam_eps", "1e-8"},
    {"train.batch", "64"},
    {"train.epochs", "5"},
    {"train.mask_prob", "0.2"},
    {"train.gamma", "0.3"},
    {"train.window_sampling", "true"},

    {"data.news", ""},
    {"data.behaviors", ""},

    {"eval.negatives", "100"},
    {"eval.alpha", "1.0"},
    {"eval.seeds", "1,2,3,4,5"},
    {"eval.checkpoint", ""},
    {"eval.div_source", "model"},
    {"eval.full_catalog", "false"},

    {"synth.users", "500"},
    {"synth.news", "200"},
    {"synth.topics", "8"},
    {"synth.stickiness", "0.8"},
    {"synth.vocab", "240"},
    {"synth.title_len", "8"},
    {"synth.min_clicks", "12"},
    {"synth.max_clicks", "30"},

    {"ablate.head_sweep", "8,10,20,25"},
};

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config::Config() {
    for (const auto& e : kSchema) values_[e.key] = e.def;
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (!section.empty()) key = section + "." + key;
        set(key, value);
    }
}

void Config::apply_override(const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    it->second = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
}

int64_t Config::get_int(const std::string& key) const {
    const std::string& v = get_str(key);
    char* end = nullptr;
    const long long r = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError(key + ": not an integer: '" + v + "'");
    return r;
}

double Config::get_double(const std::string& key) const {
    const std::string& v = get_str(key);
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError(key + ": not a number: '" + v + "'");
    return r;
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": not a boolean: '" + v + "'");
}

std::string Config::resolved() const {
    std::ostringstream os;
    // Section-less keys first so reloading never attributes them to the
    // preceding [section].
    for (const auto& [key, value] : values_)
        if (key.find('.') == std::string::npos) os << key << " = " << value << "\n";
    std::string section;
    for (const auto& [key, value] : values_) {
        const size_t dot = key.find('.');
        if (dot == std::string::npos) continue;
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            os << "\n[" << sec << "]\n";
            section = sec;
        }
        os << key.substr(dot + 1) << " = " << value << "\n";
    }
    return os.str();
}

std::vector<std::string> Config::split_list(const std::string& s) {
    if (trim(s).empty()) return {};
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace dcan
