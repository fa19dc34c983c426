// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key = value configuration with [section] grouping. Every key is
// validated against the schema below; unknown keys are errors so typos
// fail fast. The resolved form is re-loadable and diff-friendly.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dcan {

class Config {
public:
    // Schema defaults only.
    Config();

    // Parse an INI-style file into this config. Unknown keys throw
    // ConfigError. Later assignments override earlier ones.
    void load_file(const std::string& path);

    // Apply a single "section.key=value" (or "key=value") override.
    void apply_override(const std::string& assignment);

    bool has(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_str(const std::string& key) const;

    void set(const std::string& key, const std::string& value);

    // Full key = value rendering, grouped by section, keys sorted.
    std::string resolved() const;

    // Comma-separated helper used for head assignments and seed lists.
    static std::vector<std::string> split_list(const std::string& s);

private:
    std::map<std::string, std::string> values_;
};

}  // namespace dcan
