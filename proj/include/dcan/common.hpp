// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dcan {

// Config/CLI problems (exit code 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or missing input data (exit code 2).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure, e.g. NaN loss (exit code 3).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::logic_error(msg);
}

inline void check_config(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

inline void check_data(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

}  // namespace dcan
