#pragma once

#include <stdexcept>
#include <string>

namespace evonas {

/// Malformed domain value (encoding, objective vector, config field, ...).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable or inconsistent external input (IDX file, hierarchy file, CSV, ...).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Search-level failure (re-mating budget exhausted, evaluator unavailable, ...).
struct SearchError : std::runtime_error {
    explicit SearchError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / network failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace evonas
