#pragma once

#include <stdexcept>
#include <string>

namespace ted {

enum class ErrorKind {
    // configuration
    config,
    // input parsing
    io,
    schema,
    parse,
    empty_input,
    duplicate_entry,
    range,
    coverage,
    manifest,
    missing_au,
    // computation
    domain,
    shape,
    degenerate_input,
    undefined_correlation,
    degrees_of_freedom,
    degenerate_labels,
    labeling,
};

const char* to_string(ErrorKind kind);

/// Coarse category used by the CLI exit-code taxonomy.
enum class ErrorCategory { config, parse, compute };

ErrorCategory category_of(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    ErrorCategory category() const noexcept { return category_of(kind_); }

private:
    ErrorKind kind_;
};

}  // namespace ted
