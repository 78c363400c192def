#include "ted/errors.hpp"

namespace ted {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::schema: return "schema error";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::empty_input: return "empty-input error";
        case ErrorKind::duplicate_entry: return "duplicate-entry error";
        case ErrorKind::range: return "range error";
        case ErrorKind::coverage: return "coverage error";
        case ErrorKind::manifest: return "manifest error";
        case ErrorKind::missing_au: return "missing-AU error";
        case ErrorKind::domain: return "domain error";
        case ErrorKind::shape: return "shape error";
        case ErrorKind::degenerate_input: return "degenerate-input error";
        case ErrorKind::undefined_correlation: return "undefined-correlation error";
        case ErrorKind::degrees_of_freedom: return "degrees-of-freedom error";
        case ErrorKind::degenerate_labels: return "degenerate-labels error";
        case ErrorKind::labeling: return "labeling error";
    }
    return "error";
}

ErrorCategory category_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
            return ErrorCategory::config;
        case ErrorKind::io:
        case ErrorKind::schema:
        case ErrorKind::parse:
        case ErrorKind::empty_input:
        case ErrorKind::duplicate_entry:
        case ErrorKind::range:
        case ErrorKind::coverage:
        case ErrorKind::manifest:
        case ErrorKind::missing_au:
            return ErrorCategory::parse;
        default:
            return ErrorCategory::compute;
    }
}

}  // namespace ted
