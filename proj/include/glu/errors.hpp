#pragma once

#include <stdexcept>
#include <string>

namespace glu {

/// A referenced file or directory does not exist.
struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A file exists but its contents are inconsistent or unreadable.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration; `path` names the offending field (e.g. "model.K").
struct ConfigError : std::runtime_error {
    std::string path;
    ConfigError(std::string field_path, const std::string& msg)
        : std::runtime_error(field_path + ": " + msg), path(std::move(field_path)) {}
};

/// Non-finite values appeared during a numerical procedure.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace glu
