#pragma once

// Error taxonomy shared by the library and the CLI exit-code contract:
// usage/parse problems (exit 2), missing artifacts (exit 3), numeric
// failures at runtime (exit 4). Shape and domain errors from the numeric
// layer derive from std::invalid_argument / std::domain_error and map to 2.

#include <stdexcept>
#include <string>

namespace attnae {

struct missing_artifact_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace attnae
