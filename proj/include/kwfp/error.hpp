#pragma once

#include <stdexcept>
#include <string>

namespace kwfp {

// Base for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input bytes/text (bad pcap magic, bad JSON line, ...).
struct ParseError : Error {
    using Error::Error;
};

// Structurally well-formed data that breaks a documented invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Bad command-line / API usage.
struct UsageError : Error {
    using Error::Error;
};

// Filesystem failures, always carrying the path.
struct IoError : Error {
    using Error::Error;
};

}  // namespace kwfp
