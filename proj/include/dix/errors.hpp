#pragma once

#include <stdexcept>
#include <string>

namespace dix {

// Error taxonomy shared across the library. Each failure mode maps onto one
// of these so callers (and the CLI) can translate them uniformly.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Wrong shape, unknown layer, mismatched dimensions.
class addressing_error : public error {
public:
    explicit addressing_error(const std::string& msg) : error(msg) {}
};

// Invalid or inconsistent user-supplied configuration.
class configuration_error : public error {
public:
    explicit configuration_error(const std::string& msg) : error(msg) {}
};

// Non-finite values or other numeric breakdowns, named by site.
class numerical_error : public error {
public:
    explicit numerical_error(const std::string& msg) : error(msg) {}
};

// Requested feature the target (model, plugin) does not provide.
class capability_error : public error {
public:
    explicit capability_error(const std::string& msg) : error(msg) {}
};

// Checkpoint or plugin payload could not be loaded.
class load_error : public error {
public:
    explicit load_error(const std::string& msg) : error(msg) {}
};

// On-disk artifact violates its binary format.
class format_error : public error {
public:
    explicit format_error(const std::string& msg) : error(msg) {}
};

// A sanity protocol could not complete (e.g. training budget exhausted).
class protocol_failure : public error {
public:
    explicit protocol_failure(const std::string& msg) : error(msg) {}
};

} // namespace dix
