#pragma once

#include <cstdint>
#include <string>
#include <variant>

namespace auditbot {

// A scalar event-payload value.
using Value = std::variant<std::string, std::int64_t, double, bool>;

std::string value_to_string(const Value& v);

struct Diagnostic {
    int line = 0;    // 1-based; 0 when not tied to a location
    int column = 0;  // 1-based
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

std::string format_diagnostic(const Diagnostic& d);

}  // namespace auditbot
