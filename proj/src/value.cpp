#include "auditbot/value.hpp"

#include <cstdio>

namespace auditbot {

std::string value_to_string(const Value& v) {
    struct Visitor {
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            return buf;
        }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
    };
    return std::visit(Visitor{}, v);
}

std::string format_diagnostic(const Diagnostic& d) {
    if (d.line <= 0) return d.message;
    return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message;
}

}  // namespace auditbot
