#pragma once

#include <optional>
#include <string>
#include <vector>

#include "auditbot/engine.hpp"
#include "auditbot/events.hpp"
#include "auditbot/policy.hpp"

namespace auditbot {

enum class FailureLocation { actor_inaction, role_unfilled, no_responsibility_defined };

std::string to_string(FailureLocation l);

// Where in the chain of command the required process step failed.
struct FailurePoint {
    std::string finding_id;
    std::string responsible_role;
    std::vector<std::string> responsible_actors;
    FailureLocation located_at = FailureLocation::no_responsibility_defined;
    std::vector<std::string> escalation_chain;  // upward via reports_to
    std::string narrative;
};

struct ResponsibleParty {
    std::string role;                 // empty when nothing defines one
    std::vector<std::string> actors;  // role holders on the project
    std::optional<std::string> warning;  // ambiguous job-description mapping
};

// rule.responsible_role wins; otherwise the lexicographically first job
// description listing the rule id. Actors are org-chart members holding
// that role on the given project.
ResponsibleParty responsible_party(const CompiledRule& rule, const std::string& project,
                                   const RegisterSet& registers);

FailurePoint locate_failure(const Finding& finding, const CompiledRule& rule, const EventLog& log,
                            const RegisterSet& registers);

// The reports_to walk from an actor to the chain's root.
std::vector<std::string> escalation_chain_from(const std::string& actor,
                                               const RegisterSet& registers);

// Minimal reports_to depth, ties by actor id; empty when the project has
// no org-chart members.
std::optional<std::string> most_senior_member(const std::string& project,
                                              const RegisterSet& registers);

}  // namespace auditbot
