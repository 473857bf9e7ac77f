#include "auditbot/accountability.hpp"

#include <algorithm>
#include <set>

namespace auditbot {

std::string to_string(FailureLocation l) {
    switch (l) {
        case FailureLocation::actor_inaction: return "actor_inaction";
        case FailureLocation::role_unfilled: return "role_unfilled";
        case FailureLocation::no_responsibility_defined: return "no_responsibility_defined";
    }
    return "no_responsibility_defined";
}

ResponsibleParty responsible_party(const CompiledRule& rule, const std::string& project,
                                   const RegisterSet& registers) {
    ResponsibleParty party;
    if (rule.responsible_role) {
        party.role = *rule.responsible_role;
    } else {
        std::vector<std::string> candidates;
        for (const auto& jd : registers.jobdesc) {
            if (std::find(jd.rule_ids.begin(), jd.rule_ids.end(), rule.id) != jd.rule_ids.end()) {
                candidates.push_back(jd.role);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        if (!candidates.empty()) {
            party.role = candidates.front();
            if (candidates.size() > 1) {
                party.warning = "rule " + rule.id + " appears in " +
                                std::to_string(candidates.size()) +
                                " job descriptions; using role '" + party.role + "'";
            }
        }
    }
    if (!party.role.empty()) {
        party.actors = registers.actors_with_role(party.role, project);
    }
    return party;
}

std::vector<std::string> escalation_chain_from(const std::string& actor,
                                               const RegisterSet& registers) {
    std::vector<std::string> chain;
    std::set<std::string> seen;
    std::string current = actor;
    while (seen.insert(current).second) {
        chain.push_back(current);
        const auto superior = registers.reports_to(current);
        if (!superior) break;
        current = *superior;
    }
    return chain;
}

std::optional<std::string> most_senior_member(const std::string& project,
                                              const RegisterSet& registers) {
    std::optional<std::string> best;
    std::size_t best_depth = SIZE_MAX;
    for (const OrgEntry* member : registers.project_members(project)) {
        const std::size_t depth = escalation_chain_from(member->actor, registers).size();
        if (depth < best_depth || (depth == best_depth && (!best || member->actor < *best))) {
            best = member->actor;
            best_depth = depth;
        }
    }
    return best;
}

namespace {

// For an obligation finding: did a responsible actor perform the expected
// activity (the require/close event type) for the joined subject before
// the trigger? Reports near-miss emission for a different subject.
struct ActivityScan {
    bool emitted_for_subject = false;
    std::optional<std::uint64_t> near_miss_seq;
};

ActivityScan scan_expected_activity(const Finding& finding, const CompiledRule& rule,
                                    const EventLog& log,
                                    const std::vector<std::string>& actors) {
    ActivityScan scan;
    if (rule.kind != RuleKind::obligation) return scan;
    const auto& p = rule.obligation();
    const std::string expected_type =
        p.mode == ObligationMode::exists_before ? p.require : p.close_type.value_or(p.require);

    const Event* trigger = nullptr;
    for (const Event& e : log.events()) {
        if (e.seq == finding.trigger_seq) {
            trigger = &e;
            break;
        }
    }
    const Value* subject = trigger ? trigger->field(p.join_on) : nullptr;

    for (const Event* e : log.events_before(finding.trigger_seq, expected_type)) {
        if (!e->actor) continue;
        if (std::find(actors.begin(), actors.end(), *e->actor) == actors.end()) continue;
        const Value* key = e->field(p.join_on);
        if (subject != nullptr && key != nullptr && *key == *subject) {
            scan.emitted_for_subject = true;
            return scan;
        }
        if (!scan.near_miss_seq) scan.near_miss_seq = e->seq;
    }
    return scan;
}

}  // namespace

FailurePoint locate_failure(const Finding& finding, const CompiledRule& rule, const EventLog& log,
                            const RegisterSet& registers) {
    FailurePoint fp;
    fp.finding_id = finding.id;
    const ResponsibleParty party = responsible_party(rule, finding.project, registers);
    fp.responsible_role = party.role;
    fp.responsible_actors = party.actors;

    if (party.role.empty()) {
        fp.located_at = FailureLocation::no_responsibility_defined;
        fp.narrative = "No role is responsible for rule " + rule.id +
                       ": the policy-to-job-description mapping is incomplete.";
        return fp;
    }

    if (party.actors.empty()) {
        fp.located_at = FailureLocation::role_unfilled;
        fp.narrative = "Role '" + party.role + "' is responsible for rule " + rule.id +
                       " but no one holds it on project " + finding.project + ".";
        if (const auto senior = most_senior_member(finding.project, registers)) {
            fp.escalation_chain = escalation_chain_from(*senior, registers);
            fp.narrative += " Escalating from the project's most senior member " + *senior + ".";
        } else {
            fp.narrative += " The project has no org-chart members to escalate through.";
        }
        if (party.warning) fp.narrative += " Warning: " + *party.warning + ".";
        return fp;
    }

    fp.located_at = FailureLocation::actor_inaction;
    fp.escalation_chain = escalation_chain_from(party.actors.front(), registers);
    fp.narrative = "Role '" + party.role + "' (held by ";
    for (std::size_t i = 0; i < party.actors.size(); ++i) {
        if (i != 0) fp.narrative += ", ";
        fp.narrative += party.actors[i];
    }
    fp.narrative += ") was responsible for rule " + rule.id + " on project " + finding.project +
                    " and the expected activity did not happen before the trigger (seq " +
                    std::to_string(finding.trigger_seq) + ").";
    const ActivityScan scan = scan_expected_activity(finding, rule, log, party.actors);
    if (scan.near_miss_seq) {
        fp.narrative += " A responsible actor performed the expected activity for a different"
                        " subject at seq " +
                        std::to_string(*scan.near_miss_seq) + ".";
    }
    if (party.warning) fp.narrative += " Warning: " + *party.warning + ".";
    return fp;
}

}  // namespace auditbot
