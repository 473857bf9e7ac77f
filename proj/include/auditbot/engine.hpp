#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "auditbot/alarp.hpp"
#include "auditbot/analytics.hpp"
#include "auditbot/events.hpp"
#include "auditbot/policy.hpp"

namespace auditbot {

// One detected (non)compliance instance and the events supporting it.
struct Finding {
    std::string id;  // rule_id + ":" + trigger_seq
    std::string rule_id;
    RuleKind kind = RuleKind::obligation;
    int harm = 1;
    std::string project;
    std::optional<std::string> subject_actor;
    std::uint64_t trigger_seq = 0;  // 0 marks a configuration finding
    std::vector<std::uint64_t> evidence_seqs;
    std::string message;
    std::map<std::string, double> metrics;
    std::optional<bool> justified;  // exception rules only

    bool operator==(const Finding&) const = default;
};

struct SeqWindow {
    std::uint64_t lo = 0;
    std::uint64_t hi = UINT64_MAX;

    bool contains(std::uint64_t seq) const { return seq >= lo && seq <= hi; }
};

struct RunMeta {
    std::string policy_hash;
    std::string log_hash;
    std::optional<SeqWindow> window;
    std::string clock;  // RFC 3339, injectable
};

struct FindingSet {
    std::vector<Finding> findings;  // sorted by (trigger_seq, rule_id)
    RunMeta meta;

    std::size_t count_for_rule(const std::string& rule_id) const;
};

std::vector<Finding> eval_obligation(const CompiledRule& rule, const EventLog& log);
std::vector<Finding> eval_legitimacy(const CompiledRule& rule, const EventLog& log,
                                     const RegisterSet& registers);
std::vector<Finding> eval_exception(const CompiledRule& rule, const EventLog& log);
std::vector<Finding> eval_hours(const CompiledRule& rule, const EventLog& log);
std::vector<Finding> eval_gate(const CompiledRule& rule, const EventLog& log);
std::vector<Finding> eval_drift(const CompiledRule& rule, const EventLog& log);

std::vector<Finding> eval_rule(const CompiledRule& rule, const EventLog& log,
                               const RegisterSet& registers);

// Evaluates every rule over the log, restricted to triggers inside the
// window (configuration findings always surface), sorted and stamped with
// run metadata. Pure function of its inputs.
FindingSet run_audit(const CompiledPolicy& policy, const EventLog& log,
                     const RegisterSet& registers,
                     const std::optional<SeqWindow>& window = std::nullopt,
                     const std::string& clock = "");

int likelihood_of(const std::string& rule_id, const FindingSet& findings);
std::vector<RiskAssessment> triage_all(const FindingSet& findings, const CompiledPolicy& policy);

// Removes every payload field outside the manifest; event-level fields
// (seq, ts, type, project, actor) stay. Test/transparency utility.
EventLog redact_to_manifest(const EventLog& log, const DataAccessManifest& manifest);

// Streaming evaluation: feeds events one at a time and reports the findings
// whose trigger is the arriving event, so high-harm hits can be alerted
// before the next event is read. Exception findings are provisionally
// unjustified until their justification arrives.
class IncrementalAuditor {
  public:
    IncrementalAuditor(const CompiledPolicy& policy, const RegisterSet& registers);

    std::vector<Finding> on_event(Event event);

    const EventLog& log() const { return log_; }
    std::size_t findings_so_far(const std::string& rule_id) const;

  private:
    const CompiledPolicy* policy_;
    const RegisterSet* registers_;
    EventLog log_;
    std::map<std::string, std::size_t> counts_;
    // hours fold state per rule: (actor, week) totals, contributing events
    // and already-fired weeks
    struct HoursState {
        std::map<std::pair<std::string, IsoWeek>, double> totals;
        std::map<std::pair<std::string, IsoWeek>, std::vector<std::uint64_t>> contributions;
        std::set<std::pair<std::string, IsoWeek>> fired;
    };
    std::map<std::string, HoursState> hours_state_;
};

}  // namespace auditbot
