#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditbot/accountability.hpp"
#include "auditbot/alarp.hpp"
#include "auditbot/engine.hpp"
#include "auditbot/policy.hpp"

namespace auditbot {

struct RegionSummary {
    std::size_t broadly_acceptable = 0;
    std::size_t alarp = 0;
    std::size_t intolerable = 0;
    std::size_t total = 0;
};

// One audit run, ready for rendering and vault storage.
struct RunReport {
    RunMeta meta;
    AlarpParams alarp;
    std::vector<Finding> findings;
    std::vector<RiskAssessment> assessments;
    std::vector<FailurePoint> traces;
    RegionSummary summary;
};

RunReport build_report(const CompiledPolicy& policy, const FindingSet& findings,
                       bool with_traces, const EventLog& log, const RegisterSet& registers);

nlohmann::json finding_to_json(const Finding& f);
Finding finding_from_json(const nlohmann::json& j);
nlohmann::json assessment_to_json(const RiskAssessment& a);
nlohmann::json trace_to_json(const FailurePoint& t);
nlohmann::json run_meta_to_json(const RunMeta& meta, const CompiledPolicy& policy,
                                std::size_t event_count);

nlohmann::json report_to_json(const RunReport& report, const CompiledPolicy& policy,
                              std::size_t event_count);
std::string report_to_text(const RunReport& report, const CompiledPolicy& policy);

std::string manifest_to_text(const DataAccessManifest& manifest);
nlohmann::json manifest_to_json(const DataAccessManifest& manifest);

std::string trace_to_text(const FailurePoint& t);

// Compact rule descriptor embedded in run_meta so traces can be rebuilt
// from the vault without the policy file.
nlohmann::json rule_descriptor(const CompiledRule& rule);
std::optional<CompiledRule> rule_from_descriptor(const nlohmann::json& j);

}  // namespace auditbot
