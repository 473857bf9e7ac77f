#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "auditbot/policy.hpp"

namespace auditbot {

enum class RiskRegion { broadly_acceptable, alarp, intolerable };

std::string to_string(RiskRegion r);

struct RiskAssessment {
    std::string finding_id;
    int likelihood = 1;  // 1..5
    int score = 1;       // harm x likelihood
    RiskRegion region = RiskRegion::broadly_acceptable;
    std::optional<bool> mitigation_required;
    std::string rationale;
};

// Frequency-proxy likelihood: 1 -> 1, 2-3 -> 2, 4-6 -> 3, 7-10 -> 4, >= 11 -> 5.
int likelihood_from_count(std::size_t findings_in_window);

RiskRegion region_of(int score, const AlarpParams& params);

// Mitigation is waived only when grossly disproportionate: required iff
// cost_of_mitigation <= factor * cost_of_risk. Throws std::invalid_argument
// on negative or non-finite costs.
bool mitigation_justified(double cost_of_risk, double cost_of_mitigation, double factor);

struct Finding;  // check_engine

RiskAssessment triage_finding(const Finding& finding, int likelihood, const AlarpParams& params);

// Applies the gross-disproportion test to an alarp-region assessment when
// the rule supplied risk/mitigation costs; otherwise leaves it unset.
void apply_mitigation_cost_test(RiskAssessment& assessment, const AlarpParams& params,
                                std::optional<double> risk_cost,
                                std::optional<double> mitigation_cost);

}  // namespace auditbot
