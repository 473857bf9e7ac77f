#include "auditbot/alarp.hpp"

#include <cmath>
#include <stdexcept>

#include "auditbot/engine.hpp"

namespace auditbot {

std::string to_string(RiskRegion r) {
    switch (r) {
        case RiskRegion::broadly_acceptable: return "broadly_acceptable";
        case RiskRegion::alarp: return "alarp";
        case RiskRegion::intolerable: return "intolerable";
    }
    return "alarp";
}

int likelihood_from_count(std::size_t n) {
    if (n <= 1) return 1;
    if (n <= 3) return 2;
    if (n <= 6) return 3;
    if (n <= 10) return 4;
    return 5;
}

RiskRegion region_of(int score, const AlarpParams& params) {
    if (score >= params.intolerable_min) return RiskRegion::intolerable;
    if (score <= params.acceptable_max) return RiskRegion::broadly_acceptable;
    return RiskRegion::alarp;
}

bool mitigation_justified(double cost_of_risk, double cost_of_mitigation, double factor) {
    if (!std::isfinite(cost_of_risk) || !std::isfinite(cost_of_mitigation) || cost_of_risk < 0.0 ||
        cost_of_mitigation < 0.0) {
        throw std::invalid_argument("costs must be finite and non-negative");
    }
    return cost_of_mitigation <= factor * cost_of_risk;
}

RiskAssessment triage_finding(const Finding& finding, int likelihood, const AlarpParams& params) {
    RiskAssessment a;
    a.finding_id = finding.id;
    a.likelihood = likelihood;
    a.score = finding.harm * likelihood;
    a.region = region_of(a.score, params);
    a.rationale = "harm " + std::to_string(finding.harm) + " x likelihood " +
                  std::to_string(likelihood) + " = " + std::to_string(a.score) + "; thresholds " +
                  std::to_string(params.acceptable_max) + "/" +
                  std::to_string(params.intolerable_min);
    switch (a.region) {
        case RiskRegion::intolerable:
            a.mitigation_required = true;
            a.rationale += "; intolerable: must be reduced regardless of cost";
            break;
        case RiskRegion::broadly_acceptable:
            a.mitigation_required = false;
            a.rationale += "; broadly acceptable";
            break;
        case RiskRegion::alarp:
            a.rationale += "; alarp: costs not provided";
            break;
    }
    return a;
}

void apply_mitigation_cost_test(RiskAssessment& a, const AlarpParams& params,
                                std::optional<double> risk_cost,
                                std::optional<double> mitigation_cost) {
    if (a.region != RiskRegion::alarp || !risk_cost || !mitigation_cost) return;
    const bool required =
        mitigation_justified(*risk_cost, *mitigation_cost, params.disproportion_factor);
    a.mitigation_required = required;
    const auto tail = a.rationale.rfind("; alarp:");
    if (tail != std::string::npos) a.rationale.erase(tail);
    a.rationale += required ? "; alarp: mitigation required (cost within gross-disproportion bound)"
                            : "; alarp: mitigation waived (cost grossly disproportionate)";
}

}  // namespace auditbot
