#include "auditbot/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace auditbot {

namespace {

Finding base_finding(const CompiledRule& rule, const Event& trigger) {
    Finding f;
    f.rule_id = rule.id;
    f.kind = rule.kind;
    f.harm = rule.harm;
    f.project = trigger.project;
    f.trigger_seq = trigger.seq;
    f.id = rule.id + ":" + std::to_string(trigger.seq);
    f.evidence_seqs = {trigger.seq};
    return f;
}

Finding configuration_finding(const CompiledRule& rule, const std::string& register_name) {
    Finding f;
    f.rule_id = rule.id;
    f.kind = rule.kind;
    f.harm = rule.harm;
    f.trigger_seq = 0;
    f.id = rule.id + ":0";
    f.evidence_seqs = {0};
    f.message = "register unavailable: " + register_name;
    return f;
}

// The registers a legitimacy check cannot run without.
std::vector<std::string> needed_registers(const LegitimacyParams& p) {
    switch (p.check) {
        case LegitimacyCheck::reviewer_competence: return {"competence"};
        case LegitimacyCheck::reviewer_independence: return {"independence"};
        case LegitimacyCheck::team_qualification: return {"orgchart", "competence"};
        case LegitimacyCheck::register_lookup: return {p.register_name};
    }
    return {};
}

std::string fmt_hours(double h) {
    std::ostringstream out;
    out.precision(2);
    out << std::fixed << h;
    return out.str();
}

// ── per-trigger evaluators (shared by batch and streaming paths) ─────────

std::optional<Finding> obligation_finding_for(const CompiledRule& rule, const EventLog& log,
                                              const Event& trigger) {
    const auto& p = rule.obligation();
    if (trigger.type != p.trigger || !rule.in_scope(trigger.project)) return std::nullopt;

    if (p.mode == ObligationMode::exists_before) {
        const Value* key = trigger.field(p.join_on);
        if (key == nullptr) {
            Finding f = base_finding(rule, trigger);
            f.message = "trigger lacks join field '" + p.join_on + "'";
            return f;
        }
        const auto witnesses = log.events_before(trigger.seq, p.require, {{p.join_on, *key}});
        for (const Event* w : witnesses) {
            if (w->project == trigger.project) return std::nullopt;
        }
        Finding f = base_finding(rule, trigger);
        f.message = "no " + p.require + " with " + p.join_on + "=" + value_to_string(*key) +
                    " before " + p.trigger;
        return f;
    }

    // all_closed_before
    std::vector<std::uint64_t> unclosed;
    for (const Event* open : log.events_before(trigger.seq, p.require)) {
        if (open->project != trigger.project) continue;
        if (p.filter) {
            const Value* v = open->field(p.filter->first);
            if (v == nullptr || value_to_string(*v) != p.filter->second) continue;
        }
        const Value* key = open->field(p.join_on);
        bool closed = false;
        if (key != nullptr) {
            for (const Event* close :
                 log.events_before(trigger.seq, *p.close_type, {{p.join_on, *key}})) {
                if (close->project == open->project) {
                    closed = true;
                    break;
                }
            }
        }
        if (!closed) unclosed.push_back(open->seq);
    }
    if (unclosed.empty()) return std::nullopt;
    Finding f = base_finding(rule, trigger);
    f.evidence_seqs = std::move(unclosed);
    f.evidence_seqs.push_back(trigger.seq);
    std::sort(f.evidence_seqs.begin(), f.evidence_seqs.end());
    f.message = std::to_string(f.evidence_seqs.size() - 1) + " open " + p.require +
                (p.filter ? " (" + p.filter->first + "=" + p.filter->second + ")" : "") +
                " not closed before " + p.trigger;
    f.metrics["open_count"] = static_cast<double>(f.evidence_seqs.size() - 1);
    return f;
}

std::optional<Finding> legitimacy_finding_for(const CompiledRule& rule, const EventLog& log,
                                              const RegisterSet& registers, const Event& trigger) {
    (void)log;
    const auto& p = rule.legitimacy();
    if (trigger.type != p.trigger || !rule.in_scope(trigger.project)) return std::nullopt;
    const CivilDate at = civil_date_of(trigger.ts);

    switch (p.check) {
        case LegitimacyCheck::reviewer_competence: {
            Finding f = base_finding(rule, trigger);
            f.subject_actor = trigger.actor;
            if (!trigger.actor) {
                f.message = "review event carries no actor";
                return f;
            }
            const auto qualification = trigger.field_string(p.qualification_field);
            if (!qualification) {
                f.message = "missing payload field '" + p.qualification_field + "'";
                return f;
            }
            if (registers.has_valid_competence(*trigger.actor, *qualification, at)) {
                return std::nullopt;
            }
            f.message = "actor " + *trigger.actor + " lacks valid competence '" + *qualification +
                        "' at event time";
            return f;
        }
        case LegitimacyCheck::reviewer_independence: {
            Finding f = base_finding(rule, trigger);
            f.subject_actor = trigger.actor;
            if (!trigger.actor) {
                f.message = "review event carries no actor";
                return f;
            }
            const auto severity = trigger.field_string(p.severity_field);
            const auto author_org = trigger.field_string("author_org");
            if (!severity || !author_org) {
                f.message = "missing payload field '" +
                            std::string(!severity ? p.severity_field : "author_org") + "'";
                return f;
            }
            const auto required_it = p.severity_map.find(*severity);
            if (required_it == p.severity_map.end()) {
                f.message = "severity label '" + *severity + "' not in severity_map";
                return f;
            }
            const int required = required_it->second;
            const auto actual = registers.independence_level(*trigger.actor, *author_org);
            if (actual && *actual >= required) return std::nullopt;
            f.metrics["required"] = required;
            if (actual) f.metrics["actual"] = *actual;
            f.message = "actor " + *trigger.actor + " independence " +
                        (actual ? std::to_string(*actual) : std::string("absent")) +
                        " below required " + std::to_string(required) + " for " + *author_org;
            return f;
        }
        case LegitimacyCheck::team_qualification: {
            for (const OrgEntry* member : registers.project_members(trigger.project)) {
                if (registers.has_valid_competence(member->actor, p.qualification, at)) {
                    return std::nullopt;
                }
            }
            Finding f = base_finding(rule, trigger);
            f.message = "no member of project " + trigger.project + " holds valid qualification '" +
                        p.qualification + "'";
            return f;
        }
        case LegitimacyCheck::register_lookup: {
            const Value* key = trigger.field(p.key_field);
            if (key == nullptr) {
                Finding f = base_finding(rule, trigger);
                f.subject_actor = trigger.actor;
                f.message = "missing payload field '" + p.key_field + "'";
                return f;
            }
            const std::string key_text = value_to_string(*key);
            if (registers.register_has_key(p.register_name, key_text)) return std::nullopt;
            Finding f = base_finding(rule, trigger);
            f.subject_actor = trigger.actor;
            f.message = p.key_field + "=" + key_text + " not found in " + p.register_name +
                        " register";
            return f;
        }
    }
    return std::nullopt;
}

std::optional<Finding> exception_finding_for(const CompiledRule& rule, const EventLog& log,
                                             const Event& override_event) {
    const auto& p = rule.exception();
    if (override_event.type != p.override_type || !rule.in_scope(override_event.project)) {
        return std::nullopt;
    }
    Finding f = base_finding(rule, override_event);
    f.subject_actor = override_event.actor;
    const Value* key = override_event.field(p.join_on);
    if (key == nullptr) {
        f.justified = false;
        f.message = "override lacks join field '" + p.join_on + "'";
        return f;
    }
    const TimeMs deadline = override_event.ts + p.justify_within_days * kMsPerDay;
    const Event* justification = nullptr;
    for (const Event& e : log.events()) {  // justifications are later; scan forward
        if (e.seq <= override_event.seq || e.type != p.justification_type) continue;
        const Value* jk = e.field(p.join_on);
        if (jk == nullptr || !(*jk == *key)) continue;
        justification = &e;
        break;
    }
    if (justification != nullptr && justification->ts < deadline) {
        f.justified = true;
        f.harm = 1;  // recorded, not alarming
        f.evidence_seqs.push_back(justification->seq);
        f.message = "override " + value_to_string(*key) + " justified within " +
                    std::to_string(p.justify_within_days) + " days";
        return f;
    }
    f.justified = false;
    if (justification != nullptr) {
        f.evidence_seqs.push_back(justification->seq);
        f.message = "override " + value_to_string(*key) + " justified late (after " +
                    std::to_string(p.justify_within_days) + " days)";
    } else {
        f.message = "override " + value_to_string(*key) + " without justification";
    }
    return f;
}

std::optional<Finding> gate_finding_for(const CompiledRule& rule, const Event& trigger) {
    const auto& p = rule.gate();
    if (trigger.type != p.trigger || !rule.in_scope(trigger.project)) return std::nullopt;
    Finding f = base_finding(rule, trigger);
    f.subject_actor = trigger.actor;
    const auto text = trigger.field_string(p.text_field);
    if (!text) {
        f.message = "missing payload field '" + p.text_field + "'";
        return f;
    }
    const LexiconScore score = lexicon_imbalance(*text, p.lexicon);
    if (score.imbalance < p.max_imbalance) return std::nullopt;
    f.message = "gendered wording imbalance " + std::to_string(score.imbalance) +
                " (masculine " + std::to_string(score.masculine) + ", feminine " +
                std::to_string(score.feminine) + ")";
    f.metrics["masculine"] = score.masculine;
    f.metrics["feminine"] = score.feminine;
    f.metrics["imbalance"] = score.imbalance;
    f.metrics["max_imbalance"] = static_cast<double>(p.max_imbalance);
    return f;
}

std::optional<Finding> drift_finding_for(const CompiledRule& rule, const EventLog& log,
                                         const Event& current) {
    const auto& p = rule.drift();
    if (current.type != "model.feature_snapshot" || !rule.in_scope(current.project)) {
        return std::nullopt;
    }
    if (current.field_string("feature").value_or("") != p.feature ||
        current.field_string("phase").value_or("") != "current") {
        return std::nullopt;
    }
    // Latest earlier baseline snapshot of the same feature and project.
    const Event* baseline = nullptr;
    for (const Event* e : log.events_before(current.seq, "model.feature_snapshot",
                                            {{"feature", Value{p.feature}}})) {
        if (e->project == current.project && e->field_string("phase").value_or("") == "baseline") {
            baseline = e;
        }
    }
    if (baseline == nullptr) return std::nullopt;  // pair not yet auditable

    Histogram base_h, cur_h;
    parse_histogram_text(baseline->field_string("histogram").value_or(""), base_h.edges,
                         base_h.probs);
    parse_histogram_text(current.field_string("histogram").value_or(""), cur_h.edges, cur_h.probs);
    Finding f = base_finding(rule, current);
    f.evidence_seqs = {baseline->seq, current.seq};
    if (base_h.edges != cur_h.edges) {
        f.message = "histogram edges mismatch between baseline and current snapshot";
        return f;
    }
    const double value = psi(base_h, cur_h);
    if (value < p.warn_threshold) return std::nullopt;
    f.metrics["psi"] = value;
    f.metrics["warn_threshold"] = p.warn_threshold;
    f.metrics["alarm_threshold"] = p.alarm_threshold;
    if (value < p.alarm_threshold) {
        f.harm = std::max(1, rule.harm - 2);
        f.message = "cause for alarm";
    } else {
        f.message = "the ML model might need to be changed";
    }
    return f;
}

// Left fold for hours rules: a week fires at the first event where it
// strictly exceeds the threshold with the required run of preceding
// breaching weeks already in place.
struct HoursFold {
    const CompiledRule* rule;
    std::map<std::pair<std::string, IsoWeek>, double> totals;
    std::map<std::pair<std::string, IsoWeek>, std::vector<std::uint64_t>> contributions;
    std::set<std::pair<std::string, IsoWeek>> fired;

    static IsoWeek week_after(IsoWeek w, int delta) {
        // Step via the Monday of the week to stay exact across year ends.
        CivilDate monday{w.year, 1, 4};  // Jan 4 is always in ISO week 1
        std::int64_t days = days_from_civil(monday);
        days -= weekday_from_days(days);
        days += (static_cast<std::int64_t>(w.week) - 1 + delta) * 7;
        return iso_week_of(civil_from_days(days));
    }

    std::optional<Finding> feed(const Event& e) {
        const auto& p = rule->hours();
        if (e.type != "activity.session" || !rule->in_scope(e.project)) return std::nullopt;
        if (!e.actor) return std::nullopt;  // unattributable session
        const auto start = parse_rfc3339(e.field_string("start").value_or(""));
        const auto end = parse_rfc3339(e.field_string("end").value_or(""));
        if (!start || !end || *start > *end) return std::nullopt;  // rejected at ingest

        std::vector<IsoWeek> touched;
        for (const auto& [week, hours] : split_session_hours(*start, *end)) {
            totals[{*e.actor, week}] += hours;
            contributions[{*e.actor, week}].push_back(e.seq);
            touched.push_back(week);
        }

        const int k = static_cast<int>(p.consecutive_weeks);
        std::vector<IsoWeek> completed;
        for (const IsoWeek& w0 : touched) {
            for (int offset = 0; offset < k; ++offset) {
                const IsoWeek w = week_after(w0, offset);
                if (fired.count({*e.actor, w})) continue;
                bool all_breach = true;
                for (int back = 0; back < k; ++back) {
                    const IsoWeek wb = week_after(w, -back);
                    auto it = totals.find({*e.actor, wb});
                    if (it == totals.end() || !(it->second > p.threshold_hours)) {
                        all_breach = false;
                        break;
                    }
                }
                if (all_breach) {
                    fired.insert({*e.actor, w});
                    completed.push_back(w);
                }
            }
        }
        if (completed.empty()) return std::nullopt;
        std::sort(completed.begin(), completed.end());

        Finding f = base_finding(*rule, e);
        f.subject_actor = e.actor;
        std::set<std::uint64_t> evidence;
        double worst = 0.0;
        std::string weeks_text;
        for (const IsoWeek& w : completed) {
            for (int back = 0; back < k; ++back) {
                const IsoWeek wb = week_after(w, -back);
                for (std::uint64_t seq : contributions[{*e.actor, wb}]) evidence.insert(seq);
            }
            worst = std::max(worst, totals[{*e.actor, w}]);
            if (!weeks_text.empty()) weeks_text += ", ";
            weeks_text += iso_week_key(w);
        }
        f.evidence_seqs.assign(evidence.begin(), evidence.end());
        f.message = "weekly hours " + fmt_hours(worst) + " exceed threshold " +
                    fmt_hours(p.threshold_hours) + " in " + weeks_text;
        f.metrics["week_hours"] = worst;
        f.metrics["threshold_hours"] = p.threshold_hours;
        if (k > 1) f.metrics["consecutive_weeks"] = static_cast<double>(k);
        return f;
    }
};

std::vector<Finding> legitimacy_config_findings(const CompiledRule& rule,
                                                const RegisterSet& registers) {
    std::vector<Finding> out;
    for (const std::string& name : needed_registers(rule.legitimacy())) {
        if (registers.register_empty(name)) {
            out.push_back(configuration_finding(rule, name));
            break;  // one configuration finding per rule
        }
    }
    return out;
}

}  // namespace

std::size_t FindingSet::count_for_rule(const std::string& rule_id) const {
    return static_cast<std::size_t>(
        std::count_if(findings.begin(), findings.end(),
                      [&](const Finding& f) { return f.rule_id == rule_id; }));
}

std::vector<Finding> eval_obligation(const CompiledRule& rule, const EventLog& log) {
    std::vector<Finding> out;
    for (const Event* trigger : log.all_of_type(rule.obligation().trigger)) {
        if (auto f = obligation_finding_for(rule, log, *trigger)) out.push_back(std::move(*f));
    }
    return out;
}

std::vector<Finding> eval_legitimacy(const CompiledRule& rule, const EventLog& log,
                                     const RegisterSet& registers) {
    std::vector<Finding> out = legitimacy_config_findings(rule, registers);
    if (!out.empty()) return out;
    for (const Event* trigger : log.all_of_type(rule.legitimacy().trigger)) {
        if (auto f = legitimacy_finding_for(rule, log, registers, *trigger)) {
            out.push_back(std::move(*f));
        }
    }
    return out;
}

std::vector<Finding> eval_exception(const CompiledRule& rule, const EventLog& log) {
    std::vector<Finding> out;
    for (const Event* e : log.all_of_type(rule.exception().override_type)) {
        if (auto f = exception_finding_for(rule, log, *e)) out.push_back(std::move(*f));
    }
    return out;
}

std::vector<Finding> eval_hours(const CompiledRule& rule, const EventLog& log) {
    HoursFold fold{&rule, {}, {}, {}};
    std::vector<Finding> out;
    for (const Event* e : log.all_of_type("activity.session")) {
        if (auto f = fold.feed(*e)) out.push_back(std::move(*f));
    }
    return out;
}

std::vector<Finding> eval_gate(const CompiledRule& rule, const EventLog& log) {
    std::vector<Finding> out;
    for (const Event* trigger : log.all_of_type(rule.gate().trigger)) {
        if (auto f = gate_finding_for(rule, *trigger)) out.push_back(std::move(*f));
    }
    return out;
}

std::vector<Finding> eval_drift(const CompiledRule& rule, const EventLog& log) {
    std::vector<Finding> out;
    for (const Event* e : log.all_of_type("model.feature_snapshot")) {
        if (auto f = drift_finding_for(rule, log, *e)) out.push_back(std::move(*f));
    }
    return out;
}

std::vector<Finding> eval_rule(const CompiledRule& rule, const EventLog& log,
                               const RegisterSet& registers) {
    switch (rule.kind) {
        case RuleKind::obligation: return eval_obligation(rule, log);
        case RuleKind::legitimacy: return eval_legitimacy(rule, log, registers);
        case RuleKind::exception: return eval_exception(rule, log);
        case RuleKind::hours: return eval_hours(rule, log);
        case RuleKind::gate: return eval_gate(rule, log);
        case RuleKind::drift: return eval_drift(rule, log);
    }
    return {};
}

FindingSet run_audit(const CompiledPolicy& policy, const EventLog& log,
                     const RegisterSet& registers, const std::optional<SeqWindow>& window,
                     const std::string& clock) {
    FindingSet set;
    set.meta.policy_hash = policy.source_hash;
    set.meta.log_hash = log.source_hash();
    set.meta.window = window;
    set.meta.clock = clock;
    for (const CompiledRule& rule : policy.rules) {
        for (Finding& f : eval_rule(rule, log, registers)) {
            const bool config = f.trigger_seq == 0;
            if (config || !window || window->contains(f.trigger_seq)) {
                set.findings.push_back(std::move(f));
            }
        }
    }
    std::sort(set.findings.begin(), set.findings.end(), [](const Finding& a, const Finding& b) {
        if (a.trigger_seq != b.trigger_seq) return a.trigger_seq < b.trigger_seq;
        return a.rule_id < b.rule_id;
    });
    return set;
}

int likelihood_of(const std::string& rule_id, const FindingSet& findings) {
    return likelihood_from_count(findings.count_for_rule(rule_id));
}

std::vector<RiskAssessment> triage_all(const FindingSet& findings, const CompiledPolicy& policy) {
    std::vector<RiskAssessment> out;
    out.reserve(findings.findings.size());
    for (const Finding& f : findings.findings) {
        const int likelihood = likelihood_of(f.rule_id, findings);
        RiskAssessment a = triage_finding(f, likelihood, policy.alarp);
        if (const CompiledRule* rule = policy.find_rule(f.rule_id)) {
            apply_mitigation_cost_test(a, policy.alarp, rule->risk_cost, rule->mitigation_cost);
        }
        out.push_back(std::move(a));
    }
    return out;
}

EventLog redact_to_manifest(const EventLog& log, const DataAccessManifest& manifest) {
    EventLog redacted;
    for (const Event& e : log.events()) {
        Event copy = e;
        for (auto it = copy.payload.begin(); it != copy.payload.end();) {
            if (manifest.allows_field(copy.type, it->first)) {
                ++it;
            } else {
                it = copy.payload.erase(it);
            }
        }
        redacted.append(std::move(copy));
    }
    return redacted;
}

IncrementalAuditor::IncrementalAuditor(const CompiledPolicy& policy, const RegisterSet& registers)
    : policy_(&policy), registers_(&registers) {
    for (const CompiledRule& rule : policy.rules) {
        if (rule.kind == RuleKind::hours) hours_state_[rule.id] = {};
    }
}

std::size_t IncrementalAuditor::findings_so_far(const std::string& rule_id) const {
    auto it = counts_.find(rule_id);
    return it == counts_.end() ? 0 : it->second;
}

std::vector<Finding> IncrementalAuditor::on_event(Event event) {
    log_.append(std::move(event));
    const Event& e = log_.events().back();
    std::vector<Finding> produced;
    for (const CompiledRule& rule : policy_->rules) {
        std::optional<Finding> f;
        switch (rule.kind) {
            case RuleKind::obligation:
                f = obligation_finding_for(rule, log_, e);
                break;
            case RuleKind::legitimacy: {
                bool available = true;
                for (const std::string& name : needed_registers(rule.legitimacy())) {
                    if (registers_->register_empty(name)) available = false;
                }
                if (available) f = legitimacy_finding_for(rule, log_, *registers_, e);
                break;
            }
            case RuleKind::exception:
                f = exception_finding_for(rule, log_, e);
                break;
            case RuleKind::gate:
                f = gate_finding_for(rule, e);
                break;
            case RuleKind::drift:
                f = drift_finding_for(rule, log_, e);
                break;
            case RuleKind::hours: {
                auto& state = hours_state_[rule.id];
                HoursFold fold{&rule, std::move(state.totals), std::move(state.contributions),
                               std::move(state.fired)};
                f = fold.feed(e);
                state.totals = std::move(fold.totals);
                state.contributions = std::move(fold.contributions);
                state.fired = std::move(fold.fired);
                break;
            }
        }
        if (f) {
            ++counts_[f->rule_id];
            produced.push_back(std::move(*f));
        }
    }
    return produced;
}

}  // namespace auditbot
