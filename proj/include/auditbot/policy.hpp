#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "auditbot/analytics.hpp"
#include "auditbot/events.hpp"
#include "auditbot/value.hpp"

namespace auditbot {

// ── Parsed document ──────────────────────────────────────────────────────

// A raw `key = value` right-hand side as written in the policy file.
struct RawValue {
    enum class Kind { String, Ident, Int, Real, IdentList };
    Kind kind = Kind::String;
    std::string text;               // String/Ident payload
    std::int64_t int_value = 0;
    double real_value = 0.0;
    std::vector<std::string> list;  // IdentList payload
    int line = 0;
    int column = 0;

    bool is_textual() const { return kind == Kind::String || kind == Kind::Ident; }
    bool is_numeric() const { return kind == Kind::Int || kind == Kind::Real; }
    double as_real() const { return kind == Kind::Int ? static_cast<double>(int_value) : real_value; }

    bool operator==(const RawValue& o) const;  // position-insensitive
};

enum class RuleKind { obligation, legitimacy, exception, hours, gate, drift };

std::string to_string(RuleKind k);
std::optional<RuleKind> rule_kind_from_string(const std::string& s);

struct Commitment {
    std::string id;
    std::string statement;
    std::vector<std::string> rule_ids;
    int line = 0;

    bool operator==(const Commitment& o) const {
        return id == o.id && statement == o.statement && rule_ids == o.rule_ids;
    }
};

struct RuleSpec {
    std::string id;
    RuleKind kind = RuleKind::obligation;
    int harm = 1;  // 1..5
    std::optional<std::string> scope;  // project glob
    std::optional<std::string> description;
    std::optional<std::string> responsible_role;
    std::optional<double> risk_cost;
    std::optional<double> mitigation_cost;
    std::map<std::string, RawValue> params;  // kind-specific keys
    int line = 0;

    bool operator==(const RuleSpec& o) const;
};

struct PolicyDocument {
    std::string name;
    std::string version;
    std::string organisation;
    std::optional<std::int64_t> alarp_intolerable_min;
    std::optional<std::int64_t> alarp_acceptable_max;
    std::optional<double> alarp_disproportion_factor;
    std::vector<Commitment> commitments;
    std::map<std::string, int> severity_map;  // severity label -> min independence level
    std::vector<RuleSpec> rules;
    std::string source_hash;  // sha256 of the source text

    bool operator==(const PolicyDocument& o) const;  // ignores source_hash
};

struct ParseResult {
    std::optional<PolicyDocument> document;
    std::vector<Diagnostic> errors;
    std::vector<Diagnostic> warnings;
    bool ok() const { return document.has_value(); }
};

ParseResult parse_policy(const std::string& text);

// ── Compiled policy ──────────────────────────────────────────────────────

enum class ObligationMode { exists_before, all_closed_before };
enum class LegitimacyCheck {
    reviewer_competence,
    reviewer_independence,
    team_qualification,
    register_lookup
};

std::string to_string(ObligationMode m);
std::string to_string(LegitimacyCheck c);

struct ObligationParams {
    std::string trigger;
    std::string require;
    ObligationMode mode = ObligationMode::exists_before;
    std::string join_on;
    std::optional<std::string> close_type;                    // all_closed_before
    std::optional<std::pair<std::string, std::string>> filter;  // key=value on open events
};

struct LegitimacyParams {
    std::string trigger;
    LegitimacyCheck check = LegitimacyCheck::reviewer_competence;
    std::string qualification_field;  // reviewer_competence
    std::string severity_field;       // reviewer_independence
    std::string qualification;        // team_qualification
    std::string register_name;        // register_lookup
    std::string key_field;            // register_lookup
    std::map<std::string, int> severity_map;  // reviewer_independence, from the document
};

struct ExceptionParams {
    std::string override_type;
    std::string justification_type;
    std::string join_on;
    std::int64_t justify_within_days = 14;
};

struct HoursParams {
    double threshold_hours = 48.0;
    std::int64_t consecutive_weeks = 1;
};

struct GateParams {
    std::string trigger;
    std::string text_field;
    std::string lexicon_path;
    Lexicon lexicon;
    std::int64_t max_imbalance = 2;
};

struct DriftParams {
    std::string feature;
    double warn_threshold = 0.1;
    double alarm_threshold = 0.25;
};

using RuleParams = std::variant<ObligationParams, LegitimacyParams, ExceptionParams, HoursParams,
                                GateParams, DriftParams>;

struct CompiledRule {
    std::string id;
    RuleKind kind = RuleKind::obligation;
    int harm = 1;
    std::optional<std::string> scope;
    std::optional<std::string> description;
    std::optional<std::string> responsible_role;
    std::optional<double> risk_cost;
    std::optional<double> mitigation_cost;
    RuleParams params;

    bool in_scope(const std::string& project) const;

    const ObligationParams& obligation() const { return std::get<ObligationParams>(params); }
    const LegitimacyParams& legitimacy() const { return std::get<LegitimacyParams>(params); }
    const ExceptionParams& exception() const { return std::get<ExceptionParams>(params); }
    const HoursParams& hours() const { return std::get<HoursParams>(params); }
    const GateParams& gate() const { return std::get<GateParams>(params); }
    const DriftParams& drift() const { return std::get<DriftParams>(params); }
};

struct ManifestEntry {
    std::set<std::pair<std::string, std::string>> fields;  // (event type, field)
    std::set<std::string> registers;

    bool operator==(const ManifestEntry&) const = default;
};

// What each rule is allowed to read: the transparency contract.
struct DataAccessManifest {
    std::map<std::string, ManifestEntry> entries;  // rule id -> reads

    bool allows_field(const std::string& type, const std::string& field) const;
    bool operator==(const DataAccessManifest&) const = default;
};

struct AlarpParams {
    std::int64_t intolerable_min = 15;
    std::int64_t acceptable_max = 4;
    double disproportion_factor = 3.0;
};

struct CompiledPolicy {
    std::string name;
    std::string version;
    std::string organisation;
    std::string source_hash;
    AlarpParams alarp;
    std::map<std::string, int> severity_map;
    std::vector<Commitment> commitments;
    std::vector<CompiledRule> rules;
    DataAccessManifest manifest;

    const CompiledRule* find_rule(const std::string& id) const;
};

struct CompileOptions {
    // Where relative lexicon paths resolve from (usually the policy file's
    // directory); AUDITBOT_LEXICON_DIR and the working directory follow.
    std::string policy_dir;
};

struct CompileResult {
    std::optional<CompiledPolicy> policy;
    std::vector<Diagnostic> errors;
    bool ok() const { return policy.has_value(); }
};

CompileResult compile_policy(const PolicyDocument& doc,
                             const EventCatalog& catalog = EventCatalog::standard(),
                             const CompileOptions& options = {});

const DataAccessManifest& required_fields(const CompiledPolicy& policy);

// Simple '*'/'?' glob used by rule scopes.
bool glob_match(const std::string& pattern, const std::string& text);

}  // namespace auditbot
