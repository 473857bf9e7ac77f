#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "auditbot/time.hpp"
#include "auditbot/value.hpp"

namespace auditbot {

// One timestamped SDLC occurrence.
struct Event {
    std::uint64_t seq = 0;  // authoritative order, strictly increasing
    TimeMs ts = 0;
    std::string ts_text;
    std::string type;
    std::string project;
    std::optional<std::string> actor;
    std::map<std::string, Value> payload;

    const Value* field(const std::string& name) const {
        auto it = payload.find(name);
        return it == payload.end() ? nullptr : &it->second;
    }
    std::optional<std::string> field_string(const std::string& name) const;
};

// The closed set of event types the bot understands, with the payload
// fields each type must carry.
class EventCatalog {
  public:
    static const EventCatalog& standard();

    bool has_type(const std::string& type) const { return required_.count(type) > 0; }
    const std::vector<std::string>* required_fields(const std::string& type) const;
    std::vector<std::string> types() const;

  private:
    std::map<std::string, std::vector<std::string>> required_;
};

struct CompetenceEntry {
    std::string actor;
    std::string qualification;
    CivilDate valid_from;
    CivilDate valid_to;

    bool valid_at(const CivilDate& d) const { return valid_from <= d && d <= valid_to; }
};

struct IndependenceEntry {
    std::string actor;
    std::string subject;  // org or project id
    int level = 0;
};

struct OrgEntry {
    std::string actor;
    std::string role;
    std::optional<std::string> project;
    std::optional<std::string> reports_to;
};

struct JobDescriptionEntry {
    std::string role;
    std::vector<std::string> rule_ids;
};

struct DatasheetEntry {
    std::string dataset_id;
    std::string uri;
    std::map<std::string, std::string> properties;
};

struct RegisterSet {
    std::vector<CompetenceEntry> competence;
    std::vector<IndependenceEntry> independence;
    std::vector<OrgEntry> orgchart;
    std::vector<JobDescriptionEntry> jobdesc;
    std::vector<DatasheetEntry> datasheets;

    bool has_valid_competence(const std::string& actor, const std::string& qualification,
                              const CivilDate& at) const;
    // Highest independence level recorded for (actor, subject); absent -> nullopt.
    std::optional<int> independence_level(const std::string& actor,
                                          const std::string& subject) const;
    std::optional<std::string> reports_to(const std::string& actor) const;
    std::vector<std::string> actors_with_role(const std::string& role,
                                              const std::string& project) const;
    std::vector<const OrgEntry*> project_members(const std::string& project) const;
    bool register_has_key(const std::string& register_name, const std::string& key) const;
    bool register_empty(const std::string& register_name) const;
};

// The ordered, validated stream the bot audits.
class EventLog {
  public:
    EventLog() = default;

    const std::vector<Event>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }
    const std::string& source_hash() const { return source_hash_; }

    // All events e with e.seq < seq, e.type = type, and (when given)
    // payload[field] = value; ascending seq order.
    std::vector<const Event*> events_before(
        std::uint64_t seq, const std::string& type,
        const std::optional<std::pair<std::string, Value>>& match = std::nullopt) const;

    // Every event of a type, ascending seq.
    std::vector<const Event*> all_of_type(const std::string& type) const;

    // Appends one already-validated event and indexes it.
    void append(Event e);
    void set_source_hash(std::string h) { source_hash_ = std::move(h); }

  private:
    std::vector<Event> events_;
    std::map<std::string, std::vector<std::size_t>> by_type_;
    // (type, field, rendered value) -> positions, for join lookups.
    std::map<std::string, std::vector<std::size_t>> by_type_field_value_;
    std::string source_hash_;
};

struct IngestResult {
    std::optional<EventLog> log;
    std::vector<Diagnostic> errors;
    bool ok() const { return log.has_value(); }
};

// Validates one event line against the catalog and the running order state.
// Exposed separately so streaming mode can ingest line by line.
class EventValidator {
  public:
    explicit EventValidator(const EventCatalog& catalog) : catalog_(&catalog) {}

    // Returns the validated event or a diagnostic for this line.
    std::optional<Event> validate_line(const std::string& line, int line_no, Diagnostic& error);

  private:
    const EventCatalog* catalog_;
    std::uint64_t last_seq_ = 0;
    TimeMs last_ts_ = INT64_MIN;
};

IngestResult ingest_events(const std::vector<std::string>& lines,
                           const EventCatalog& catalog = EventCatalog::standard());
IngestResult ingest_events_text(const std::string& text,
                                const EventCatalog& catalog = EventCatalog::standard());

struct RegisterLoadResult {
    std::optional<RegisterSet> registers;
    std::vector<Diagnostic> errors;
    std::vector<std::string> warnings;
    bool ok() const { return registers.has_value(); }
};

// Reads competence/independence/orgchart/jobdesc/datasheets .jsonl from a
// directory; missing files yield empty registers.
RegisterLoadResult load_registers(const std::filesystem::path& dir);

// Well-formedness check for the "e0,e1,...,en;p1,...,pn" histogram payload.
bool parse_histogram_text(const std::string& text, std::vector<double>& edges,
                          std::vector<double>& probs);

}  // namespace auditbot
