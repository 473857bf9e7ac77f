#include "auditbot/events.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "auditbot/hash.hpp"

namespace auditbot {

using Json = nlohmann::json;

std::optional<std::string> Event::field_string(const std::string& name) const {
    const Value* v = field(name);
    if (v == nullptr) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    return std::nullopt;
}

const EventCatalog& EventCatalog::standard() {
    static const EventCatalog catalog = [] {
        EventCatalog c;
        c.required_ = {
            {"dataset.registered", {"dataset_id"}},
            {"dataset.bias_assessment", {"dataset_id", "method"}},
            {"build.training_run", {"build_id", "dataset_id"}},
            {"build.release", {"build_id"}},
            {"doc.review_completed", {"doc_id", "review_type", "severity", "author_org"}},
            {"issue.opened", {"issue_id", "label"}},
            {"issue.resolved", {"issue_id"}},
            {"job_posting.draft", {"posting_id", "text"}},
            {"job_posting.published", {"posting_id"}},
            {"activity.session", {"start", "end"}},
            {"model.feature_snapshot", {"feature", "phase", "histogram"}},
            {"rule.override", {"rule_ref", "override_id"}},
            {"rule.justification", {"override_id", "reason"}},
        };
        return c;
    }();
    return catalog;
}

const std::vector<std::string>* EventCatalog::required_fields(const std::string& type) const {
    auto it = required_.find(type);
    return it == required_.end() ? nullptr : &it->second;
}

std::vector<std::string> EventCatalog::types() const {
    std::vector<std::string> out;
    out.reserve(required_.size());
    for (const auto& [k, _] : required_) out.push_back(k);
    return out;
}

bool RegisterSet::has_valid_competence(const std::string& actor, const std::string& qualification,
                                       const CivilDate& at) const {
    return std::any_of(competence.begin(), competence.end(), [&](const CompetenceEntry& e) {
        return e.actor == actor && e.qualification == qualification && e.valid_at(at);
    });
}

std::optional<int> RegisterSet::independence_level(const std::string& actor,
                                                   const std::string& subject) const {
    std::optional<int> best;
    for (const auto& e : independence) {
        if (e.actor == actor && e.subject == subject) {
            if (!best || e.level > *best) best = e.level;
        }
    }
    return best;
}

std::optional<std::string> RegisterSet::reports_to(const std::string& actor) const {
    for (const auto& e : orgchart) {
        if (e.actor == actor && e.reports_to) return e.reports_to;
    }
    return std::nullopt;
}

std::vector<std::string> RegisterSet::actors_with_role(const std::string& role,
                                                       const std::string& project) const {
    std::vector<std::string> out;
    for (const auto& e : orgchart) {
        if (e.role == role && e.project && *e.project == project) out.push_back(e.actor);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<const OrgEntry*> RegisterSet::project_members(const std::string& project) const {
    std::vector<const OrgEntry*> out;
    for (const auto& e : orgchart) {
        if (e.project && *e.project == project) out.push_back(&e);
    }
    return out;
}

bool RegisterSet::register_has_key(const std::string& register_name, const std::string& key) const {
    if (register_name == "competence") {
        return std::any_of(competence.begin(), competence.end(),
                           [&](const auto& e) { return e.actor == key; });
    }
    if (register_name == "independence") {
        return std::any_of(independence.begin(), independence.end(),
                           [&](const auto& e) { return e.actor == key; });
    }
    if (register_name == "orgchart") {
        return std::any_of(orgchart.begin(), orgchart.end(),
                           [&](const auto& e) { return e.actor == key; });
    }
    if (register_name == "jobdesc") {
        return std::any_of(jobdesc.begin(), jobdesc.end(),
                           [&](const auto& e) { return e.role == key; });
    }
    if (register_name == "datasheets") {
        return std::any_of(datasheets.begin(), datasheets.end(),
                           [&](const auto& e) { return e.dataset_id == key; });
    }
    return false;
}

bool RegisterSet::register_empty(const std::string& register_name) const {
    if (register_name == "competence") return competence.empty();
    if (register_name == "independence") return independence.empty();
    if (register_name == "orgchart") return orgchart.empty();
    if (register_name == "jobdesc") return jobdesc.empty();
    if (register_name == "datasheets") return datasheets.empty();
    return true;
}

namespace {

std::string join_key(const std::string& type, const std::string& field, const Value& v) {
    // The rendered value keeps type tags so "1" (string) and 1 (int) differ.
    std::string tag;
    switch (v.index()) {
        case 0: tag = "s:"; break;
        case 1: tag = "i:"; break;
        case 2: tag = "d:"; break;
        case 3: tag = "b:"; break;
    }
    return type + '\x1f' + field + '\x1f' + tag + value_to_string(v);
}

}  // namespace

void EventLog::append(Event e) {
    const std::size_t pos = events_.size();
    by_type_[e.type].push_back(pos);
    for (const auto& [field, value] : e.payload) {
        by_type_field_value_[join_key(e.type, field, value)].push_back(pos);
    }
    events_.push_back(std::move(e));
}

std::vector<const Event*> EventLog::events_before(
    std::uint64_t seq, const std::string& type,
    const std::optional<std::pair<std::string, Value>>& match) const {
    const std::vector<std::size_t>* positions = nullptr;
    if (match) {
        auto it = by_type_field_value_.find(join_key(type, match->first, match->second));
        if (it == by_type_field_value_.end()) return {};
        positions = &it->second;
    } else {
        auto it = by_type_.find(type);
        if (it == by_type_.end()) return {};
        positions = &it->second;
    }
    std::vector<const Event*> out;
    for (std::size_t pos : *positions) {
        const Event& e = events_[pos];
        if (e.seq >= seq) break;  // positions are seq-ascending
        out.push_back(&e);
    }
    return out;
}

std::vector<const Event*> EventLog::all_of_type(const std::string& type) const {
    auto it = by_type_.find(type);
    if (it == by_type_.end()) return {};
    std::vector<const Event*> out;
    out.reserve(it->second.size());
    for (std::size_t pos : it->second) out.push_back(&events_[pos]);
    return out;
}

namespace {

std::optional<Value> json_to_value(const Json& j) {
    switch (j.type()) {
        case Json::value_t::string: return Value{j.get<std::string>()};
        case Json::value_t::number_integer: return Value{j.get<std::int64_t>()};
        case Json::value_t::number_unsigned: return Value{static_cast<std::int64_t>(j.get<std::uint64_t>())};
        case Json::value_t::number_float: return Value{j.get<double>()};
        case Json::value_t::boolean: return Value{j.get<bool>()};
        default: return std::nullopt;
    }
}

}  // namespace

std::optional<Event> EventValidator::validate_line(const std::string& line, int line_no,
                                                   Diagnostic& error) {
    auto fail = [&](const std::string& msg) {
        error = Diagnostic{line_no, 1, msg};
        return std::nullopt;
    };

    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return fail("malformed event line");

    for (const char* key : {"seq", "ts", "type", "project", "payload"}) {
        if (!j.contains(key)) return fail(std::string("missing key '") + key + "'");
    }
    if (!j["seq"].is_number_integer() && !j["seq"].is_number_unsigned())
        return fail("seq must be a positive integer");
    if (j["seq"].is_number_integer() && j["seq"].get<std::int64_t>() <= 0)
        return fail("seq must be a positive integer");
    if (!j["ts"].is_string() || !j["type"].is_string() || !j["project"].is_string())
        return fail("ts, type and project must be strings");
    if (!j["payload"].is_object()) return fail("payload must be an object");

    Event e;
    e.seq = j["seq"].get<std::uint64_t>();
    e.ts_text = j["ts"].get<std::string>();
    const auto ts = parse_rfc3339(e.ts_text);
    if (!ts) return fail("ts is not an RFC 3339 UTC timestamp");
    e.ts = *ts;
    e.type = j["type"].get<std::string>();
    e.project = j["project"].get<std::string>();
    if (j.contains("actor")) {
        if (!j["actor"].is_string()) return fail("actor must be a string");
        e.actor = j["actor"].get<std::string>();
    }

    if (!catalog_->has_type(e.type)) return fail("unknown event type '" + e.type + "'");
    for (const auto& [key, value] : j["payload"].items()) {
        const auto v = json_to_value(value);
        if (!v) return fail("payload field '" + key + "' must be a string, number or boolean");
        e.payload.emplace(key, *v);
    }
    for (const std::string& field : *catalog_->required_fields(e.type)) {
        if (e.payload.find(field) == e.payload.end())
            return fail("missing required payload field '" + field + "' for " + e.type);
    }

    if (e.type == "activity.session") {
        const auto start = parse_rfc3339(e.field_string("start").value_or(""));
        const auto end = parse_rfc3339(e.field_string("end").value_or(""));
        if (!start || !end) return fail("activity.session start/end must be RFC 3339 UTC");
        if (*start > *end) return fail("activity.session start is after end");
    }
    if (e.type == "model.feature_snapshot") {
        const auto phase = e.field_string("phase").value_or("");
        if (phase != "baseline" && phase != "current")
            return fail("phase must be 'baseline' or 'current'");
        std::vector<double> edges, probs;
        if (!parse_histogram_text(e.field_string("histogram").value_or(""), edges, probs))
            return fail("histogram payload is not 'e0,...,en;p1,...,pn'");
    }

    if (e.seq <= last_seq_) return fail("seq regression at line " + std::to_string(line_no));
    if (e.ts < last_ts_) return fail("ts regression at line " + std::to_string(line_no));
    last_seq_ = e.seq;
    last_ts_ = e.ts;
    return e;
}

IngestResult ingest_events(const std::vector<std::string>& lines, const EventCatalog& catalog) {
    EventValidator validator(catalog);
    EventLog log;
    std::vector<Diagnostic> errors;
    std::string raw;
    int line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        raw += line;
        raw += '\n';
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Diagnostic error;
        auto e = validator.validate_line(line, line_no, error);
        if (e) {
            log.append(std::move(*e));
        } else {
            errors.push_back(std::move(error));
        }
    }
    if (!errors.empty()) return {std::nullopt, std::move(errors)};
    log.set_source_hash(sha256_hex(raw));
    return {std::move(log), {}};
}

IngestResult ingest_events_text(const std::string& text, const EventCatalog& catalog) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return ingest_events(lines, catalog);
}

namespace {

struct RegisterReader {
    std::vector<Diagnostic> errors;
    std::vector<std::string> warnings;

    void each_line(const std::filesystem::path& file,
                   const std::function<void(const Json&, int)>& fn) {
        std::ifstream in(file);
        if (!in) return;  // missing file -> empty register
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                errors.push_back({line_no, 1,
                                  file.filename().string() + ": malformed record"});
                continue;
            }
            fn(j, line_no);
        }
    }

    std::optional<std::string> str(const Json& j, const char* key, const std::string& file,
                                   int line_no) {
        if (!j.contains(key) || !j[key].is_string()) {
            errors.push_back({line_no, 1, file + ": missing or non-string '" + key + "'"});
            return std::nullopt;
        }
        return j[key].get<std::string>();
    }
};

}  // namespace

RegisterLoadResult load_registers(const std::filesystem::path& dir) {
    RegisterSet regs;
    RegisterReader reader;

    reader.each_line(dir / "competence.jsonl", [&](const Json& j, int line_no) {
        auto actor = reader.str(j, "actor", "competence.jsonl", line_no);
        auto qual = reader.str(j, "qualification", "competence.jsonl", line_no);
        auto from = reader.str(j, "valid_from", "competence.jsonl", line_no);
        auto to = reader.str(j, "valid_to", "competence.jsonl", line_no);
        if (!actor || !qual || !from || !to) return;
        auto from_d = parse_date(*from);
        auto to_d = parse_date(*to);
        if (!from_d || !to_d) {
            reader.errors.push_back({line_no, 1, "competence.jsonl: dates must be YYYY-MM-DD"});
            return;
        }
        if (*from_d > *to_d) {
            reader.errors.push_back(
                {line_no, 1, "competence.jsonl: valid_from is after valid_to"});
            return;
        }
        regs.competence.push_back({*actor, *qual, *from_d, *to_d});
    });

    reader.each_line(dir / "independence.jsonl", [&](const Json& j, int line_no) {
        auto actor = reader.str(j, "actor", "independence.jsonl", line_no);
        auto subject = reader.str(j, "subject", "independence.jsonl", line_no);
        if (!actor || !subject) return;
        if (!j.contains("level") || !j["level"].is_number_integer()) {
            reader.errors.push_back({line_no, 1, "independence.jsonl: level must be an integer"});
            return;
        }
        const int level = j["level"].get<int>();
        if (level < 0) {
            reader.errors.push_back({line_no, 1, "independence.jsonl: level must be >= 0"});
            return;
        }
        regs.independence.push_back({*actor, *subject, level});
    });

    reader.each_line(dir / "orgchart.jsonl", [&](const Json& j, int line_no) {
        auto actor = reader.str(j, "actor", "orgchart.jsonl", line_no);
        auto role = reader.str(j, "role", "orgchart.jsonl", line_no);
        if (!actor || !role) return;
        OrgEntry e{*actor, *role, std::nullopt, std::nullopt};
        if (j.contains("project") && j["project"].is_string())
            e.project = j["project"].get<std::string>();
        if (j.contains("reports_to") && j["reports_to"].is_string())
            e.reports_to = j["reports_to"].get<std::string>();
        regs.orgchart.push_back(std::move(e));
    });

    reader.each_line(dir / "jobdesc.jsonl", [&](const Json& j, int line_no) {
        auto role = reader.str(j, "role", "jobdesc.jsonl", line_no);
        if (!role) return;
        JobDescriptionEntry e{*role, {}};
        if (j.contains("rule_ids") && j["rule_ids"].is_array()) {
            for (const auto& r : j["rule_ids"]) {
                if (r.is_string()) e.rule_ids.push_back(r.get<std::string>());
            }
        }
        regs.jobdesc.push_back(std::move(e));
    });

    reader.each_line(dir / "datasheets.jsonl", [&](const Json& j, int line_no) {
        auto id = reader.str(j, "dataset_id", "datasheets.jsonl", line_no);
        auto uri = reader.str(j, "uri", "datasheets.jsonl", line_no);
        if (!id || !uri) return;
        DatasheetEntry e{*id, *uri, {}};
        if (j.contains("properties") && j["properties"].is_object()) {
            for (const auto& [k, v] : j["properties"].items()) {
                if (v.is_string()) e.properties[k] = v.get<std::string>();
            }
        }
        for (const auto& existing : regs.datasheets) {
            if (existing.dataset_id == e.dataset_id) {
                reader.errors.push_back(
                    {line_no, 1, "datasheets.jsonl: duplicate dataset_id " + e.dataset_id});
                return;
            }
        }
        regs.datasheets.push_back(std::move(e));
    });

    // reports_to must form a forest over actors; conflicting edges are errors.
    std::map<std::string, std::string> superior;
    for (const auto& e : regs.orgchart) {
        if (!e.reports_to) continue;
        auto [it, inserted] = superior.emplace(e.actor, *e.reports_to);
        if (!inserted && it->second != *e.reports_to) {
            reader.errors.push_back(
                {0, 0, "orgchart.jsonl: conflicting reports_to for actor " + e.actor});
        }
    }
    for (const auto& [start, _] : superior) {
        std::set<std::string> seen{start};
        std::string cur = start;
        while (true) {
            auto it = superior.find(cur);
            if (it == superior.end()) break;
            cur = it->second;
            if (!seen.insert(cur).second) {
                reader.errors.push_back({0, 0, "orgchart.jsonl: cycle in reports_to"});
                break;
            }
        }
    }

    if (!reader.errors.empty()) {
        return {std::nullopt, std::move(reader.errors), std::move(reader.warnings)};
    }
    return {std::move(regs), {}, std::move(reader.warnings)};
}

bool parse_histogram_text(const std::string& text, std::vector<double>& edges,
                          std::vector<double>& probs) {
    edges.clear();
    probs.clear();
    const auto semi = text.find(';');
    if (semi == std::string::npos) return false;
    auto parse_list = [](const std::string& part, std::vector<double>& out) {
        std::istringstream in(part);
        std::string token;
        while (std::getline(in, token, ',')) {
            if (token.empty()) return false;
            try {
                std::size_t used = 0;
                const double v = std::stod(token, &used);
                if (used != token.size()) return false;
                out.push_back(v);
            } catch (const std::exception&) {
                return false;
            }
        }
        return !out.empty();
    };
    if (!parse_list(text.substr(0, semi), edges)) return false;
    if (!parse_list(text.substr(semi + 1), probs)) return false;
    if (edges.size() != probs.size() + 1) return false;
    if (!std::is_sorted(edges.begin(), edges.end())) return false;
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= 1e-9;
}

}  // namespace auditbot
