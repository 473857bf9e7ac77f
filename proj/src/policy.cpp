#include "auditbot/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "auditbot/hash.hpp"

namespace auditbot {

bool RawValue::operator==(const RawValue& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::String:
        case Kind::Ident: return text == o.text;
        case Kind::Int: return int_value == o.int_value;
        case Kind::Real: return real_value == o.real_value;
        case Kind::IdentList: return list == o.list;
    }
    return false;
}

bool RuleSpec::operator==(const RuleSpec& o) const {
    return id == o.id && kind == o.kind && harm == o.harm && scope == o.scope &&
           description == o.description && responsible_role == o.responsible_role &&
           risk_cost == o.risk_cost && mitigation_cost == o.mitigation_cost && params == o.params;
}

bool PolicyDocument::operator==(const PolicyDocument& o) const {
    return name == o.name && version == o.version && organisation == o.organisation &&
           alarp_intolerable_min == o.alarp_intolerable_min &&
           alarp_acceptable_max == o.alarp_acceptable_max &&
           alarp_disproportion_factor == o.alarp_disproportion_factor &&
           commitments == o.commitments && severity_map == o.severity_map && rules == o.rules;
}

std::string to_string(RuleKind k) {
    switch (k) {
        case RuleKind::obligation: return "obligation";
        case RuleKind::legitimacy: return "legitimacy";
        case RuleKind::exception: return "exception";
        case RuleKind::hours: return "hours";
        case RuleKind::gate: return "gate";
        case RuleKind::drift: return "drift";
    }
    return "obligation";
}

std::optional<RuleKind> rule_kind_from_string(const std::string& s) {
    if (s == "obligation") return RuleKind::obligation;
    if (s == "legitimacy") return RuleKind::legitimacy;
    if (s == "exception") return RuleKind::exception;
    if (s == "hours") return RuleKind::hours;
    if (s == "gate") return RuleKind::gate;
    if (s == "drift") return RuleKind::drift;
    return std::nullopt;
}

std::string to_string(ObligationMode m) {
    return m == ObligationMode::exists_before ? "exists_before" : "all_closed_before";
}

std::string to_string(LegitimacyCheck c) {
    switch (c) {
        case LegitimacyCheck::reviewer_competence: return "reviewer_competence";
        case LegitimacyCheck::reviewer_independence: return "reviewer_independence";
        case LegitimacyCheck::team_qualification: return "team_qualification";
        case LegitimacyCheck::register_lookup: return "register_lookup";
    }
    return "reviewer_competence";
}

// ── Lexer ────────────────────────────────────────────────────────────────

namespace {

enum class Tok { Ident, String, Int, Real, LBrace, RBrace, LBracket, RBracket, Comma, Equals, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::int64_t int_value = 0;
    double real_value = 0.0;
    int line = 1;
    int column = 1;
};

class Lexer {
  public:
    Lexer(const std::string& src, std::vector<Diagnostic>& errors) : src_(src), errors_(&errors) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (eof()) break;
            const int line = line_, col = col_;
            const char c = peek();
            if (c == '{') { out.push_back(simple(Tok::LBrace, line, col)); continue; }
            if (c == '}') { out.push_back(simple(Tok::RBrace, line, col)); continue; }
            if (c == '[') { out.push_back(simple(Tok::LBracket, line, col)); continue; }
            if (c == ']') { out.push_back(simple(Tok::RBracket, line, col)); continue; }
            if (c == ',') { out.push_back(simple(Tok::Comma, line, col)); continue; }
            if (c == '=') { out.push_back(simple(Tok::Equals, line, col)); continue; }
            if (c == '"') { out.push_back(lex_string(line, col)); continue; }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+') {
                out.push_back(lex_number(line, col));
                continue;
            }
            if (c >= 'a' && c <= 'z') { out.push_back(lex_ident(line, col)); continue; }
            errors_->push_back({line, col, std::string("unexpected character '") + c + "'"});
            advance();
        }
        out.push_back(Token{Tok::End, "", 0, 0.0, line_, col_});
        return out;
    }

  private:
    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (!eof()) {
            const char c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    Token simple(Tok kind, int line, int col) {
        advance();
        return Token{kind, "", 0, 0.0, line, col};
    }

    Token lex_string(int line, int col) {
        advance();  // opening quote
        std::string text;
        while (!eof() && peek() != '"' && peek() != '\n') {
            char c = peek();
            if (c == '\\') {
                advance();
                if (eof()) break;
                const char esc = peek();
                if (esc == '"' || esc == '\\') {
                    text += esc;
                } else if (esc == 'n') {
                    text += '\n';
                } else if (esc == 't') {
                    text += '\t';
                } else {
                    errors_->push_back({line_, col_, "unknown escape sequence"});
                }
                advance();
                continue;
            }
            text += c;
            advance();
        }
        if (eof() || peek() != '"') {
            errors_->push_back({line, col, "unterminated string"});
        } else {
            advance();
        }
        return Token{Tok::String, std::move(text), 0, 0.0, line, col};
    }

    Token lex_number(int line, int col) {
        std::string text;
        if (peek() == '-' || peek() == '+') {
            text += peek();
            advance();
        }
        bool digits = false, dot = false, exp = false;
        while (!eof()) {
            const char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c))) {
                digits = true;
            } else if (c == '.' && !dot && !exp) {
                dot = true;
            } else if ((c == 'e' || c == 'E') && digits && !exp) {
                exp = true;
                text += c;
                advance();
                if (!eof() && (peek() == '-' || peek() == '+')) {
                    text += peek();
                    advance();
                }
                continue;
            } else {
                break;
            }
            text += c;
            advance();
        }
        if (!digits) {
            errors_->push_back({line, col, "malformed number"});
            return Token{Tok::Int, text, 0, 0.0, line, col};
        }
        if (dot || exp) {
            return Token{Tok::Real, text, 0, std::strtod(text.c_str(), nullptr), line, col};
        }
        return Token{Tok::Int, text, std::strtoll(text.c_str(), nullptr, 10), 0.0, line, col};
    }

    Token lex_ident(int line, int col) {
        std::string text;
        while (!eof()) {
            const char c = peek();
            if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-') {
                text += c;
                advance();
            } else {
                break;
            }
        }
        return Token{Tok::Ident, std::move(text), 0, 0.0, line, col};
    }

    const std::string& src_;
    std::vector<Diagnostic>* errors_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ── Parser ───────────────────────────────────────────────────────────────

bool is_block_starter(const Token& t) {
    return t.kind == Tok::Ident &&
           (t.text == "policy" || t.text == "commitment" || t.text == "severity_map" ||
            t.text == "rule");
}

class Parser {
  public:
    Parser(std::vector<Token> tokens, ParseResult& out)
        : tokens_(std::move(tokens)), out_(&out) {}

    void run(PolicyDocument& doc) {
        parse_header(doc);
        while (cur().kind != Tok::End) {
            if (cur().kind == Tok::Ident && cur().text == "commitment") {
                parse_commitment(doc);
            } else if (cur().kind == Tok::Ident && cur().text == "severity_map") {
                parse_severity_map(doc);
            } else if (cur().kind == Tok::Ident && cur().text == "rule") {
                parse_rule(doc);
            } else {
                error(cur(), "expected commitment, severity_map or rule");
                recover();
            }
        }
    }

  private:
    const Token& cur() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

    void error(const Token& at, const std::string& msg) {
        out_->errors.push_back({at.line, at.column, msg});
    }

    // Skip to the next top-level block start at brace depth zero.
    void recover() {
        int depth = 0;
        while (cur().kind != Tok::End) {
            if (cur().kind == Tok::LBrace) ++depth;
            if (cur().kind == Tok::RBrace) {
                if (depth == 0) {
                    next();
                    return;
                }
                if (--depth == 0) {
                    next();
                    return;
                }
            }
            if (depth == 0 && is_block_starter(cur())) return;
            next();
        }
    }

    bool expect(Tok kind, const char* what) {
        if (cur().kind != kind) {
            error(cur(), std::string("expected ") + what);
            return false;
        }
        next();
        return true;
    }

    void parse_header(PolicyDocument& doc) {
        if (cur().kind != Tok::Ident || cur().text != "policy") {
            error(cur(), "policy file must start with: policy \"name\" { ... }");
            recover();
            return;
        }
        next();
        if (cur().kind != Tok::String) {
            error(cur(), "expected policy name string");
            recover();
            return;
        }
        doc.name = next().text;
        if (!expect(Tok::LBrace, "'{'")) {
            recover();
            return;
        }
        std::set<std::string> seen;
        while (cur().kind != Tok::RBrace && cur().kind != Tok::End) {
            if (cur().kind != Tok::Ident) {
                error(cur(), "expected header key");
                recover();
                return;
            }
            const Token key = next();
            if (!expect(Tok::Equals, "'='")) {
                recover();
                return;
            }
            if (!seen.insert(key.text).second) {
                error(key, "duplicate key '" + key.text + "' in policy header");
            }
            if (key.text == "version" || key.text == "organisation") {
                if (cur().kind != Tok::String) {
                    error(cur(), key.text + " must be a string");
                    recover();
                    return;
                }
                (key.text == "version" ? doc.version : doc.organisation) = next().text;
            } else if (key.text == "alarp_intolerable_min" || key.text == "alarp_acceptable_max") {
                if (cur().kind != Tok::Int) {
                    error(cur(), key.text + " must be an integer");
                    recover();
                    return;
                }
                const auto v = next().int_value;
                (key.text == "alarp_intolerable_min" ? doc.alarp_intolerable_min
                                                     : doc.alarp_acceptable_max) = v;
            } else if (key.text == "alarp_disproportion_factor") {
                if (cur().kind != Tok::Int && cur().kind != Tok::Real) {
                    error(cur(), key.text + " must be a number");
                    recover();
                    return;
                }
                const Token v = next();
                doc.alarp_disproportion_factor =
                    v.kind == Tok::Int ? static_cast<double>(v.int_value) : v.real_value;
            } else {
                error(key, "unknown header key '" + key.text + "'");
                recover();
                return;
            }
        }
        expect(Tok::RBrace, "'}'");
    }

    void parse_commitment(PolicyDocument& doc) {
        const Token kw = next();
        if (cur().kind != Tok::Ident) {
            error(cur(), "expected commitment identifier");
            recover();
            return;
        }
        Commitment c;
        c.line = kw.line;
        c.id = next().text;
        if (!expect(Tok::LBrace, "'{'")) { recover(); return; }
        if (cur().kind != Tok::Ident || cur().text != "statement") {
            error(cur(), "commitment must begin with statement = \"...\"");
            recover();
            return;
        }
        next();
        if (!expect(Tok::Equals, "'='")) { recover(); return; }
        if (cur().kind != Tok::String) {
            error(cur(), "statement must be a string");
            recover();
            return;
        }
        c.statement = next().text;
        if (cur().kind == Tok::Ident && cur().text == "rules") {
            next();
            if (!expect(Tok::Equals, "'='")) { recover(); return; }
            if (!parse_ident_list(c.rule_ids)) { recover(); return; }
        }
        if (cur().kind != Tok::RBrace) {
            error(cur(), "unexpected content in commitment block");
            recover();
            return;
        }
        next();
        doc.commitments.push_back(std::move(c));
    }

    void parse_severity_map(PolicyDocument& doc) {
        next();
        if (!expect(Tok::LBrace, "'{'")) { recover(); return; }
        while (cur().kind != Tok::RBrace && cur().kind != Tok::End) {
            if (cur().kind != Tok::Ident) {
                error(cur(), "expected severity label");
                recover();
                return;
            }
            const Token label = next();
            if (!expect(Tok::Equals, "'='")) { recover(); return; }
            if (cur().kind != Tok::Int) {
                error(cur(), "severity level must be an integer");
                recover();
                return;
            }
            const Token level = next();
            if (level.int_value < 0) {
                error(level, "severity level must be >= 0");
                continue;
            }
            if (doc.severity_map.count(label.text)) {
                error(label, "duplicate key '" + label.text + "' in severity_map");
                continue;
            }
            doc.severity_map[label.text] = static_cast<int>(level.int_value);
        }
        expect(Tok::RBrace, "'}'");
    }

    bool parse_ident_list(std::vector<std::string>& out) {
        if (cur().kind != Tok::LBracket) {
            error(cur(), "expected '['");
            return false;
        }
        next();
        if (cur().kind == Tok::RBracket) {
            next();
            return true;
        }
        while (true) {
            if (cur().kind != Tok::Ident) {
                error(cur(), "expected identifier in list");
                return false;
            }
            out.push_back(next().text);
            if (cur().kind == Tok::Comma) {
                next();
                continue;
            }
            break;
        }
        return expect(Tok::RBracket, "']'");
    }

    void parse_rule(PolicyDocument& doc) {
        const Token kw = next();
        if (cur().kind != Tok::Ident) {
            error(cur(), "expected rule identifier");
            recover();
            return;
        }
        RuleSpec rule;
        rule.line = kw.line;
        rule.id = next().text;
        if (!expect(Tok::LBrace, "'{'")) { recover(); return; }

        std::map<std::string, RawValue> raw;
        while (cur().kind != Tok::RBrace && cur().kind != Tok::End) {
            if (cur().kind != Tok::Ident) {
                error(cur(), "expected rule key");
                recover();
                return;
            }
            const Token key = next();
            if (!expect(Tok::Equals, "'='")) { recover(); return; }
            RawValue value;
            value.line = cur().line;
            value.column = cur().column;
            switch (cur().kind) {
                case Tok::String:
                    value.kind = RawValue::Kind::String;
                    value.text = next().text;
                    break;
                case Tok::Ident:
                    value.kind = RawValue::Kind::Ident;
                    value.text = next().text;
                    break;
                case Tok::Int:
                    value.kind = RawValue::Kind::Int;
                    value.int_value = next().int_value;
                    break;
                case Tok::Real:
                    value.kind = RawValue::Kind::Real;
                    value.real_value = next().real_value;
                    break;
                case Tok::LBracket: {
                    value.kind = RawValue::Kind::IdentList;
                    if (!parse_ident_list(value.list)) { recover(); return; }
                    break;
                }
                default:
                    error(cur(), "expected value after '='");
                    recover();
                    return;
            }
            if (raw.count(key.text)) {
                error(key, "duplicate key '" + key.text + "' in rule " + rule.id);
                continue;
            }
            raw.emplace(key.text, std::move(value));
        }
        if (!expect(Tok::RBrace, "'}'")) { recover(); return; }

        extract_rule(doc, rule, raw, kw);
    }

    // Hoists generic keys out of the raw map, validating document-level
    // invariants (kind known, integer harm in 1..5).
    void extract_rule(PolicyDocument& doc, RuleSpec& rule, std::map<std::string, RawValue>& raw,
                      const Token& at) {
        bool bad = false;
        if (auto it = raw.find("kind"); it != raw.end()) {
            if (!it->second.is_textual()) {
                error(at, "kind must be an identifier");
                bad = true;
            } else if (auto k = rule_kind_from_string(it->second.text)) {
                rule.kind = *k;
            } else {
                out_->errors.push_back(
                    {it->second.line, it->second.column, "unknown rule kind '" + it->second.text + "'"});
                bad = true;
            }
            raw.erase(it);
        } else {
            error(at, "rule " + rule.id + " is missing kind");
            bad = true;
        }
        if (auto it = raw.find("harm"); it != raw.end()) {
            if (it->second.kind != RawValue::Kind::Int) {
                out_->errors.push_back({it->second.line, it->second.column, "non-integer harm"});
                bad = true;
            } else if (it->second.int_value < 1 || it->second.int_value > 5) {
                out_->errors.push_back(
                    {it->second.line, it->second.column, "harm out of range 1..5"});
                bad = true;
            } else {
                rule.harm = static_cast<int>(it->second.int_value);
            }
            raw.erase(it);
        } else {
            error(at, "rule " + rule.id + " is missing harm");
            bad = true;
        }
        auto take_text = [&](const char* key, std::optional<std::string>& into) {
            auto it = raw.find(key);
            if (it == raw.end()) return;
            if (!it->second.is_textual()) {
                out_->errors.push_back(
                    {it->second.line, it->second.column, std::string(key) + " must be text"});
                bad = true;
            } else {
                into = it->second.text;
            }
            raw.erase(it);
        };
        auto take_cost = [&](const char* key, std::optional<double>& into) {
            auto it = raw.find(key);
            if (it == raw.end()) return;
            if (!it->second.is_numeric()) {
                out_->errors.push_back(
                    {it->second.line, it->second.column, std::string(key) + " must be a number"});
                bad = true;
            } else {
                into = it->second.as_real();
            }
            raw.erase(it);
        };
        take_text("scope", rule.scope);
        take_text("description", rule.description);
        take_text("responsible_role", rule.responsible_role);
        take_cost("risk_cost", rule.risk_cost);
        take_cost("mitigation_cost", rule.mitigation_cost);
        rule.params = std::move(raw);
        if (!bad) doc.rules.push_back(std::move(rule));
    }

    std::vector<Token> tokens_;
    ParseResult* out_;
    std::size_t pos_ = 0;
};

void validate_document(PolicyDocument& doc, ParseResult& out) {
    std::map<std::string, int> rule_lines;
    for (const auto& r : doc.rules) {
        auto [it, inserted] = rule_lines.emplace(r.id, r.line);
        if (!inserted) {
            out.errors.push_back({r.line, 1, "duplicate rule id " + r.id});
        }
    }
    std::set<std::string> commitment_ids;
    for (const auto& c : doc.commitments) {
        if (!commitment_ids.insert(c.id).second) {
            out.errors.push_back({c.line, 1, "duplicate commitment id " + c.id});
        }
        for (const auto& rid : c.rule_ids) {
            if (!rule_lines.count(rid)) {
                out.errors.push_back(
                    {c.line, 1, "commitment " + c.id + " references unknown rule " + rid});
            }
        }
        if (c.rule_ids.empty()) {
            out.warnings.push_back(
                {c.line, 1, "commitment " + c.id + " has no implementing rules"});
        }
    }
    const bool uses_independence = std::any_of(doc.rules.begin(), doc.rules.end(), [](const RuleSpec& r) {
        auto it = r.params.find("check");
        return it != r.params.end() && it->second.is_textual() &&
               it->second.text == "reviewer_independence";
    });
    if (uses_independence && doc.severity_map.empty()) {
        out.errors.push_back(
            {0, 0, "severity_map must be non-empty when reviewer_independence is used"});
    }
}

}  // namespace

ParseResult parse_policy(const std::string& text) {
    ParseResult result;
    std::vector<Diagnostic> lex_errors;
    Lexer lexer(text, lex_errors);
    std::vector<Token> tokens = lexer.run();
    result.errors = std::move(lex_errors);

    PolicyDocument doc;
    Parser parser(std::move(tokens), result);
    parser.run(doc);
    validate_document(doc, result);

    if (!result.errors.empty()) {
        return result;
    }
    doc.source_hash = sha256_hex(text);
    result.document = std::move(doc);
    return result;
}

// ── Compiler ─────────────────────────────────────────────────────────────

namespace {

class RuleCompiler {
  public:
    RuleCompiler(const RuleSpec& spec, const EventCatalog& catalog,
                 std::vector<Diagnostic>& errors)
        : spec_(&spec), catalog_(&catalog), errors_(&errors) {}

    bool failed() const { return failed_; }

    void fail(const std::string& msg) {
        errors_->push_back({spec_->line, 1, "rule " + spec_->id + ": " + msg});
        failed_ = true;
    }

    const RawValue* get(const char* key) {
        used_.insert(key);
        auto it = spec_->params.find(key);
        return it == spec_->params.end() ? nullptr : &it->second;
    }

    std::string text_param(const char* key, bool required) {
        const RawValue* v = get(key);
        if (v == nullptr) {
            if (required) fail(std::string("missing required param ") + key);
            return "";
        }
        if (!v->is_textual() || v->text.empty()) {
            fail(std::string(key) + " must be non-empty text");
            return "";
        }
        return v->text;
    }

    std::string event_type_param(const char* key, bool required) {
        std::string type = text_param(key, required);
        if (!type.empty() && !catalog_->has_type(type)) {
            fail("unknown event type '" + type + "'");
        }
        return type;
    }

    double real_param(const char* key, double fallback) {
        const RawValue* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_numeric()) {
            fail(std::string(key) + " must be a number");
            return fallback;
        }
        const double d = v->as_real();
        if (!std::isfinite(d) || d < 0.0) {
            fail(std::string(key) + " must be finite and non-negative");
            return fallback;
        }
        return d;
    }

    std::int64_t int_param(const char* key, std::int64_t fallback, std::int64_t min_value) {
        const RawValue* v = get(key);
        if (v == nullptr) return fallback;
        if (v->kind != RawValue::Kind::Int) {
            fail(std::string(key) + " must be an integer");
            return fallback;
        }
        if (v->int_value < min_value) {
            fail(std::string(key) + " must be >= " + std::to_string(min_value));
            return fallback;
        }
        return v->int_value;
    }

    void reject_unknown_keys() {
        for (const auto& [key, value] : spec_->params) {
            if (!used_.count(key)) {
                errors_->push_back({value.line, value.column,
                                    "rule " + spec_->id + ": unknown key '" + key + "'"});
                failed_ = true;
            }
        }
    }

  private:
    const RuleSpec* spec_;
    const EventCatalog* catalog_;
    std::vector<Diagnostic>* errors_;
    std::set<std::string> used_;
    bool failed_ = false;
};

std::string resolve_lexicon_path(const std::string& path, const CompileOptions& options) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.is_absolute()) return path;
    if (!options.policy_dir.empty() && fs::exists(fs::path(options.policy_dir) / p)) {
        return (fs::path(options.policy_dir) / p).string();
    }
    if (const char* dir = std::getenv("AUDITBOT_LEXICON_DIR"); dir != nullptr && *dir != '\0') {
        if (fs::exists(fs::path(dir) / p)) return (fs::path(dir) / p).string();
    }
    return path;  // working directory
}

ManifestEntry manifest_for(const CompiledRule& rule) {
    ManifestEntry m;
    switch (rule.kind) {
        case RuleKind::obligation: {
            const auto& p = rule.obligation();
            m.fields.insert({p.trigger, p.join_on});
            m.fields.insert({p.require, p.join_on});
            if (p.close_type) m.fields.insert({*p.close_type, p.join_on});
            if (p.filter) m.fields.insert({p.require, p.filter->first});
            break;
        }
        case RuleKind::legitimacy: {
            const auto& p = rule.legitimacy();
            m.fields.insert({p.trigger, "actor"});
            switch (p.check) {
                case LegitimacyCheck::reviewer_competence:
                    m.fields.insert({p.trigger, p.qualification_field});
                    m.registers.insert("competence");
                    break;
                case LegitimacyCheck::reviewer_independence:
                    m.fields.insert({p.trigger, p.severity_field});
                    m.fields.insert({p.trigger, "author_org"});
                    m.registers.insert("independence");
                    break;
                case LegitimacyCheck::team_qualification:
                    m.fields.insert({p.trigger, "project"});
                    m.registers.insert("orgchart");
                    m.registers.insert("competence");
                    break;
                case LegitimacyCheck::register_lookup:
                    m.fields.insert({p.trigger, p.key_field});
                    m.registers.insert(p.register_name);
                    break;
            }
            break;
        }
        case RuleKind::exception: {
            const auto& p = rule.exception();
            m.fields.insert({p.override_type, p.join_on});
            m.fields.insert({p.override_type, "actor"});
            m.fields.insert({p.justification_type, p.join_on});
            break;
        }
        case RuleKind::hours:
            m.fields.insert({"activity.session", "start"});
            m.fields.insert({"activity.session", "end"});
            m.fields.insert({"activity.session", "actor"});
            break;
        case RuleKind::gate: {
            const auto& p = rule.gate();
            m.fields.insert({p.trigger, p.text_field});
            break;
        }
        case RuleKind::drift:
            m.fields.insert({"model.feature_snapshot", "feature"});
            m.fields.insert({"model.feature_snapshot", "phase"});
            m.fields.insert({"model.feature_snapshot", "histogram"});
            break;
    }
    return m;
}

}  // namespace

bool CompiledRule::in_scope(const std::string& project) const {
    return !scope || glob_match(*scope, project);
}

bool DataAccessManifest::allows_field(const std::string& type, const std::string& field) const {
    for (const auto& [_, entry] : entries) {
        if (entry.fields.count({type, field})) return true;
    }
    return false;
}

const CompiledRule* CompiledPolicy::find_rule(const std::string& id) const {
    for (const auto& r : rules) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

CompileResult compile_policy(const PolicyDocument& doc, const EventCatalog& catalog,
                             const CompileOptions& options) {
    CompileResult result;
    CompiledPolicy policy;
    policy.name = doc.name;
    policy.version = doc.version;
    policy.organisation = doc.organisation;
    policy.source_hash = doc.source_hash;
    policy.severity_map = doc.severity_map;
    policy.commitments = doc.commitments;

    if (doc.alarp_intolerable_min) policy.alarp.intolerable_min = *doc.alarp_intolerable_min;
    if (doc.alarp_acceptable_max) policy.alarp.acceptable_max = *doc.alarp_acceptable_max;
    if (doc.alarp_disproportion_factor)
        policy.alarp.disproportion_factor = *doc.alarp_disproportion_factor;
    if (policy.alarp.acceptable_max >= policy.alarp.intolerable_min) {
        result.errors.push_back(
            {0, 0, "alarp_acceptable_max must be below alarp_intolerable_min"});
    }
    if (!(policy.alarp.disproportion_factor > 0.0) ||
        !std::isfinite(policy.alarp.disproportion_factor)) {
        result.errors.push_back({0, 0, "alarp_disproportion_factor must be positive"});
    }

    for (const RuleSpec& spec : doc.rules) {
        RuleCompiler rc(spec, catalog, result.errors);
        CompiledRule rule;
        rule.id = spec.id;
        rule.kind = spec.kind;
        rule.harm = spec.harm;
        rule.scope = spec.scope;
        rule.description = spec.description;
        rule.responsible_role = spec.responsible_role;
        rule.risk_cost = spec.risk_cost;
        rule.mitigation_cost = spec.mitigation_cost;

        switch (spec.kind) {
            case RuleKind::obligation: {
                ObligationParams p;
                p.trigger = rc.event_type_param("trigger", true);
                p.require = rc.event_type_param("require", true);
                p.join_on = rc.text_param("join_on", true);
                const std::string mode = rc.text_param("mode", true);
                if (mode == "exists_before") {
                    p.mode = ObligationMode::exists_before;
                } else if (mode == "all_closed_before") {
                    p.mode = ObligationMode::all_closed_before;
                } else if (!mode.empty()) {
                    rc.fail("unknown mode '" + mode + "'");
                }
                if (p.mode == ObligationMode::all_closed_before) {
                    p.close_type = rc.event_type_param("close_type", true);
                    if (const RawValue* f = rc.get("filter")) {
                        if (!f->is_textual()) {
                            rc.fail("filter must be \"key=value\"");
                        } else {
                            const auto eq = f->text.find('=');
                            if (eq == std::string::npos || eq == 0 || eq + 1 == f->text.size()) {
                                rc.fail("filter must be \"key=value\"");
                            } else {
                                p.filter = {f->text.substr(0, eq), f->text.substr(eq + 1)};
                            }
                        }
                    }
                } else if (spec.params.count("filter")) {
                    rc.fail("filter requires mode all_closed_before");
                } else if (spec.params.count("close_type")) {
                    rc.fail("close_type requires mode all_closed_before");
                }
                rule.params = std::move(p);
                break;
            }
            case RuleKind::legitimacy: {
                LegitimacyParams p;
                p.trigger = rc.event_type_param("trigger", true);
                const std::string check = rc.text_param("check", true);
                if (check == "reviewer_competence") {
                    p.check = LegitimacyCheck::reviewer_competence;
                    p.qualification_field = rc.text_param("qualification_field", true);
                } else if (check == "reviewer_independence") {
                    p.check = LegitimacyCheck::reviewer_independence;
                    p.severity_field = rc.text_param("severity_field", true);
                    p.severity_map = doc.severity_map;
                    if (doc.severity_map.empty()) {
                        rc.fail("severity_map must be non-empty for reviewer_independence");
                    }
                } else if (check == "team_qualification") {
                    p.check = LegitimacyCheck::team_qualification;
                    p.qualification = rc.text_param("qualification", true);
                } else if (check == "register_lookup") {
                    p.check = LegitimacyCheck::register_lookup;
                    p.register_name = rc.text_param("register", true);
                    p.key_field = rc.text_param("key_field", true);
                    static const std::set<std::string> known = {"competence", "independence",
                                                                "orgchart", "jobdesc",
                                                                "datasheets"};
                    if (!p.register_name.empty() && !known.count(p.register_name)) {
                        rc.fail("unknown register '" + p.register_name + "'");
                    }
                } else if (!check.empty()) {
                    rc.fail("unknown check name '" + check + "'");
                }
                rule.params = std::move(p);
                break;
            }
            case RuleKind::exception: {
                ExceptionParams p;
                p.override_type = rc.event_type_param("override_type", true);
                p.justification_type = rc.event_type_param("justification_type", true);
                p.join_on = rc.text_param("join_on", true);
                p.justify_within_days = rc.int_param("justify_within_days", 14, 0);
                rule.params = std::move(p);
                break;
            }
            case RuleKind::hours: {
                HoursParams p;
                p.threshold_hours = rc.real_param("threshold_hours", 48.0);
                p.consecutive_weeks = rc.int_param("consecutive_weeks", 1, 1);
                rule.params = std::move(p);
                break;
            }
            case RuleKind::gate: {
                GateParams p;
                p.trigger = rc.event_type_param("trigger", true);
                p.text_field = rc.text_param("text_field", true);
                p.lexicon_path = rc.text_param("lexicon", true);
                p.max_imbalance = rc.int_param("max_imbalance", 2, 0);
                if (!p.lexicon_path.empty()) {
                    const std::string resolved = resolve_lexicon_path(p.lexicon_path, options);
                    std::ifstream in(resolved);
                    if (!in) {
                        rc.fail("cannot read lexicon file '" + p.lexicon_path + "'");
                    } else {
                        std::stringstream buf;
                        buf << in.rdbuf();
                        auto parsed = parse_lexicon(buf.str());
                        if (!parsed.ok()) {
                            rc.fail("lexicon '" + p.lexicon_path +
                                    "': " + parsed.errors.front().message);
                        } else {
                            p.lexicon = std::move(*parsed.lexicon);
                        }
                    }
                }
                rule.params = std::move(p);
                break;
            }
            case RuleKind::drift: {
                DriftParams p;
                p.feature = rc.text_param("feature", true);
                p.warn_threshold = rc.real_param("warn_threshold", 0.1);
                p.alarm_threshold = rc.real_param("alarm_threshold", 0.25);
                rule.params = std::move(p);
                break;
            }
        }
        rc.reject_unknown_keys();
        if (!rc.failed()) {
            policy.manifest.entries[rule.id] = manifest_for(rule);
            policy.rules.push_back(std::move(rule));
        }
    }

    if (!result.errors.empty()) return result;
    result.policy = std::move(policy);
    return result;
}

const DataAccessManifest& required_fields(const CompiledPolicy& policy) {
    return policy.manifest;
}

bool glob_match(const std::string& pattern, const std::string& text) {
    std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace auditbot
