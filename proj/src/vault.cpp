#include "auditbot/vault.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace auditbot {

namespace {

void canonical_string(const std::string& s, std::string& out) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

void canonical_value(const Json& v, std::string& out) {
    switch (v.type()) {
        case Json::value_t::object: {
            out += '{';
            bool first = true;
            // nlohmann objects iterate in lexicographic key order already.
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out += ',';
                first = false;
                canonical_string(it.key(), out);
                out += ':';
                canonical_value(it.value(), out);
            }
            out += '}';
            break;
        }
        case Json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& item : v) {
                if (!first) out += ',';
                first = false;
                canonical_value(item, out);
            }
            out += ']';
            break;
        }
        case Json::value_t::string:
            canonical_string(v.get<std::string>(), out);
            break;
        case Json::value_t::boolean:
            out += v.get<bool>() ? "true" : "false";
            break;
        case Json::value_t::number_integer:
            out += std::to_string(v.get<std::int64_t>());
            break;
        case Json::value_t::number_unsigned:
            out += std::to_string(v.get<std::uint64_t>());
            break;
        case Json::value_t::number_float: {
            double d = v.get<double>();
            if (!std::isfinite(d)) throw std::invalid_argument("non-finite real in payload");
            if (d == 0.0) d = 0.0;  // normalize -0
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.6f", d);
            out += buf;
            break;
        }
        default:
            throw std::invalid_argument("payload value outside the canonical domain");
    }
}

std::string wrapper_payload(std::uint64_t index, PayloadKind kind, const Json& body,
                            const std::string& recorded_at) {
    Json w;
    w["body"] = body;
    w["index"] = index;
    w["kind"] = to_string(kind);
    w["recorded_at"] = recorded_at;
    return canonical_payload(w);
}

std::string chain_hash(const std::string& prev_hash, const std::string& payload) {
    std::string material;
    material.reserve(prev_hash.size() + 1 + payload.size());
    material += prev_hash;
    material += '\n';
    material += payload;
    return sha256_hex(material);
}

}  // namespace

std::string canonical_payload(const Json& value) {
    std::string out;
    canonical_value(value, out);
    return out;
}

std::string to_string(PayloadKind k) {
    switch (k) {
        case PayloadKind::run_meta: return "run_meta";
        case PayloadKind::finding: return "finding";
        case PayloadKind::assessment: return "assessment";
        case PayloadKind::trace: return "trace";
    }
    return "run_meta";
}

std::optional<PayloadKind> payload_kind_from_string(const std::string& s) {
    if (s == "run_meta") return PayloadKind::run_meta;
    if (s == "finding") return PayloadKind::finding;
    if (s == "assessment") return PayloadKind::assessment;
    if (s == "trace") return PayloadKind::trace;
    return std::nullopt;
}

Json VaultRecord::body() const {
    Json w = Json::parse(payload, nullptr, false);
    if (w.is_discarded() || !w.is_object() || !w.contains("body")) return Json();
    return w["body"];
}

Vault::Vault(std::filesystem::path p, std::uint64_t next_index, std::string head_hash)
    : path_(std::move(p)), next_index_(next_index), head_hash_(std::move(head_hash)) {}

Vault Vault::open(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) {
        return Vault(file, 0, kZeroHash);
    }
    const auto lines = read_lines(file);
    const VerifyResult vr = verify_chain(lines);
    if (!vr.ok) {
        throw VaultError("vault fails verification at index " +
                         std::to_string(vr.first_bad_index) + ": " + vr.detail);
    }
    std::string head = kZeroHash;
    if (!lines.empty()) {
        const auto rec = parse_record_line(lines.back());
        head = rec->hash;
    }
    return Vault(file, lines.size(), head);
}

VaultRecord Vault::append(PayloadKind kind, const Json& body, const std::string& recorded_at) {
    VaultRecord rec;
    rec.index = next_index_;
    rec.prev_hash = head_hash_;
    rec.recorded_at = recorded_at;
    rec.payload_kind = kind;
    rec.payload = wrapper_payload(rec.index, kind, body, recorded_at);
    rec.hash = chain_hash(rec.prev_hash, rec.payload);

    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw VaultError("cannot open vault for append: " + path_.string());
    out << record_to_line(rec) << '\n';
    out.flush();
    if (!out) throw VaultError("write failure on vault: " + path_.string());

    head_hash_ = rec.hash;
    ++next_index_;
    return rec;
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw VaultError("cannot read: " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::optional<VaultRecord> parse_record_line(const std::string& line) {
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    static const char* keys[] = {"index", "prev_hash", "recorded_at", "payload_kind", "payload",
                                 "hash"};
    for (const char* k : keys) {
        if (!j.contains(k)) return std::nullopt;
    }
    if (!j["index"].is_number_integer() && !j["index"].is_number_unsigned()) return std::nullopt;
    for (const char* k : {"prev_hash", "recorded_at", "payload_kind", "payload", "hash"}) {
        if (!j[k].is_string()) return std::nullopt;
    }
    VaultRecord r;
    r.index = j["index"].get<std::uint64_t>();
    r.prev_hash = j["prev_hash"].get<std::string>();
    r.recorded_at = j["recorded_at"].get<std::string>();
    const auto kind = payload_kind_from_string(j["payload_kind"].get<std::string>());
    if (!kind) return std::nullopt;
    r.payload_kind = *kind;
    r.payload = j["payload"].get<std::string>();
    r.hash = j["hash"].get<std::string>();
    return r;
}

std::string record_to_line(const VaultRecord& r) {
    Json j;
    j["index"] = r.index;
    j["prev_hash"] = r.prev_hash;
    j["recorded_at"] = r.recorded_at;
    j["payload_kind"] = to_string(r.payload_kind);
    j["payload"] = r.payload;
    j["hash"] = r.hash;
    return canonical_payload(j);
}

namespace {

// Checks one record in isolation: field shapes, embedded-metadata mirrors,
// and the recomputed chain hash against the given predecessor hash.
bool check_record(const VaultRecord& r, std::uint64_t position, const std::string& expected_prev,
                  std::string& detail) {
    if (r.index != position) {
        detail = "index mismatch";
        return false;
    }
    if (!is_hex_digest(r.prev_hash) || !is_hex_digest(r.hash)) {
        detail = "malformed digest field";
        return false;
    }
    if (r.prev_hash != expected_prev) {
        detail = "prev_hash does not match predecessor";
        return false;
    }
    Json w = Json::parse(r.payload, nullptr, false);
    if (w.is_discarded() || !w.is_object() || !w.contains("body") || !w.contains("index") ||
        !w.contains("kind") || !w.contains("recorded_at")) {
        detail = "payload wrapper malformed";
        return false;
    }
    if (!w["index"].is_number_integer() && !w["index"].is_number_unsigned()) {
        detail = "payload wrapper malformed";
        return false;
    }
    if (w["index"].get<std::uint64_t>() != r.index || w["kind"] != to_string(r.payload_kind) ||
        w["recorded_at"] != r.recorded_at) {
        detail = "record fields disagree with hashed payload";
        return false;
    }
    if (chain_hash(r.prev_hash, r.payload) != r.hash) {
        detail = "hash mismatch";
        return false;
    }
    return true;
}

}  // namespace

VerifyResult verify_chain(const std::vector<std::string>& lines) {
    std::string prev = kZeroHash;
    for (std::uint64_t i = 0; i < lines.size(); ++i) {
        const auto rec = parse_record_line(lines[i]);
        if (!rec) {
            return {false, i, "unparseable record"};
        }
        std::string detail;
        if (!check_record(*rec, i, prev, detail)) {
            return {false, i, detail};
        }
        prev = rec->hash;
    }
    return {true, 0, ""};
}

VerifyResult verify_chain_file(const std::filesystem::path& file) {
    return verify_chain(read_lines(file));
}

std::vector<VaultRecord> read_records(const std::filesystem::path& file) {
    const auto lines = read_lines(file);
    std::vector<VaultRecord> records;
    records.reserve(lines.size());
    for (const auto& line : lines) {
        auto rec = parse_record_line(line);
        if (!rec) throw VaultError("unparseable vault record");
        records.push_back(std::move(*rec));
    }
    return records;
}

Json CaseBundle::to_json() const {
    Json j;
    j["first_index"] = first_index;
    j["last_index"] = last_index;
    j["head_hash"] = head_hash;
    j["policy_hash"] = policy_hash;
    j["log_hash"] = log_hash;
    Json recs = Json::array();
    for (const auto& r : records) recs.push_back(Json::parse(record_to_line(r)));
    j["records"] = recs;
    Json metas = Json::array();
    for (const auto& r : run_meta_records) metas.push_back(Json::parse(record_to_line(r)));
    j["run_meta_records"] = metas;
    return j;
}

CaseBundle CaseBundle::from_json(const Json& j) {
    CaseBundle b;
    b.first_index = j.at("first_index").get<std::uint64_t>();
    b.last_index = j.at("last_index").get<std::uint64_t>();
    b.head_hash = j.at("head_hash").get<std::string>();
    b.policy_hash = j.at("policy_hash").get<std::string>();
    b.log_hash = j.at("log_hash").get<std::string>();
    for (const auto& rj : j.at("records")) {
        auto rec = parse_record_line(canonical_payload(rj));
        if (!rec) throw VaultError("unparseable bundle record");
        b.records.push_back(std::move(*rec));
    }
    for (const auto& rj : j.at("run_meta_records")) {
        auto rec = parse_record_line(canonical_payload(rj));
        if (!rec) throw VaultError("unparseable bundle record");
        b.run_meta_records.push_back(std::move(*rec));
    }
    return b;
}

CaseBundle export_case(const std::filesystem::path& file,
                       const std::vector<std::string>& finding_ids) {
    const auto lines = read_lines(file);
    const VerifyResult vr = verify_chain(lines);
    if (!vr.ok) {
        throw VaultError("vault fails verification at index " +
                         std::to_string(vr.first_bad_index) + "; refusing export");
    }
    std::vector<VaultRecord> records;
    records.reserve(lines.size());
    for (const auto& line : lines) records.push_back(*parse_record_line(line));

    std::set<std::string> wanted(finding_ids.begin(), finding_ids.end());
    std::vector<std::uint64_t> hits;
    for (const auto& r : records) {
        if (r.payload_kind != PayloadKind::finding) continue;
        const Json body = r.body();
        if (body.is_object() && body.contains("id") && body["id"].is_string() &&
            wanted.count(body["id"].get<std::string>())) {
            hits.push_back(r.index);
            wanted.erase(body["id"].get<std::string>());
        }
    }
    if (!wanted.empty()) {
        throw VaultError("unknown finding id: " + *wanted.begin());
    }

    CaseBundle bundle;
    bundle.first_index = *std::min_element(hits.begin(), hits.end());
    bundle.last_index = *std::max_element(hits.begin(), hits.end());
    for (std::uint64_t i = bundle.first_index; i <= bundle.last_index; ++i) {
        bundle.records.push_back(records[i]);
    }
    // Nearest run_meta at or below each selected finding.
    std::set<std::uint64_t> meta_indexes;
    for (std::uint64_t hit : hits) {
        for (std::uint64_t i = hit + 1; i-- > 0;) {
            if (records[i].payload_kind == PayloadKind::run_meta) {
                if (i < bundle.first_index) meta_indexes.insert(i);
                break;
            }
        }
    }
    for (std::uint64_t i : meta_indexes) bundle.run_meta_records.push_back(records[i]);
    bundle.head_hash = bundle.records.back().hash;

    // Policy/log digests from the run_meta covering the earliest selection.
    const VaultRecord* meta = nullptr;
    for (std::uint64_t i = bundle.first_index + 1; i-- > 0;) {
        if (records[i].payload_kind == PayloadKind::run_meta) {
            meta = &records[i];
            break;
        }
    }
    if (meta != nullptr) {
        const Json body = meta->body();
        if (body.contains("policy_hash")) bundle.policy_hash = body["policy_hash"];
        if (body.contains("log_hash")) bundle.log_hash = body["log_hash"];
    }
    return bundle;
}

VerifyResult verify_bundle(const CaseBundle& bundle,
                           const std::optional<std::string>& expected_head) {
    if (bundle.records.empty()) return {false, 0, "empty bundle"};
    std::string detail;
    for (std::size_t i = 0; i < bundle.records.size(); ++i) {
        const VaultRecord& r = bundle.records[i];
        const std::uint64_t position = bundle.first_index + i;
        const std::string expected_prev =
            i == 0 ? r.prev_hash : bundle.records[i - 1].hash;  // linkage inside the span
        if (!check_record(r, position, expected_prev, detail)) {
            return {false, position, detail};
        }
        if (position == 0 && r.prev_hash != kZeroHash) {
            return {false, position, "genesis record must chain from the zero hash"};
        }
    }
    for (const auto& r : bundle.run_meta_records) {
        if (chain_hash(r.prev_hash, r.payload) != r.hash) {
            return {false, r.index, "run_meta hash mismatch"};
        }
    }
    if (bundle.records.back().hash != bundle.head_hash) {
        return {false, bundle.last_index, "bundle head hash mismatch"};
    }
    if (expected_head && *expected_head != bundle.head_hash) {
        return {false, bundle.last_index, "head hash differs from published head"};
    }
    return {true, 0, ""};
}

}  // namespace auditbot
