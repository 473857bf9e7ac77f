#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditbot/hash.hpp"

namespace auditbot {

using Json = nlohmann::json;

// Canonical byte form of a structured record: UTF-8, object keys sorted,
// no insignificant whitespace, reals as exactly six decimals, integers
// unpadded. Throws std::invalid_argument on non-finite reals or values
// outside the string/bool/integer/real/list/map domain.
std::string canonical_payload(const Json& value);

enum class PayloadKind { run_meta, finding, assessment, trace };

std::string to_string(PayloadKind k);
std::optional<PayloadKind> payload_kind_from_string(const std::string& s);

struct VaultRecord {
    std::uint64_t index = 0;
    std::string prev_hash;    // 64 lowercase hex chars
    std::string recorded_at;  // RFC 3339 UTC
    PayloadKind payload_kind = PayloadKind::run_meta;
    std::string payload;  // canonical text, embeds index/kind/recorded_at
    std::string hash;     // sha256(prev_hash + '\n' + payload)

    Json body() const;  // the caller-supplied payload inside the wrapper
};

struct VerifyResult {
    bool ok = true;
    std::uint64_t first_bad_index = 0;
    std::string detail;
};

class VaultError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Append-only hash-chained JSONL store. Single writer; opening verifies the
// existing chain and refuses to append to a corrupt file.
class Vault {
  public:
    static Vault open(const std::filesystem::path& file);

    VaultRecord append(PayloadKind kind, const Json& body, const std::string& recorded_at);

    const std::filesystem::path& path() const { return path_; }
    std::uint64_t size() const { return next_index_; }
    const std::string& head_hash() const { return head_hash_; }

  private:
    Vault(std::filesystem::path p, std::uint64_t next_index, std::string head_hash);

    std::filesystem::path path_;
    std::uint64_t next_index_ = 0;
    std::string head_hash_ = kZeroHash;
};

// Recomputes every hash and linkage; reports the smallest failing index.
VerifyResult verify_chain(const std::vector<std::string>& lines);
VerifyResult verify_chain_file(const std::filesystem::path& file);

std::vector<std::string> read_lines(const std::filesystem::path& file);
std::vector<VaultRecord> read_records(const std::filesystem::path& file);

std::optional<VaultRecord> parse_record_line(const std::string& line);
std::string record_to_line(const VaultRecord& r);

struct CaseBundle {
    std::uint64_t first_index = 0;
    std::uint64_t last_index = 0;
    std::vector<VaultRecord> records;           // contiguous sub-chain first..last
    std::vector<VaultRecord> run_meta_records;  // run_meta of each covered run
    std::string head_hash;                      // hash of records.back()
    std::string policy_hash;
    std::string log_hash;

    Json to_json() const;
    static CaseBundle from_json(const Json& j);
};

// Selects the vault records whose finding payload ids match, plus every
// record between the earliest and latest match and each covered run's
// run_meta record. Throws VaultError on unknown ids or a tampered vault.
CaseBundle export_case(const std::filesystem::path& file,
                       const std::vector<std::string>& finding_ids);

VerifyResult verify_bundle(const CaseBundle& bundle,
                           const std::optional<std::string>& expected_head = std::nullopt);

}  // namespace auditbot
