#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "psm/types.hpp"

namespace psm {

// One surviving (user, message, time) record. `seq` is the ingestion order
// of the surviving tuple and is the deterministic tie-break everywhere equal
// timestamps need an ordering that is not a precedence.
struct ActionTuple {
    UserId user;
    MessageId message;
    Timestamp time;
    std::uint32_t seq;
};

// Dense string interning, stable by first appearance.
class Interner {
public:
    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

struct ActionLog {
    std::vector<ActionTuple> tuples;  // per-(user,message) deduplicated, in ingestion order
    Interner users;
    Interner messages;
    std::vector<bool> verified;  // indexed by UserId

    std::size_t user_count() const { return users.size(); }
    std::size_t message_count() const { return messages.size(); }
    bool is_verified(UserId u) const { return u < verified.size() && verified[u]; }

    // Stable content hash over interning, tuples and the verified set.
    std::uint64_t fingerprint() const;
};

// Lenient skips malformed records with a warning; strict aborts with the
// offending line number.
enum class ParseMode { lenient, strict };

enum class ActionFormat { autodetect, csv, jsonl };

struct RawAction {
    std::string user;
    std::string message;
    Timestamp time = 0;
};

struct IngestReport {
    std::size_t records_seen = 0;
    std::size_t tuples_kept = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t malformed = 0;
    std::size_t unknown_verified = 0;
    std::vector<std::string> warnings;
};

// Core ingestion: dedup keeps the minimum-time tuple per (user, message),
// ties broken by first ingestion order; interning follows first appearance.
ActionLog ingest_records(const std::vector<RawAction>& records,
                         const std::vector<std::string>& verified_users,
                         IngestReport* report = nullptr);

ActionLog ingest_actions_file(const std::string& actions_path,
                              const std::optional<std::string>& verified_path,
                              ParseMode mode = ParseMode::lenient,
                              ActionFormat format = ActionFormat::autodetect,
                              IngestReport* report = nullptr);

std::vector<std::string> read_verified_file(const std::string& path);

// JSON cache of a deduplicated log (the parse stage of the pipeline).
void save_log(const std::string& path, const ActionLog& log);
ActionLog load_log(const std::string& path);

}  // namespace psm
