#include "psm/action_log.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "psm/util.hpp"

namespace psm {

std::uint32_t Interner::intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
}

std::optional<std::uint32_t> Interner::find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t ActionLog::fingerprint() const {
    Fnv1a h;
    h.update("psm-action-log-v1");
    h.update_u64(users.size());
    for (const auto& n : users.names()) {
        h.update(n);
        h.update("\x1f");
    }
    h.update_u64(messages.size());
    for (const auto& n : messages.names()) {
        h.update(n);
        h.update("\x1f");
    }
    h.update_u64(tuples.size());
    for (const auto& t : tuples) {
        h.update_u64(t.user);
        h.update_u64(t.message);
        h.update_i64(t.time);
    }
    for (std::size_t u = 0; u < verified.size(); ++u) {
        if (verified[u]) h.update_u64(u);
    }
    return h.digest();
}

ActionLog ingest_records(const std::vector<RawAction>& records,
                         const std::vector<std::string>& verified_users, IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;

    ActionLog log;
    struct Parsed {
        UserId user;
        MessageId message;
        Timestamp time;
    };
    std::vector<Parsed> parsed;
    parsed.reserve(records.size());
    for (const auto& r : records) {
        ++rep.records_seen;
        parsed.push_back({log.users.intern(r.user), log.messages.intern(r.message), r.time});
    }

    if (parsed.empty()) throw DataError("empty action log");

    // Dedup: minimum time per (user, message), ties keep the earliest record.
    std::unordered_map<std::uint64_t, std::size_t> best;
    best.reserve(parsed.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const std::uint64_t key =
            (static_cast<std::uint64_t>(parsed[i].user) << 32) | parsed[i].message;
        auto [it, inserted] = best.emplace(key, i);
        if (!inserted) {
            ++rep.duplicates_dropped;
            if (parsed[i].time < parsed[it->second].time) it->second = i;
        }
    }

    std::vector<std::size_t> survivors;
    survivors.reserve(best.size());
    for (const auto& [key, idx] : best) survivors.push_back(idx);
    std::sort(survivors.begin(), survivors.end());

    log.tuples.reserve(survivors.size());
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        const auto& p = parsed[survivors[i]];
        log.tuples.push_back({p.user, p.message, p.time, static_cast<std::uint32_t>(i)});
    }
    rep.tuples_kept = log.tuples.size();

    log.verified.assign(log.users.size(), false);
    for (const auto& v : verified_users) {
        if (auto id = log.users.find(v)) {
            log.verified[*id] = true;
        } else {
            ++rep.unknown_verified;
            if (rep.warnings.size() < 20) {
                rep.warnings.push_back("verified user not present in action log: " + v);
            }
        }
    }
    return log;
}

namespace {

bool parse_timestamp(std::string_view s, Timestamp& out) {
    if (!parse_i64(s, out)) return false;
    return out >= 0;
}

void handle_malformed(ParseMode mode, IngestReport& rep, const std::string& path,
                      std::size_t line_no, const std::string& why) {
    const std::string msg =
        path + ":" + format_int(static_cast<std::int64_t>(line_no)) + ": " + why;
    if (mode == ParseMode::strict) throw DataError(msg);
    ++rep.malformed;
    if (rep.warnings.size() < 20) rep.warnings.push_back("skipped malformed record, " + msg);
}

std::vector<RawAction> parse_actions_csv(const std::string& path, ParseMode mode,
                                         IngestReport& rep) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open actions file " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty action log");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split(line, ',');
    int user_col = -1, msg_col = -1, time_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto h = trim(header[i]);
        if (h == "user_id") user_col = static_cast<int>(i);
        else if (h == "message_id") msg_col = static_cast<int>(i);
        else if (h == "timestamp") time_col = static_cast<int>(i);
    }
    if (user_col < 0 || msg_col < 0 || time_col < 0) {
        throw DataError(path + ": header must contain user_id, message_id, timestamp");
    }
    std::vector<RawAction> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != header.size()) {
            handle_malformed(mode, rep, path, line_no, "wrong field count");
            continue;
        }
        RawAction a;
        a.user = std::string(trim(fields[static_cast<std::size_t>(user_col)]));
        a.message = std::string(trim(fields[static_cast<std::size_t>(msg_col)]));
        if (a.user.empty() || a.message.empty()) {
            handle_malformed(mode, rep, path, line_no, "empty identifier");
            continue;
        }
        if (!parse_timestamp(fields[static_cast<std::size_t>(time_col)], a.time)) {
            handle_malformed(mode, rep, path, line_no, "bad timestamp");
            continue;
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<RawAction> parse_actions_jsonl(const std::string& path, ParseMode mode,
                                           IngestReport& rep) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open actions file " + path);
    std::vector<RawAction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            handle_malformed(mode, rep, path, line_no, "invalid JSON object");
            continue;
        }
        if (!j.contains("user_id") || !j.contains("message_id") || !j.contains("timestamp") ||
            !j["user_id"].is_string() || !j["message_id"].is_string() ||
            !j["timestamp"].is_number_integer()) {
            handle_malformed(mode, rep, path, line_no,
                             "need string user_id/message_id and integer timestamp");
            continue;
        }
        RawAction a;
        a.user = j["user_id"].get<std::string>();
        a.message = j["message_id"].get<std::string>();
        a.time = j["timestamp"].get<std::int64_t>();
        if (a.user.empty() || a.message.empty() || a.time < 0) {
            handle_malformed(mode, rep, path, line_no, "empty identifier or negative timestamp");
            continue;
        }
        out.push_back(std::move(a));
    }
    return out;
}

bool looks_like_jsonl(const std::string& path) {
    return path.ends_with(".jsonl") || path.ends_with(".ndjson") || path.ends_with(".json");
}

}  // namespace

std::vector<std::string> read_verified_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open verified-users file " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto t = trim(line);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

void save_log(const std::string& path, const ActionLog& log) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "psm_log";
    j["users"] = log.users.names();
    j["messages"] = log.messages.names();
    nlohmann::json verif = nlohmann::json::array();
    for (std::size_t u = 0; u < log.verified.size(); ++u) {
        if (log.verified[u]) verif.push_back(u);
    }
    j["verified"] = std::move(verif);
    nlohmann::json tuples = nlohmann::json::array();
    for (const auto& t : log.tuples) tuples.push_back({t.user, t.message, t.time});
    j["tuples"] = std::move(tuples);
    j["fingerprint"] = to_hex(log.fingerprint());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write log " + path);
    out << j.dump() << '\n';
}

ActionLog load_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open log " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("kind", "") != "psm_log") {
        throw DataError("not a psm log file: " + path);
    }
    ActionLog log;
    for (const auto& name : j.at("users")) log.users.intern(name.get<std::string>());
    for (const auto& name : j.at("messages")) log.messages.intern(name.get<std::string>());
    log.verified.assign(log.users.size(), false);
    for (const auto& u : j.at("verified")) log.verified.at(u.get<std::size_t>()) = true;
    std::uint32_t seq = 0;
    for (const auto& t : j.at("tuples")) {
        log.tuples.push_back(
            {t.at(0).get<UserId>(), t.at(1).get<MessageId>(), t.at(2).get<Timestamp>(), seq++});
    }
    const std::string fp = j.value("fingerprint", "");
    if (!fp.empty() && fp != to_hex(log.fingerprint())) {
        throw DataError("log fingerprint mismatch (corrupt or edited): " + path);
    }
    return log;
}

ActionLog ingest_actions_file(const std::string& actions_path,
                              const std::optional<std::string>& verified_path, ParseMode mode,
                              ActionFormat format, IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    if (format == ActionFormat::autodetect) {
        format = looks_like_jsonl(actions_path) ? ActionFormat::jsonl : ActionFormat::csv;
    }
    auto records = (format == ActionFormat::jsonl) ? parse_actions_jsonl(actions_path, mode, rep)
                                                   : parse_actions_csv(actions_path, mode, rep);
    if (records.empty()) throw DataError("empty action log");
    std::vector<std::string> verified;
    if (verified_path) verified = read_verified_file(*verified_path);
    return ingest_records(records, verified, &rep);
}

}  // namespace psm
