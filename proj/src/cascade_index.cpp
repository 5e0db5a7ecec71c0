#include "psm/cascade_index.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "psm/util.hpp"

namespace psm {

using nlohmann::json;

Timestamp CascadeIndex::Cascade::end_time() const {
    Timestamp t = participants.front().time;
    for (const auto& p : participants) t = std::max(t, p.time);
    return t;
}

const CascadeIndex::Cascade& CascadeIndex::cascade(MessageId m) const {
    if (m >= cascades_.size()) throw DataError("unknown message id");
    return cascades_[m];
}

std::vector<UserId> CascadeIndex::participants(MessageId m) const {
    const auto& c = cascade(m);
    std::vector<UserId> out;
    out.reserve(c.participants.size());
    for (const auto& p : c.participants) out.push_back(p.user);
    return out;
}

const std::vector<CascadeIndex::UserEntry>& CascadeIndex::user_entries(UserId u) const {
    if (u >= user_entries_.size()) throw DataError("unknown user id");
    return user_entries_[u];
}

bool CascadeIndex::is_key(UserId u, MessageId m) const {
    const auto& entries = user_entries(u);
    auto it = std::lower_bound(entries.begin(), entries.end(), m,
                               [](const UserEntry& e, MessageId mm) { return e.message < mm; });
    return it != entries.end() && it->message == m && it->key;
}

CascadeIndex build_cascade_index(const ActionLog& log, std::int64_t theta, double phi) {
    if (!(phi > 0.0 && phi < 1.0)) throw ParameterError("phi must lie in (0,1)");
    if (theta < 1) throw ParameterError("theta must be >= 1");

    CascadeIndex idx;
    idx.theta_ = theta;
    idx.phi_ = phi;
    idx.cascades_.resize(log.message_count());
    for (const auto& t : log.tuples) {
        idx.cascades_[t.message].participants.push_back({t.user, t.time, t.seq, 0, false});
    }

    for (auto& c : idx.cascades_) {
        auto& ps = c.participants;
        std::sort(ps.begin(), ps.end(), [](const auto& a, const auto& b) {
            if (a.time != b.time) return a.time < b.time;
            return a.seq < b.seq;
        });
        const std::size_t n = ps.size();
        c.viral = static_cast<std::int64_t>(n) >= theta;
        if (c.viral) ++idx.viral_count_;

        // rank = strictly-earlier count; later = strictly-later count.
        // Equal-time participants share a rank and never count as "after".
        std::size_t group_start = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ps[i].time != ps[group_start].time) group_start = i;
            ps[i].rank = static_cast<std::uint32_t>(group_start);
        }
        std::size_t group_end = n;  // one past the last index sharing the current time
        for (std::size_t ri = n; ri-- > 0;) {
            if (ps[ri].time != ps[group_end - 1].time) group_end = ri + 1;
            const std::size_t later = n - group_end;
            ps[ri].key = static_cast<double>(n) * phi <= static_cast<double>(later);
        }
    }
    idx.rho_ = idx.cascades_.empty()
                   ? 0.0
                   : static_cast<double>(idx.viral_count_) / static_cast<double>(idx.cascades_.size());

    idx.user_entries_.resize(log.user_count());
    idx.key_count_.assign(log.user_count(), 0);
    idx.key_viral_count_.assign(log.user_count(), 0);
    for (MessageId m = 0; m < idx.cascades_.size(); ++m) {
        for (const auto& p : idx.cascades_[m].participants) {
            idx.user_entries_[p.user].push_back({m, p.time, p.rank, p.key});
            if (p.key) {
                ++idx.key_count_[p.user];
                if (idx.cascades_[m].viral) ++idx.key_viral_count_[p.user];
            }
        }
    }
    // message ids appended in ascending order above, so entries are sorted
    for (UserId u = 0; u < idx.user_entries_.size(); ++u) {
        if (idx.key_count_[u] > 0) idx.key_users_.push_back(u);
    }

    idx.log_fingerprint_ = log.fingerprint();
    Fnv1a h;
    h.update("psm-index-v1");
    h.update_u64(idx.log_fingerprint_);
    h.update_i64(theta);
    h.update_double(phi);
    idx.fingerprint_ = h.digest();
    return idx;
}

void save_index(const std::string& path, const ActionLog& log, const CascadeIndex& index) {
    json j;
    j["format_version"] = 1;
    j["kind"] = "psm_index";
    j["theta"] = index.theta();
    j["phi"] = index.phi();
    j["users"] = log.users.names();
    j["messages"] = log.messages.names();
    json verif = json::array();
    for (std::size_t u = 0; u < log.verified.size(); ++u) {
        if (log.verified[u]) verif.push_back(u);
    }
    j["verified"] = std::move(verif);
    json tuples = json::array();
    for (const auto& t : log.tuples) {
        tuples.push_back({t.user, t.message, t.time});
    }
    j["tuples"] = std::move(tuples);
    j["log_fingerprint"] = to_hex(log.fingerprint());
    j["index_fingerprint"] = to_hex(index.fingerprint());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write index " + path);
    out << j.dump() << '\n';
    if (!out) throw DataError("write failed: " + path);
}

IndexBundle load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open index " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("index is not valid JSON: " + path);
    if (j.value("kind", "") != "psm_index") throw DataError("not a psm index file: " + path);
    if (j.value("format_version", 0) != 1) throw DataError("unsupported index format version");

    IndexBundle b;
    for (const auto& name : j.at("users")) b.log.users.intern(name.get<std::string>());
    for (const auto& name : j.at("messages")) b.log.messages.intern(name.get<std::string>());
    b.log.verified.assign(b.log.users.size(), false);
    for (const auto& u : j.at("verified")) b.log.verified.at(u.get<std::size_t>()) = true;
    std::uint32_t seq = 0;
    for (const auto& t : j.at("tuples")) {
        b.log.tuples.push_back({t.at(0).get<UserId>(), t.at(1).get<MessageId>(),
                                t.at(2).get<Timestamp>(), seq++});
    }
    const std::string stored_fp = j.value("log_fingerprint", "");
    if (!stored_fp.empty() && stored_fp != to_hex(b.log.fingerprint())) {
        throw DataError("index log fingerprint mismatch (corrupt or edited): " + path);
    }
    b.index = build_cascade_index(b.log, j.at("theta").get<std::int64_t>(), j.at("phi").get<double>());
    return b;
}

}  // namespace psm
