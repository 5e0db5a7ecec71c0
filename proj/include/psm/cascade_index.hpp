#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psm/action_log.hpp"
#include "psm/types.hpp"

namespace psm {

// Precomputed per-message substrate for every probability metric.
//
// Key-user rule: participant i with tuple (i,m,t) is a key user of m iff
//   |Actions_m| * phi <= |{ j : (j,m,t') in Actions_m, t' > t }|
// with strict time comparison; equal timestamps never count as "after".
// A message is viral iff its participant count >= theta.
class CascadeIndex {
public:
    struct Participant {
        UserId user;
        Timestamp time;
        std::uint32_t seq;       // ingestion order, deterministic tie-break
        std::uint32_t rank;      // count of strictly-earlier participants
        bool key;
    };

    struct Cascade {
        std::vector<Participant> participants;  // ascending (time, seq)
        bool viral = false;
        std::size_t size() const { return participants.size(); }
        Timestamp start_time() const { return participants.front().time; }
        Timestamp end_time() const;  // max time
    };

    struct UserEntry {
        MessageId message;
        Timestamp time;
        std::uint32_t rank;
        bool key;
    };

    std::int64_t theta() const { return theta_; }
    double phi() const { return phi_; }
    double rho() const { return rho_; }
    std::size_t viral_count() const { return viral_count_; }
    std::size_t message_count() const { return cascades_.size(); }
    std::size_t user_count() const { return user_entries_.size(); }

    const Cascade& cascade(MessageId m) const;
    const std::vector<Cascade>& cascades() const { return cascades_; }

    // Time-ordered participant users of message m; unknown message throws.
    std::vector<UserId> participants(MessageId m) const;

    // Per-user message entries, ascending by message id.
    const std::vector<UserEntry>& user_entries(UserId u) const;

    bool is_key(UserId u, MessageId m) const;
    std::uint32_t key_message_count(UserId u) const { return key_count_.at(u); }
    std::uint32_t key_viral_message_count(UserId u) const { return key_viral_count_.at(u); }

    // Users that are key for at least one message, ascending id. These are
    // the rows of every per-user metric table.
    const std::vector<UserId>& key_users() const { return key_users_; }

    std::uint64_t fingerprint() const { return fingerprint_; }
    std::uint64_t log_fingerprint() const { return log_fingerprint_; }

    friend CascadeIndex build_cascade_index(const ActionLog& log, std::int64_t theta, double phi);

private:
    std::int64_t theta_ = 0;
    double phi_ = 0.0;
    double rho_ = 0.0;
    std::size_t viral_count_ = 0;
    std::vector<Cascade> cascades_;
    std::vector<std::vector<UserEntry>> user_entries_;
    std::vector<std::uint32_t> key_count_;
    std::vector<std::uint32_t> key_viral_count_;
    std::vector<UserId> key_users_;
    std::uint64_t fingerprint_ = 0;
    std::uint64_t log_fingerprint_ = 0;
};

CascadeIndex build_cascade_index(const ActionLog& log, std::int64_t theta, double phi);

// Self-contained persisted artifact: the deduplicated log plus the index
// parameters. Cascade structure is rebuilt deterministically on load.
struct IndexBundle {
    ActionLog log;
    CascadeIndex index;
};

void save_index(const std::string& path, const ActionLog& log, const CascadeIndex& index);
IndexBundle load_index(const std::string& path);

}  // namespace psm
