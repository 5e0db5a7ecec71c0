#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "psm/action_log.hpp"
#include "psm/cascade_index.hpp"
#include "psm/rng.hpp"

namespace testsup {

struct Rec {
    std::string user;
    std::string message;
    psm::Timestamp time;
};

inline psm::ActionLog make_log(const std::vector<Rec>& recs,
                               const std::vector<std::string>& verified = {}) {
    std::vector<psm::RawAction> actions;
    actions.reserve(recs.size());
    for (const auto& r : recs) actions.push_back({r.user, r.message, r.time});
    return psm::ingest_records(actions, verified);
}

// Random logs with overlapping participants, frequent timestamp ties and
// occasional duplicate records; the stress input for all oracle checks.
inline psm::ActionLog random_log(psm::Rng& rng, std::size_t max_users, std::size_t max_msgs,
                                 double verified_fraction = 0.1) {
    const std::size_t n_users = 2 + rng.next_below(max_users - 1);
    const std::size_t n_msgs = 1 + rng.next_below(max_msgs);
    std::vector<psm::RawAction> actions;
    std::vector<std::string> verified;
    for (std::size_t u = 0; u < n_users; ++u) {
        if (rng.chance(verified_fraction)) verified.push_back("u" + std::to_string(u));
    }
    for (std::size_t m = 0; m < n_msgs; ++m) {
        const std::size_t size = 1 + rng.next_below(std::min<std::size_t>(n_users, 12));
        std::vector<std::size_t> users(n_users);
        for (std::size_t u = 0; u < n_users; ++u) users[u] = u;
        rng.shuffle(users);
        for (std::size_t k = 0; k < size; ++k) {
            actions.push_back({"u" + std::to_string(users[k]), "m" + std::to_string(m),
                               static_cast<psm::Timestamp>(rng.next_below(40))});
            if (rng.chance(0.08)) {  // duplicate record, possibly different time
                actions.push_back({"u" + std::to_string(users[k]), "m" + std::to_string(m),
                                   static_cast<psm::Timestamp>(rng.next_below(40))});
            }
        }
    }
    return psm::ingest_records(actions, verified);
}

inline std::string temp_dir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("psm_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace testsup
