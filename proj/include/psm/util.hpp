#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace psm {

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

// FNV-1a 64. Used for artifact fingerprints and schema hashes; stable across
// platforms and runs, not cryptographic.
class Fnv1a {
public:
    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update_u64(std::uint64_t v) {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        update(buf, 8);
    }
    void update_i64(std::int64_t v) { update_u64(static_cast<std::uint64_t>(v)); }
    void update_double(double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, 8);
        update_u64(bits);
    }

    std::uint64_t digest() const { return hash_; }
    std::string hex() const;

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);
std::uint64_t fingerprint_file(const std::string& path);

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

// Shortest round-trip decimal form. All persisted artifacts format doubles
// through this so that reruns are byte-identical.
std::string format_double(double v);
std::string format_int(std::int64_t v);

bool parse_double(std::string_view s, double& out);
bool parse_i64(std::string_view s, std::int64_t& out);

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// ---------------------------------------------------------------------------
// Parallel helpers
// ---------------------------------------------------------------------------

// Global cap on worker threads (CLI --threads). 0 = hardware concurrency.
void set_thread_cap(unsigned n);
unsigned thread_cap();

// Runs fn(begin, end) over a partition of [0, n). Results must be written to
// independent slots so that serial and parallel runs agree bit-for-bit.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace psm
