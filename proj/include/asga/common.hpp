#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace asga {

// Contract violations: bad arguments, malformed configs, broken invariants.
// The CLI maps these to exit code 1.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files (IDX, checkpoints). Also exit code 1.
struct FormatError : ContractError {
    using ContractError::ContractError;
};

// Non-finite values or divergence detected mid-computation. Exit code 2.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

// Shortest round-trip decimal form; keeps CSV/JSON output byte-stable per build.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace asga
