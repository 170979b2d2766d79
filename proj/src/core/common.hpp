#pragma once

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cdd {

using RecordId = std::int64_t;

enum class Group : std::uint8_t { Protected = 0, Unprotected = 1 };
enum class Decision : std::uint8_t { Negative = 0, Positive = 1 };

inline const char* to_string(Group g) {
    return g == Group::Protected ? "protected" : "unprotected";
}
inline const char* to_string(Decision d) {
    return d == Decision::Negative ? "-" : "+";
}

// Error with the pipeline stage it surfaced in; stages tag diagnostics so a
// CLI failure names the step that produced it.
class Error : public std::runtime_error {
public:
    explicit Error(std::string message, std::string stage = {})
        : std::runtime_error(std::move(message)), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }
    void set_stage_if_empty(std::string_view stage) {
        if (stage_.empty()) stage_.assign(stage);
    }
    std::string tagged_message() const {
        if (stage_.empty()) return what();
        return "[" + stage_ + "] " + what();
    }

private:
    std::string stage_;
};

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view s, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

// Shortest decimal form that parses back to the same double; keeps every
// serialized artifact byte-stable across reruns.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Strict full-token parse; rejects trailing junk and empty input.
inline bool parse_double(std::string_view token, double& out) {
    if (token.empty()) return false;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Uniform draw in [0,1) with 53 random bits; tied to mt19937_64 so a seed
// yields the same stream on every platform.
inline double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace cdd
