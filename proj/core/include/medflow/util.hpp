#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medflow {

// 64-bit FNV-1a over a byte range. Audit digest, not a security hash.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(std::string_view text);

// 16 lowercase hex digits, zero padded.
std::string hex64(std::uint64_t value);

// Glob with `*` (any run) and `?` (any single char). No character classes.
bool glob_match(std::string_view pattern, std::string_view text);

// Dataset / identifier grammar: [A-Za-z0-9_]+ and at most 128 chars.
bool valid_name(std::string_view name);

// Replaces every character outside [A-Za-z0-9_] with '_'.
std::string sanitize_name(std::string_view raw);

// ISO-8601 UTC, second resolution: 2026-08-10T12:34:56Z
std::string format_utc(std::chrono::system_clock::time_point tp);
std::string utc_now();

// Dotted version order: split on '.', numeric segments compare numerically,
// mixed segments lexicographically; shorter is less on common prefix.
bool version_less(std::string_view a, std::string_view b);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws Error on bad input

// Split helpers for the tab-separated on-disk formats.
std::vector<std::string> split(std::string_view line, char sep);
std::string join(std::span<const std::string> parts, char sep);

}  // namespace medflow
