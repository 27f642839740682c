#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace xfkt {

// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Stable 64-bit FNV-1a; used to derive per-student seeds.
std::uint64_t fnv1a64(std::string_view data);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace xfkt
