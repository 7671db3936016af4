#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hackg {

// ASCII case folding; entity name matching is exact after folding.
std::string fold_name(std::string_view name);

// Shortest decimal string that round-trips the value (std::to_chars).
std::string format_double(double value);

// FNV-1a content hash used for input digests and output hashes.
uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(uint64_t value);

}  // namespace hackg
