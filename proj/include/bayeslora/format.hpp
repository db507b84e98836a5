// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bayeslora {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);
/// Fixed-point text with `decimals` digits after the point.
std::string format_fixed(double x, int decimals);

double parse_double(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Reads a whole file; throws IoError naming the path.
std::string read_file(const std::string& path);
/// Writes atomically-enough for our purposes (truncate + write); throws IoError.
void write_file(const std::string& path, std::string_view content);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace bayeslora
