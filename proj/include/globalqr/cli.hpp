#pragma once

// Command-line front end: `test`, `simulate` and `envelope` subcommands.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
// Errors are reported as a single "error: ..." line on the error stream.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace gqr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace gqr
