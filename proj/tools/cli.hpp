#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace invbag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (`args` excludes the program name) and returns its
/// exit code: 0 success, 1 runtime failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace invbag::cli
