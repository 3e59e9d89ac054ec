#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace glocad::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDivergence = 3,
    kVerificationFailed = 4,
};

/// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

/// Writes through a temporary file and renames it into place.
void write_atomic(const std::string& path, const std::string& contents);

}  // namespace glocad::cli
