#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sgl::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kModuleError = 1;
inline constexpr int kUsageError = 2;
inline constexpr int kTrainingAborted = 3;

// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// --out if given, else $SGL_OUTPUT_DIR, else "sgl_output".
std::string resolve_output_dir(const std::string& flag_value);

// FNV-1a over the bytes of a file, as 16 hex digits.
std::string file_checksum(const std::string& path);

}  // namespace sgl::cli
