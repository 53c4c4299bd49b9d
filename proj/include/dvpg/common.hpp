#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dvpg {

// Error taxonomy mirrored by the CLI exit codes: ConfigError -> 1,
// DataError -> 2, anything else -> 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::vector<std::string> read_lines(const std::string& path);

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string lowercase(const std::string& s);
std::string trim(const std::string& s);

// Fixed-precision float formatting for CSV/table output. Uses snprintf so the
// bytes are identical across runs regardless of locale or stream state.
std::string format_double(double v, int precision);

void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);

}  // namespace dvpg
