#ifndef EVCS_IO_HPP
#define EVCS_IO_HPP

#include <filesystem>
#include <string>

namespace evcs {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Writes `content` to a sibling temp file and renames it over `path`, so a
/// reader never observes a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace evcs

#endif  // EVCS_IO_HPP
