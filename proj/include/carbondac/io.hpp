#ifndef CARBONDAC_IO_HPP_
#define CARBONDAC_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

namespace carbondac {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Shortest round-trip decimal representation; stable across runs.
std::string format_double(double value);

}  // namespace carbondac

#endif  // CARBONDAC_IO_HPP_
