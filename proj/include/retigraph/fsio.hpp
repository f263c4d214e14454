#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace retigraph {

std::vector<uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

// Write via temp file + rename; failed runs never leave partial output behind.
void write_file_atomic(const std::string& path, const void* data, size_t size);
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace retigraph
