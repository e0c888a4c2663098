#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace idol::util {

// Raw little endian float32 array files. The build targets little endian
// hosts only, which is enforced at compile time in the implementation.
void write_f32_file(const std::string& path, const std::vector<float>& data);
std::vector<float> read_f32_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

std::uint64_t file_checksum(const std::string& path);

void ensure_dir(const std::string& path);
bool dir_is_empty_or_missing(const std::string& path);

} // namespace idol::util
