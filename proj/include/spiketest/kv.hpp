#pragma once

#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace spiketest {

// Flat `key = value` text: '#' comments, blank lines ignored, order kept.
std::vector<std::pair<std::string, std::string>> parse_kv_stream(std::istream& in);
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path);

std::string trim_copy(const std::string& s);

}  // namespace spiketest
