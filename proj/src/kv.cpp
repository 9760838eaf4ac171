#include "spiketest/kv.hpp"

#include <fstream>

#include "spiketest/errors.hpp"

namespace spiketest {

std::string trim_copy(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::pair<std::string, std::string>> parse_kv_stream(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = trim_copy(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw InvalidConfigError("line " + std::to_string(lineno) +
                                     ": expected 'key = value'");
        const std::string key = trim_copy(trimmed.substr(0, eq));
        const std::string value = trim_copy(trimmed.substr(eq + 1));
        if (key.empty())
            throw InvalidConfigError("line " + std::to_string(lineno) + ": empty key");
        entries.emplace_back(key, value);
    }
    return entries;
}

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_kv_stream(in);
}

}  // namespace spiketest
