#pragma once

#include "sgmp/types.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace sgmp::io {

// Creates dir and parents; no-op for an empty path.
void ensure_directory(const std::string& dir);

std::string join(const std::string& dir, const std::string& name);

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

// Shortest round-trip decimal form, so repeated runs give identical bytes.
std::string format_number(double x);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::size_t columns_;
    std::string path_;
};

} // namespace sgmp::io
