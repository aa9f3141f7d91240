#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace phi4::io {

/// Fixed-format float printing so repeated runs emit byte-identical files.
std::string format_double(double v);

struct CsvWriter {
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(std::vector<std::string> cells);
    void write(const std::string& path) const;
    std::string to_string() const;

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes the manifest JSON (config echo, seeds, provenance) next to the CSV.
void write_manifest(const std::string& path, const nlohmann::json& manifest);

}  // namespace phi4::io
