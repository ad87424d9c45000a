#pragma once

#include "kelfi/kernels.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace kelfi {

/// Column-named numeric table. Non-finite cells are written empty and read
/// back as quiet NaN.
struct CsvTable {
    std::vector<std::string> header;
    Matrix rows;  // one row per record

    bool operator==(const CsvTable& other) const;
};

/// Shortest decimal that parses back to the same double ('.' separator).
std::string format_double(double value);
double parse_double(const std::string& text);

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

/// Columns of `points` become rows; names label the coordinates.
CsvTable points_table(const PointSet& points, std::vector<std::string> names);
PointSet table_points(const CsvTable& table);

}  // namespace kelfi
