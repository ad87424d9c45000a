#include "kelfi/io.hpp"

#include "kelfi/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace kelfi {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

bool CsvTable::operator==(const CsvTable& other) const {
    if (header != other.header || rows.rows() != other.rows.rows() || rows.cols() != other.rows.cols()) {
        return false;
    }
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
        const double a = rows.data()[i];
        const double b = other.rows.data()[i];
        if (std::isnan(a) && std::isnan(b)) continue;
        if (a != b) return false;
    }
    return true;
}

std::string format_double(double value) {
    if (!std::isfinite(value)) return "";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text) {
    if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) {
        throw IoError("csv: cannot parse number '" + text + "'");
    }
    return value;
}

std::string to_csv(const CsvTable& table) {
    if (table.rows.rows() > 0 && static_cast<std::size_t>(table.rows.cols()) != table.header.size()) {
        throw DimensionError("csv: header and column count differ");
    }
    std::string out;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (table.header[c].find_first_of(",\n\r") != std::string::npos) {
            throw IoError("csv: column names may not contain commas or newlines");
        }
        if (c) out += ',';
        out += table.header[c];
    }
    out += '\n';
    for (Eigen::Index r = 0; r < table.rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < table.rows.cols(); ++c) {
            if (c) out += ',';
            out += format_double(table.rows(r, c));
        }
        out += '\n';
    }
    return out;
}

CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvTable table;
    if (!std::getline(in, line)) throw IoError("csv: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.header = split_line(line);
    std::vector<std::vector<double>> records;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && table.header.size() > 1) continue;
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) throw IoError("csv: ragged row");
        std::vector<double> rec;
        rec.reserve(cells.size());
        for (const auto& cell : cells) rec.push_back(parse_double(cell));
        records.push_back(std::move(rec));
    }
    table.rows.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t r = 0; r < records.size(); ++r) {
        for (std::size_t c = 0; c < records[r].size(); ++c) {
            table.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = records[r][c];
        }
    }
    return table;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text(path, to_csv(table)); }

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    write_text(path, value.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

CsvTable points_table(const PointSet& points, std::vector<std::string> names) {
    if (names.size() != static_cast<std::size_t>(points.rows())) {
        throw DimensionError("points_table: one name per coordinate required");
    }
    return CsvTable{std::move(names), points.transpose()};
}

PointSet table_points(const CsvTable& table) { return table.rows.transpose(); }

}  // namespace kelfi
