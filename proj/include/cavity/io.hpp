#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cavity/chaos.hpp"
#include "cavity/scattering.hpp"

namespace cavity::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

std::string artifact_version();

/// Shortest decimal form that reads back to the same double; nan, inf, -inf otherwise.
std::string format_double(double x);
/// Inverse of format_double. Throws std::invalid_argument on malformed input.
double parse_double(std::string_view text);

using Cell = std::variant<double, std::int64_t, std::string>;

/// Column-oriented result table, the common shape of every CSV output.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
    std::size_t column(std::string_view name) const;
};

/// Raw text cells as read back from CSV.
struct CsvData {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;
    double number(std::size_t row, std::string_view name) const;
    std::int64_t integer(std::size_t row, std::string_view name) const;
};

void write_csv(std::ostream& out, const Table& table);
CsvData read_csv(std::istream& in);

Json to_json(const Table& table);
Json to_json(double x);  ///< non-finite values become the strings nan, inf, -inf
double number_from_json(const Json& j);

Table records_table(std::span<const ExitRecord> records);
std::vector<ExitRecord> records_from_csv(const CsvData& csv);
std::vector<ExitRecord> records_from_json(const Json& j);

/// Long format: one row per cell with the two axis values and lambda.
Table grid_table(const GridMap& map);
GridMap grid_from_csv(const CsvData& csv, const AxisSpec& x_axis, const AxisSpec& y_axis);
/// Axis arrays plus a row-major value matrix (x index first).
Json grid_json(const GridMap& map);
GridMap grid_from_json(const Json& j);

Table pdf_table(const ExitPdf& pdf);
Table section_table(std::span<const SectionPoint> points);

/// Named columns of equal length.
Table series_table(std::span<const std::string> columns, std::span<const std::vector<double>> data);

/// Schema-versioned output document.
Json envelope(std::string_view experiment, const Json& parameters, std::string_view config_hash, Json data);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Writes through a temporary file in the same directory and renames, so a
/// failed run leaves no partial output. Throws std::runtime_error on I/O failure.
void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace cavity::io
