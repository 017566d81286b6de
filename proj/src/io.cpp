#include "cavity/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <openssl/evp.h>

#ifndef CAVITY_VERSION
#define CAVITY_VERSION "0.0.0"
#endif

namespace cavity::io {

std::string artifact_version()
{
    return CAVITY_VERSION;
}

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    return x;
}

void Table::add_row(std::vector<Cell> row)
{
    if (row.size() != columns.size())
        throw std::invalid_argument("row has " + std::to_string(row.size()) + " cells, table has " +
                                    std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
}

namespace {

std::size_t find_column(const std::vector<std::string>& columns, std::string_view name)
{
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw std::out_of_range("no column '" + std::string(name) + "'");
}

std::string cell_text(const Cell& c)
{
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

}  // namespace

std::size_t Table::column(std::string_view name) const
{
    return find_column(columns, name);
}

std::size_t CsvData::column(std::string_view name) const
{
    return find_column(columns, name);
}

double CsvData::number(std::size_t row, std::string_view name) const
{
    return parse_double(rows.at(row).at(column(name)));
}

std::int64_t CsvData::integer(std::size_t row, std::string_view name) const
{
    const std::string& s = rows.at(row).at(column(name));
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not an integer: '" + s + "'");
    return v;
}

// Cells never contain commas or quotes, so no quoting is needed.
void write_csv(std::ostream& out, const Table& table)
{
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell_text(row[i]);
        out << '\n';
    }
}

CsvData read_csv(std::istream& in)
{
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    CsvData csv;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header row");
    csv.columns = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != csv.columns.size())
            throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(csv.columns.size()) + " cells, found " +
                                     std::to_string(cells.size()));
        csv.rows.push_back(std::move(cells));
    }
    return csv;
}

Json to_json(double x)
{
    if (std::isfinite(x)) return Json(x);
    return Json(format_double(x));
}

double number_from_json(const Json& j)
{
    if (j.is_string()) return parse_double(j.get<std::string>());
    return j.get<double>();
}

Json to_json(const Table& table)
{
    Json rows = Json::array();
    for (const auto& row : table.rows) {
        Json r = Json::array();
        for (const auto& c : row) {
            if (const auto* d = std::get_if<double>(&c)) r.push_back(to_json(*d));
            else if (const auto* i = std::get_if<std::int64_t>(&c)) r.push_back(*i);
            else r.push_back(std::get<std::string>(c));
        }
        rows.push_back(std::move(r));
    }
    return Json{{"columns", table.columns}, {"rows", std::move(rows)}};
}

Table records_table(std::span<const ExitRecord> records)
{
    Table t{{"p0", "exit_time", "detector", "m", "trapped", "conservation_ok", "failed"}, {}};
    for (const auto& r : records)
        t.add_row({r.p0, r.exit_time, to_string(r.detector), std::int64_t{r.m}, std::int64_t{r.trapped()},
                   std::int64_t{r.conservation_ok}, std::int64_t{r.failed}});
    return t;
}

std::vector<ExitRecord> records_from_csv(const CsvData& csv)
{
    std::vector<ExitRecord> out;
    const std::size_t det = csv.column("detector");
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        ExitRecord r;
        r.p0 = csv.number(i, "p0");
        r.exit_time = csv.number(i, "exit_time");
        r.detector = detector_from_string(csv.rows[i][det]);
        r.m = static_cast<int>(csv.integer(i, "m"));
        r.conservation_ok = csv.integer(i, "conservation_ok") != 0;
        r.failed = csv.integer(i, "failed") != 0;
        out.push_back(r);
    }
    return out;
}

std::vector<ExitRecord> records_from_json(const Json& j)
{
    const auto& cols = j.at("columns");
    auto idx = [&cols](const char* name) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i;
        throw std::out_of_range(std::string("no column '") + name + "'");
    };
    const std::size_t ip = idx("p0"), it = idx("exit_time"), id = idx("detector"), im = idx("m"),
                      ic = idx("conservation_ok"), iff = idx("failed");
    std::vector<ExitRecord> out;
    for (const auto& row : j.at("rows")) {
        ExitRecord r;
        r.p0 = number_from_json(row.at(ip));
        r.exit_time = number_from_json(row.at(it));
        r.detector = detector_from_string(row.at(id).get<std::string>());
        r.m = row.at(im).get<int>();
        r.conservation_ok = row.at(ic).get<int>() != 0;
        r.failed = row.at(iff).get<int>() != 0;
        out.push_back(r);
    }
    return out;
}

Table grid_table(const GridMap& map)
{
    Table t{{map.x_axis.name, map.y_axis.name, "lambda"}, {}};
    for (Eigen::Index i = 0; i < map.values.rows(); ++i)
        for (Eigen::Index j = 0; j < map.values.cols(); ++j)
            t.add_row({map.x_axis.value(static_cast<std::size_t>(i)), map.y_axis.value(static_cast<std::size_t>(j)),
                       map.values(i, j)});
    return t;
}

GridMap grid_from_csv(const CsvData& csv, const AxisSpec& x_axis, const AxisSpec& y_axis)
{
    if (csv.rows.size() != x_axis.count * y_axis.count)
        throw std::runtime_error("grid csv has " + std::to_string(csv.rows.size()) + " rows, expected " +
                                 std::to_string(x_axis.count * y_axis.count));
    GridMap map{x_axis, y_axis,
                Eigen::MatrixXd(static_cast<Eigen::Index>(x_axis.count), static_cast<Eigen::Index>(y_axis.count)),
                {}};
    for (std::size_t r = 0; r < csv.rows.size(); ++r)
        map.values(static_cast<Eigen::Index>(r / y_axis.count), static_cast<Eigen::Index>(r % y_axis.count)) =
            csv.number(r, "lambda");
    return map;
}

namespace {

Json axis_json(const AxisSpec& a)
{
    Json values = Json::array();
    for (double v : a.values()) values.push_back(to_json(v));
    return Json{{"name", a.name},
                {"min", to_json(a.min)},
                {"max", to_json(a.max)},
                {"count", a.count},
                {"scale", a.scale == AxisScale::Log ? "log" : "linear"},
                {"values", std::move(values)}};
}

AxisSpec axis_from_json(const Json& j)
{
    AxisSpec a;
    a.name = j.at("name").get<std::string>();
    a.min = number_from_json(j.at("min"));
    a.max = number_from_json(j.at("max"));
    a.count = j.at("count").get<std::size_t>();
    a.scale = j.at("scale").get<std::string>() == "log" ? AxisScale::Log : AxisScale::Linear;
    return a;
}

}  // namespace

Json grid_json(const GridMap& map)
{
    Json values = Json::array();
    for (Eigen::Index i = 0; i < map.values.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < map.values.cols(); ++j) row.push_back(to_json(map.values(i, j)));
        values.push_back(std::move(row));
    }
    Json meta = Json::object();
    for (const auto& [k, v] : map.metadata) meta[k] = v;
    return Json{{"x_axis", axis_json(map.x_axis)},
                {"y_axis", axis_json(map.y_axis)},
                {"values", std::move(values)},
                {"metadata", std::move(meta)}};
}

GridMap grid_from_json(const Json& j)
{
    GridMap map;
    map.x_axis = axis_from_json(j.at("x_axis"));
    map.y_axis = axis_from_json(j.at("y_axis"));
    const auto& values = j.at("values");
    map.values.resize(static_cast<Eigen::Index>(map.x_axis.count), static_cast<Eigen::Index>(map.y_axis.count));
    if (values.size() != map.x_axis.count) throw std::runtime_error("grid json: value rows do not match x axis");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != map.y_axis.count) throw std::runtime_error("grid json: value row length mismatch");
        for (std::size_t k = 0; k < values[i].size(); ++k)
            map.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = number_from_json(values[i][k]);
    }
    if (j.contains("metadata"))
        for (const auto& [k, v] : j.at("metadata").items()) map.metadata[k] = v.get<std::string>();
    return map;
}

Table pdf_table(const ExitPdf& pdf)
{
    Table t{{"t_lo", "t_hi", "t_center", "count", "mass", "density"}, {}};
    for (std::size_t i = 0; i < pdf.counts.size(); ++i)
        t.add_row({pdf.edges[i], pdf.edges[i + 1], pdf.center(i), static_cast<std::int64_t>(pdf.counts[i]),
                   pdf.mass[i], pdf.density[i]});
    return t;
}

Table section_table(std::span<const SectionPoint> points)
{
    Table t{{"trajectory", "x", "p"}, {}};
    for (const auto& pt : points) t.add_row({static_cast<std::int64_t>(pt.trajectory), pt.x, pt.p});
    return t;
}

Table series_table(std::span<const std::string> columns, std::span<const std::vector<double>> data)
{
    if (columns.size() != data.size()) throw std::invalid_argument("series: column names and data differ in count");
    Table t{{columns.begin(), columns.end()}, {}};
    const std::size_t n = data.empty() ? 0 : data[0].size();
    for (const auto& d : data)
        if (d.size() != n) throw std::invalid_argument("series: columns differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Cell> row;
        for (const auto& d : data) row.emplace_back(d[i]);
        t.add_row(std::move(row));
    }
    return t;
}

Json envelope(std::string_view experiment, const Json& parameters, std::string_view config_hash, Json data)
{
    return Json{{"schema_version", kSchemaVersion},
                {"artifact", "cavity-chaos"},
                {"artifact_version", artifact_version()},
                {"experiment", experiment},
                {"config_hash", config_hash},
                {"parameters", parameters},
                {"data", std::move(data)}};
}

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void write_file(const std::filesystem::path& path, std::string_view content)
{
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place at '" + path.string() + "'");
    }
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cavity::io
