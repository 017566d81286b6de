#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cavity/chaos.hpp"
#include "cavity/io.hpp"
#include "cavity/scattering.hpp"

namespace cavity {

enum class ExperimentKind { Rabi, LyapMap, Poincare, ZoutZin, Fractal, ExitStats };

std::string to_string(ExperimentKind kind);
/// Throws std::invalid_argument for unknown names.
ExperimentKind experiment_from_string(std::string_view name);

enum class OutputFormat { Csv, Json };

/// Uniform grid of `count` points over [min, max].
struct RangeSpec {
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 1;

    std::vector<double> values() const { return uniform_grid(min, max, count); }
};

struct RabiSpec {
    enum class Motion { Hybrid, Static };
    Motion motion = Motion::Hybrid;
    double coupling = 1.0;  ///< mode function f for a motionless atom
    double t_end = 200.0;
    double dt = 0.05;
};

struct LyapMapSpec {
    AxisSpec x_axis;
    AxisSpec y_axis;
    LyapunovConfig lyapunov;
};

struct PoincareSpec {
    RangeSpec p0;
    double t_max = 2e3;
    std::size_t box_bins = 64;
};

struct ZoutZinSpec {
    double z_min = 0.9998;
    double z_max = 1.0;
    double z_step = 1e-5;
    double tau = 200.0;

    std::vector<double> values() const;
};

struct FractalSpec {
    RangeSpec p0;
    CavityGeometry geometry;
    double t_max = 2e4;
    ZoomConfig zoom;
    std::vector<Interval> chain;  ///< explicit magnification chain, scanned after the grid
    int max_depth = 0;            ///< automatic refinement depth below the grid
};

struct ExitStatsSpec {
    RangeSpec p0;
    CavityGeometry geometry;
    double t_max = 2e4;
    BinSpec bins;
    std::optional<Interval> fit;  ///< exit-time range of the tail fits
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Rabi;
    Scenario scenario;
    IntegratorConfig integrator;
    OutputFormat format = OutputFormat::Csv;
    std::optional<std::string> output_path;

    // Exactly the block matching `kind` is set.
    std::optional<RabiSpec> rabi;
    std::optional<LyapMapSpec> lyapmap;
    std::optional<PoincareSpec> poincare;
    std::optional<ZoutZinSpec> zoutzin;
    std::optional<FractalSpec> fractal;
    std::optional<ExitStatsSpec> exitstats;
};

/// Config error with source position. line and column are 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string source, int line, int column, std::string field, const std::string& message);

    const std::string& source() const { return source_; }
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& field() const { return field_; }

private:
    std::string source_;
    int line_;
    int column_;
    std::string field_;
};

/// Parses and validates YAML config text against the schema.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved parameters, defaults included; the output path is left out.
io::Json config_to_json(const ExperimentConfig& config);
/// SHA-256 of the canonical resolved parameters.
std::string config_hash(const ExperimentConfig& config);

/// Human-readable schema document generated from the validation table.
std::string schema_text();

}  // namespace cavity
