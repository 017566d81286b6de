#pragma once

#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavity/integrator.hpp"

namespace cavity {

/// Two standing-wave lengths: the atom enters at x = 0, detectors sit at the
/// nodes -pi/2 and 3pi/2, the central node is pi/2.
struct CavityGeometry {
    double x_left = -std::numbers::pi / 2.0;
    double x_right = 3.0 * std::numbers::pi / 2.0;
    double central_node = std::numbers::pi / 2.0;

    void validate() const;
};

enum class Detector { Left, Right, None };

std::string to_string(Detector d);
Detector detector_from_string(const std::string& s);

struct ExitRecord {
    double p0 = 0.0;
    double exit_time = 0.0;  ///< t_max for trapped atoms
    Detector detector = Detector::None;
    int m = 0;               ///< central-node crossings before detection
    bool conservation_ok = true;
    bool failed = false;     ///< integration broke down; the scan continues

    bool trapped() const { return detector == Detector::None && !failed; }
};

struct ScanOptions {
    CavityGeometry geometry;
    double t_max = 2e4;
    IntegratorConfig integrator;
    unsigned threads = 0;
};

/// One atom injected with momentum p0 (the scenario's p0 is overridden).
ExitRecord exit_trajectory(const Scenario& scenario, double p0, const ScanOptions& options);

std::vector<ExitRecord> exit_scan(std::span<const double> p0_grid, const Scenario& scenario,
                                  const ScanOptions& options);

/// Uniform grid of `count` points over [lo, hi] inclusive.
std::vector<double> uniform_grid(double lo, double hi, std::size_t count);

struct ZoomConfig {
    std::size_t resolution = 2000;
    std::size_t median_half_window = 25;
    double singular_factor = 10.0;  ///< T > factor * local median ...
    double singular_floor = 2000.0; ///< ... and T > floor marks a singular point
    std::size_t min_smooth_points = 5;
    std::size_t max_children = 4;   ///< unresolved sub-intervals refined per node

    void validate() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct ZoomNode {
    Interval interval;
    std::size_t resolution = 0;
    int depth = 0;
    std::vector<ExitRecord> records;
    std::vector<bool> singular;
    std::vector<Interval> unresolved;  ///< neighbours differ in m or detector, or touch a singular point
    std::vector<Interval> smooth;      ///< runs of at least min_smooth_points untouched points
    std::vector<ZoomNode> children;

    std::size_t singular_count() const;
    /// Mean exit time with trapped atoms censored at t_max.
    double mean_exit_time() const;
    /// Unresolved zones per unit p0. Each zone brackets at least one
    /// separatrix-like point, where T diverges between two m classes.
    double singular_density() const;
    /// True when every unresolved sub-interval lies within `margin` grid
    /// points of one of the two borders.
    bool smooth_except_borders(std::size_t margin) const;
};

/// Marks singular points, unresolved gaps and smooth runs of a scanned grid.
void classify_points(ZoomNode& node, const ZoomConfig& config);

/// Scans one interval at config.resolution points.
ZoomNode scan_interval(Interval interval, int depth, const Scenario& scenario, const ScanOptions& options,
                       const ZoomConfig& config);

/// Neighbouring pairs inside `zone` where two detected atoms differ in m or
/// detector. Trapped and failed points are skipped.
std::size_t class_switches(const ZoomNode& node, const Interval& zone);

/// Scans `node` if it has no records yet, then recursively rescans up to
/// max_children unresolved sub-intervals until max_depth. Zones with more
/// class switches go first, then wider ones.
ZoomNode refine_interval(ZoomNode node, const Scenario& scenario, const ScanOptions& options,
                         const ZoomConfig& config, int max_depth);

/// Scans each interval of an explicit magnification chain.
std::vector<ZoomNode> zoom_chain(std::span<const Interval> chain, const Scenario& scenario,
                                 const ScanOptions& options, const ZoomConfig& config);

struct Classification {
    enum class Kind { MTrajectory, Trapped, Failed };
    Kind kind = Kind::MTrajectory;
    int m = 0;
};

Classification classify_trajectory(const ExitRecord& record);

enum class BinScale { Linear, Log };

struct BinSpec {
    BinScale scale = BinScale::Log;
    std::size_t bins = 40;
    std::optional<double> lo;  ///< defaults to the smallest detected exit time
    std::optional<double> hi;  ///< defaults to the largest detected exit time
};

/// Exit-time histogram over detected atoms. Fractions are taken over all
/// non-failed records, so sum(mass) + underflow + overflow + trapped = 1.
struct ExitPdf {
    BinScale scale = BinScale::Log;
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> mass;
    std::vector<double> density;  ///< mass / bin width
    std::size_t total = 0;        ///< non-failed records
    std::size_t trapped = 0;
    std::size_t failed = 0;
    std::size_t underflow = 0;
    std::size_t overflow = 0;

    double trapped_fraction() const { return total ? static_cast<double>(trapped) / static_cast<double>(total) : 0.0; }
    double center(std::size_t bin) const;
};

ExitPdf exit_time_histogram(std::span<const ExitRecord> records, const BinSpec& spec);

/// Bin with the largest density.
std::size_t pdf_peak(const ExitPdf& pdf);

struct TailFit {
    double slope = 0.0;      ///< gamma for the power law, -rate for the exponential
    double intercept = 0.0;
    double residual = 0.0;   ///< sum of squared residuals of ln P
    std::size_t bins = 0;
};

/// Least-squares slope of ln P against ln T over bins centred in [t_lo, t_hi].
/// Throws std::runtime_error with fewer than five non-empty bins.
TailFit tail_exponent(const ExitPdf& pdf, double t_lo, double t_hi);

/// Least-squares fit of ln P against T over the same bins.
TailFit exponential_tail_fit(const ExitPdf& pdf, double t_lo, double t_hi);

}  // namespace cavity
