#include "cavity/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/QR>

#include "cavity/parallel.hpp"

namespace cavity {

void CavityGeometry::validate() const
{
    if (!(x_left < 0.0 && 0.0 < x_right)) throw std::invalid_argument("detectors must satisfy x_left < 0 < x_right");
    if (!(x_left < central_node && central_node < x_right))
        throw std::invalid_argument("central node must lie strictly inside the cavity");
}

std::string to_string(Detector d)
{
    switch (d) {
    case Detector::Left: return "left";
    case Detector::Right: return "right";
    case Detector::None: return "none";
    }
    return "none";
}

Detector detector_from_string(const std::string& s)
{
    if (s == "left") return Detector::Left;
    if (s == "right") return Detector::Right;
    if (s == "none") return Detector::None;
    throw std::invalid_argument("unknown detector '" + s + "'");
}

namespace {

constexpr std::size_t kLeftEvent = 0;
constexpr std::size_t kRightEvent = 1;
constexpr std::size_t kNodeEvent = 2;
constexpr double kGrazingMomentum = 1e-12;

double integrals_drift(const HybridState& a, const HybridState& b, const ModelParams& params)
{
    const BlochNorms ra = bloch_norms(a);
    const BlochNorms rb = bloch_norms(b);
    return std::max({std::abs(energy_integral(a, params) - energy_integral(b, params)),
                     (ra.per_triple - rb.per_triple).abs().maxCoeff(), std::abs(ra.total - rb.total)});
}

}  // namespace

ExitRecord exit_trajectory(const Scenario& scenario, double p0, const ScanOptions& options)
{
    const CavityGeometry& geo = options.geometry;
    Scenario s = scenario;
    s.p0 = p0;
    s.x0 = 0.0;

    const double x_left = geo.x_left;
    const double x_right = geo.x_right;
    const double node = geo.central_node;
    const EventSpec events[] = {
        {[x_left](double, const Vector& y) { return y[0] - x_left; }, Direction::Falling, true},
        {[x_right](double, const Vector& y) { return y[0] - x_right; }, Direction::Rising, true},
        {[node](double, const Vector& y) { return y[0] - node; }, Direction::Any, false},
    };

    IntegratorConfig cfg = options.integrator;
    cfg.t_max = options.t_max;
    const HybridState init = s.initial_state();
    const Trajectory tr = integrate(s.system(), init, cfg, events);

    ExitRecord rec;
    rec.p0 = p0;
    bool last_grazing = false;
    for (const auto& hit : tr.events) {
        if (hit.event != kNodeEvent) continue;
        // A grazing touch can register as a pair of sign changes; count it once.
        const bool grazing = std::abs(hit.y[1]) <= kGrazingMomentum;
        if (!grazing || !last_grazing) ++rec.m;
        last_grazing = grazing;
    }

    if (!tr.ok()) {
        rec.failed = true;
        rec.exit_time = tr.t.back();
        rec.conservation_ok = false;
        return rec;
    }
    if (tr.reason == Termination::TerminalEvent) {
        const auto& hit = tr.events.back();
        rec.exit_time = hit.t;
        rec.detector = hit.event == kLeftEvent ? Detector::Left : Detector::Right;
    }
    else {
        rec.exit_time = options.t_max;
        rec.detector = Detector::None;
    }
    rec.conservation_ok = integrals_drift(init, tr.state(tr.y.size() - 1), s.params) <= kConservationWarning;
    return rec;
}

std::vector<ExitRecord> exit_scan(std::span<const double> p0_grid, const Scenario& scenario,
                                  const ScanOptions& options)
{
    if (p0_grid.empty()) throw std::invalid_argument("exit scan needs a non-empty p0 grid");
    if (!(options.t_max > 0.0)) throw std::invalid_argument("exit scan needs t_max > 0");
    options.geometry.validate();
    scenario.params.validate();

    std::vector<ExitRecord> records(p0_grid.size());
    parallel_for(p0_grid.size(), options.threads, [&](std::size_t i) {
        try {
            records[i] = exit_trajectory(scenario, p0_grid[i], options);
        }
        catch (const std::exception&) {
            records[i] = ExitRecord{p0_grid[i], 0.0, Detector::None, 0, false, true};
        }
    });
    return records;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t count)
{
    if (count == 0) throw std::invalid_argument("grid needs at least one point");
    std::vector<double> g(count);
    if (count == 1) {
        g[0] = lo;
        return g;
    }
    for (std::size_t i = 0; i < count; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

void ZoomConfig::validate() const
{
    if (resolution < 3) throw std::invalid_argument("zoom resolution must be at least 3");
    if (!(singular_factor > 0.0) || !(singular_floor > 0.0))
        throw std::invalid_argument("singularity threshold parameters must be positive");
}

std::size_t ZoomNode::singular_count() const
{
    return static_cast<std::size_t>(std::count(singular.begin(), singular.end(), true));
}

double ZoomNode::mean_exit_time() const
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.failed) continue;
        sum += r.exit_time;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double ZoomNode::singular_density() const
{
    const double width = interval.hi - interval.lo;
    return width > 0.0 ? static_cast<double>(unresolved.size()) / width : 0.0;
}

bool ZoomNode::smooth_except_borders(std::size_t margin) const
{
    if (records.empty()) return false;
    const double step = (interval.hi - interval.lo) / static_cast<double>(records.size() - 1);
    const double left_edge = interval.lo + static_cast<double>(margin) * step;
    const double right_edge = interval.hi - static_cast<double>(margin) * step;
    for (const auto& u : unresolved) {
        const bool at_left = u.hi <= left_edge + 0.5 * step;
        const bool at_right = u.lo >= right_edge - 0.5 * step;
        if (!at_left && !at_right) return false;
    }
    return true;
}

void classify_points(ZoomNode& node, const ZoomConfig& config)
{
    const auto& rec = node.records;
    const std::size_t n = rec.size();
    node.singular.assign(n, false);
    node.unresolved.clear();
    node.smooth.clear();
    if (n == 0) return;

    std::vector<double> window;
    for (std::size_t i = 0; i < n; ++i) {
        if (rec[i].failed) continue;
        const std::size_t a = i > config.median_half_window ? i - config.median_half_window : 0;
        const std::size_t b = std::min(n, i + config.median_half_window + 1);
        window.clear();
        for (std::size_t j = a; j < b; ++j)
            if (!rec[j].failed) window.push_back(rec[j].exit_time);
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        const double median = *mid;
        node.singular[i] = rec[i].trapped() ||
                           rec[i].exit_time > std::max(config.singular_factor * median, config.singular_floor);
    }

    // Gap i joins points i and i+1.
    std::vector<bool> gap(n > 0 ? n - 1 : 0, false);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto& l = rec[i];
        const auto& r = rec[i + 1];
        gap[i] = l.failed || r.failed || node.singular[i] || node.singular[i + 1] || l.m != r.m ||
                 l.detector != r.detector;
    }

    for (std::size_t i = 0; i < gap.size();) {
        if (!gap[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < gap.size() && gap[j + 1]) ++j;
        node.unresolved.push_back({rec[i].p0, rec[j + 1].p0});
        i = j + 1;
    }

    auto untouched = [&](std::size_t i) {
        return !node.singular[i] && !rec[i].failed && (i == 0 || !gap[i - 1]) && (i + 1 >= n || !gap[i]);
    };
    for (std::size_t i = 0; i < n;) {
        if (!untouched(i)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && untouched(j + 1)) ++j;
        if (j - i + 1 >= config.min_smooth_points) node.smooth.push_back({rec[i].p0, rec[j].p0});
        i = j + 1;
    }
}

ZoomNode scan_interval(Interval interval, int depth, const Scenario& scenario, const ScanOptions& options,
                       const ZoomConfig& config)
{
    config.validate();
    if (!(interval.hi > interval.lo)) throw std::invalid_argument("zoom interval needs hi > lo");
    ZoomNode node;
    node.interval = interval;
    node.resolution = config.resolution;
    node.depth = depth;
    const auto grid = uniform_grid(interval.lo, interval.hi, config.resolution);
    node.records = exit_scan(grid, scenario, options);
    classify_points(node, config);
    return node;
}

std::size_t class_switches(const ZoomNode& node, const Interval& zone)
{
    std::size_t count = 0;
    const auto& rec = node.records;
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        const ExitRecord& l = rec[i];
        const ExitRecord& r = rec[i + 1];
        if (l.p0 < zone.lo || r.p0 > zone.hi) continue;
        if (l.failed || r.failed || l.trapped() || r.trapped()) continue;
        if (l.m != r.m || l.detector != r.detector) ++count;
    }
    return count;
}

ZoomNode refine_interval(ZoomNode node, const Scenario& scenario, const ScanOptions& options,
                         const ZoomConfig& config, int max_depth)
{
    if (node.records.empty()) node = scan_interval(node.interval, node.depth, scenario, options, config);
    if (node.depth >= max_depth) return node;

    // Richest zones first; a plateau of trapped atoms has no switches and comes last.
    struct Ranked {
        Interval zone;
        std::size_t switches;
    };
    std::vector<Ranked> ranked;
    for (const Interval& u : node.unresolved) ranked.push_back({u, class_switches(node, u)});
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.switches != b.switches) return a.switches > b.switches;
        return (a.zone.hi - a.zone.lo) > (b.zone.hi - b.zone.lo);
    });
    std::vector<Interval> targets;
    for (const Ranked& r : ranked) targets.push_back(r.zone);
    if (targets.size() > config.max_children) targets.resize(config.max_children);
    std::sort(targets.begin(), targets.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });

    node.children.clear();
    for (const auto& t : targets) {
        if (!(t.hi > t.lo)) continue;
        ZoomNode child = scan_interval(t, node.depth + 1, scenario, options, config);
        node.children.push_back(refine_interval(std::move(child), scenario, options, config, max_depth));
    }
    return node;
}

std::vector<ZoomNode> zoom_chain(std::span<const Interval> chain, const Scenario& scenario,
                                 const ScanOptions& options, const ZoomConfig& config)
{
    std::vector<ZoomNode> levels;
    levels.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i)
        levels.push_back(scan_interval(chain[i], static_cast<int>(i), scenario, options, config));
    return levels;
}

Classification classify_trajectory(const ExitRecord& record)
{
    if (record.failed) return {Classification::Kind::Failed, record.m};
    if (record.trapped()) return {Classification::Kind::Trapped, record.m};
    return {Classification::Kind::MTrajectory, record.m};
}

double ExitPdf::center(std::size_t bin) const
{
    return scale == BinScale::Log ? std::sqrt(edges[bin] * edges[bin + 1]) : 0.5 * (edges[bin] + edges[bin + 1]);
}

ExitPdf exit_time_histogram(std::span<const ExitRecord> records, const BinSpec& spec)
{
    if (spec.bins == 0) throw std::invalid_argument("histogram needs at least one bin");
    ExitPdf pdf;
    pdf.scale = spec.scale;

    std::vector<double> times;
    for (const auto& r : records) {
        if (r.failed) {
            ++pdf.failed;
            continue;
        }
        ++pdf.total;
        if (r.trapped()) ++pdf.trapped;
        else times.push_back(r.exit_time);
    }
    if (times.empty()) throw std::invalid_argument("histogram needs at least one detected exit");

    const auto [tmin, tmax] = std::minmax_element(times.begin(), times.end());
    double lo = spec.lo.value_or(*tmin);
    double hi = spec.hi.value_or(*tmax);
    if (hi <= lo) hi = lo * (1.0 + 1e-9) + 1e-9;
    if (spec.scale == BinScale::Log && !(lo > 0.0)) throw std::invalid_argument("log bins need a positive lower edge");

    pdf.edges.resize(spec.bins + 1);
    for (std::size_t i = 0; i <= spec.bins; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(spec.bins);
        pdf.edges[i] = spec.scale == BinScale::Log ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)))
                                                   : lo + f * (hi - lo);
    }
    pdf.edges.front() = lo;
    pdf.edges.back() = hi;

    pdf.counts.assign(spec.bins, 0);
    for (double t : times) {
        if (t < lo) {
            ++pdf.underflow;
            continue;
        }
        if (t > hi) {
            ++pdf.overflow;
            continue;
        }
        // Last bin is closed on the right.
        auto it = std::upper_bound(pdf.edges.begin(), pdf.edges.end(), t);
        std::size_t bin = static_cast<std::size_t>(std::distance(pdf.edges.begin(), it)) - 1;
        bin = std::min(bin, spec.bins - 1);
        ++pdf.counts[bin];
    }

    pdf.mass.resize(spec.bins);
    pdf.density.resize(spec.bins);
    for (std::size_t i = 0; i < spec.bins; ++i) {
        pdf.mass[i] = static_cast<double>(pdf.counts[i]) / static_cast<double>(pdf.total);
        pdf.density[i] = pdf.mass[i] / (pdf.edges[i + 1] - pdf.edges[i]);
    }
    return pdf;
}

std::size_t pdf_peak(const ExitPdf& pdf)
{
    return static_cast<std::size_t>(
        std::distance(pdf.density.begin(), std::max_element(pdf.density.begin(), pdf.density.end())));
}

namespace {

TailFit fit_tail(const ExitPdf& pdf, double t_lo, double t_hi, bool log_abscissa)
{
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < pdf.counts.size(); ++i) {
        const double c = pdf.center(i);
        if (c < t_lo || c > t_hi || pdf.density[i] <= 0.0) continue;
        xs.push_back(log_abscissa ? std::log(c) : c);
        ys.push_back(std::log(pdf.density[i]));
    }
    if (xs.size() < 5)
        throw std::runtime_error("tail fit needs at least 5 non-empty bins in range, found " +
                                 std::to_string(xs.size()));

    Eigen::MatrixXd design(static_cast<Eigen::Index>(xs.size()), 2);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        design(static_cast<Eigen::Index>(i), 0) = xs[i];
        design(static_cast<Eigen::Index>(i), 1) = 1.0;
        rhs[static_cast<Eigen::Index>(i)] = ys[i];
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
    TailFit fit;
    fit.slope = coef[0];
    fit.intercept = coef[1];
    fit.residual = (design * coef - rhs).squaredNorm();
    fit.bins = xs.size();
    return fit;
}

}  // namespace

TailFit tail_exponent(const ExitPdf& pdf, double t_lo, double t_hi)
{
    return fit_tail(pdf, t_lo, t_hi, true);
}

TailFit exponential_tail_fit(const ExitPdf& pdf, double t_lo, double t_hi)
{
    return fit_tail(pdf, t_lo, t_hi, false);
}

}  // namespace cavity
