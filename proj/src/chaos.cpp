#include "cavity/chaos.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>

#include "cavity/parallel.hpp"

namespace cavity {

void LyapunovConfig::validate() const
{
    if (!(d0 > 0.0)) throw std::invalid_argument("lyapunov d0 must be positive");
    if (!(renorm_interval > 0.0)) throw std::invalid_argument("lyapunov renorm_interval must be positive");
    if (!(t_total > discard()) || discard() < 0.0)
        throw std::invalid_argument("lyapunov horizon must satisfy t_total > t_discard >= 0");
    if (!(overflow_ratio > 1.0)) throw std::invalid_argument("lyapunov overflow_ratio must exceed 1");
    if (max_retries < 0) throw std::invalid_argument("lyapunov max_retries must be >= 0");
}

namespace {

// Fixed deviation direction with incommensurate components.
Vector deviation_direction(Eigen::Index dim)
{
    Vector d(dim);
    for (Eigen::Index i = 0; i < dim; ++i) d[i] = std::sqrt(static_cast<double>(i) + 2.0);
    return d.normalized();
}

struct Attempt {
    double lambda = 0.0;
    std::size_t renormalizations = 0;
};

enum class AttemptFailure { Overflow, Integration };

std::optional<Attempt> benettin(const System& system, const HybridState& init, const LyapunovConfig& config,
                                const IntegratorConfig& integrator, double interval, AttemptFailure& failure)
{
    auto rhs = [&system](double t, const Vector& y, Vector& dy) { system(t, y, dy); };
    const double max_step = integrator.max_step_for(system);
    const Eigen::Index dim = init.data().size();
    Dop853 fiducial(rhs, dim, integrator.rel_tol, integrator.abs_tol, max_step);
    Dop853 shadow(rhs, dim, integrator.rel_tol, integrator.abs_tol, max_step);
    fiducial.reset(0.0, init.data());
    shadow.reset(0.0, init.data() + config.d0 * deviation_direction(dim));

    const double t_discard = config.discard();
    const auto intervals = static_cast<std::size_t>(std::ceil(config.t_total / interval - 1e-9));
    double log_sum = 0.0;
    double kept = 0.0;
    Attempt out;
    Vector separation(dim);

    auto advance = [](Dop853& s, double t) {
        while (s.t() < t)
            if (s.step(t) != Dop853::Status::Ok) return false;
        return true;
    };

    for (std::size_t k = 1; k <= intervals; ++k) {
        const double t_prev = static_cast<double>(k - 1) * interval;
        const double t = std::min(static_cast<double>(k) * interval, config.t_total);
        if (!advance(fiducial, t) || !advance(shadow, t)) {
            failure = AttemptFailure::Integration;
            return std::nullopt;
        }
        separation = shadow.y() - fiducial.y();
        const double d = separation.norm();
        if (!std::isfinite(d) || d > config.overflow_ratio * config.d0) {
            failure = AttemptFailure::Overflow;
            return std::nullopt;
        }
        if (d == 0.0) {
            failure = AttemptFailure::Integration;
            return std::nullopt;
        }
        if (t > t_discard) {
            log_sum += std::log(d / config.d0);
            kept += t - t_prev;
        }
        shadow.reset(t, fiducial.y() + (config.d0 / d) * separation);
        ++out.renormalizations;
    }
    out.lambda = log_sum / kept;
    return out;
}

}  // namespace

LyapunovResult max_lyapunov(const System& system, const HybridState& init, const LyapunovConfig& config,
                            const IntegratorConfig& integrator)
{
    config.validate();
    LyapunovResult result;
    double interval = config.renorm_interval;
    for (int retry = 0; retry <= config.max_retries; ++retry, interval *= 0.5) {
        AttemptFailure failure{};
        if (auto attempt = benettin(system, init, config, integrator, interval, failure)) {
            result.lambda = attempt->lambda;
            result.renormalizations = attempt->renormalizations;
            result.renorm_interval = interval;
            result.retries = retry;
            result.ok = true;
            return result;
        }
        if (failure == AttemptFailure::Integration) {
            result.message = "integration failed";
            break;
        }
        result.message = "separation overflow";
    }
    result.lambda = std::numeric_limits<double>::quiet_NaN();
    result.renorm_interval = interval;
    return result;
}

void AxisSpec::validate() const
{
    static const std::set<std::string> known{"delta", "alpha", "photons", "p0", "x0", "z_in"};
    if (!known.contains(name)) throw std::invalid_argument("unknown grid axis '" + name + "'");
    if (count == 0) throw std::invalid_argument("grid axis '" + name + "' needs at least one point");
    if (!std::isfinite(min) || !std::isfinite(max) || max < min)
        throw std::invalid_argument("grid axis '" + name + "' needs finite min <= max");
    if (scale == AxisScale::Log && !(min > 0.0))
        throw std::invalid_argument("log-scaled grid axis '" + name + "' needs min > 0");
}

double AxisSpec::value(std::size_t i) const
{
    if (count == 1 || i == 0) return min;
    if (i + 1 == count) return max;
    const double f = static_cast<double>(i) / static_cast<double>(count - 1);
    if (scale == AxisScale::Log) return std::exp(std::log(min) + f * (std::log(max) - std::log(min)));
    return min + f * (max - min);
}

std::vector<double> AxisSpec::values() const
{
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = value(i);
    return v;
}

void apply_axis(Scenario& scenario, const std::string& name, double value)
{
    if (name == "delta") scenario.params.delta = value;
    else if (name == "alpha") scenario.params.alpha = value;
    else if (name == "p0") scenario.p0 = value;
    else if (name == "x0") scenario.x0 = value;
    else if (name == "z_in") scenario.atom = Superposition{value};
    else if (name == "photons") {
        std::visit(
            [value](auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, Fock>) f.photons = static_cast<int>(std::lround(value));
                else f.mean = value;
            },
            scenario.field);
        if (!std::holds_alternative<Fock>(scenario.field)) scenario.n_max.reset();
    }
    else throw std::invalid_argument("unknown grid axis '" + name + "'");
}

GridMap lyapunov_map(const AxisSpec& x_axis, const AxisSpec& y_axis, const Scenario& base,
                     const LyapunovConfig& config, const IntegratorConfig& integrator, unsigned threads)
{
    x_axis.validate();
    y_axis.validate();
    config.validate();

    GridMap map{x_axis, y_axis, Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(x_axis.count),
                                                           static_cast<Eigen::Index>(y_axis.count),
                                                           std::numeric_limits<double>::quiet_NaN()),
                {}};
    std::vector<std::string> errors(x_axis.count * y_axis.count);

    parallel_for(x_axis.count * y_axis.count, threads, [&](std::size_t cell) {
        const std::size_t i = cell / y_axis.count;
        const std::size_t j = cell % y_axis.count;
        try {
            Scenario s = base;
            apply_axis(s, x_axis.name, x_axis.value(i));
            apply_axis(s, y_axis.name, y_axis.value(j));
            const LyapunovResult r = max_lyapunov(s.system(), s.initial_state(), config, integrator);
            if (r.ok) map.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.lambda;
            else errors[cell] = r.message;
        }
        catch (const std::exception& e) {
            errors[cell] = e.what();
        }
    });

    std::size_t missing = 0;
    for (const auto& e : errors)
        if (!e.empty()) ++missing;
    map.metadata["missing_cells"] = std::to_string(missing);
    return map;
}

double wrap_angle(double x)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(x + std::numbers::pi, two_pi);
    if (w < 0.0) w += two_pi;
    w -= std::numbers::pi;
    return w >= std::numbers::pi ? -std::numbers::pi : w;
}

EventSpec default_section()
{
    return {[](double, const Vector& y) {
                double s = 0.0;
                for (Eigen::Index i = 3; i < y.size(); i += 3) s += y[i];
                return s;
            },
            Direction::Rising, false};
}

std::vector<SectionPoint> poincare_section(std::span<const HybridState> inits, const System& system, double t_max,
                                           const EventSpec& section, const IntegratorConfig& integrator,
                                           unsigned threads)
{
    IntegratorConfig cfg = integrator;
    cfg.t_max = t_max;
    std::vector<std::vector<SectionPoint>> per_trajectory(inits.size());
    const EventSpec events[] = {EventSpec{section.g, section.direction, false}};

    parallel_for(inits.size(), threads, [&](std::size_t i) {
        const Trajectory tr = integrate(system, inits[i], cfg, events);
        for (const auto& hit : tr.events) per_trajectory[i].push_back({wrap_angle(hit.y[0]), hit.y[1], i});
    });

    std::vector<SectionPoint> out;
    for (auto& pts : per_trajectory) out.insert(out.end(), pts.begin(), pts.end());
    return out;
}

std::size_t box_count(std::span<const SectionPoint> points, std::size_t bins, double p_lo, double p_hi)
{
    if (bins == 0 || !(p_hi > p_lo)) throw std::invalid_argument("box_count needs bins > 0 and p_hi > p_lo");
    std::set<std::size_t> occupied;
    const double pi = std::numbers::pi;
    for (const auto& pt : points) {
        if (pt.p < p_lo || pt.p >= p_hi) continue;
        const auto ix = std::min(bins - 1, static_cast<std::size_t>((pt.x + pi) / (2.0 * pi) * static_cast<double>(bins)));
        const auto ip = std::min(bins - 1, static_cast<std::size_t>((pt.p - p_lo) / (p_hi - p_lo) * static_cast<double>(bins)));
        occupied.insert(ix * bins + ip);
    }
    return occupied.size();
}

std::vector<double> zout_zin_scan(std::span<const double> z_in, const ModelParams& params, int photons, double x0,
                                  double p0, double tau_obs, const IntegratorConfig& integrator, unsigned threads)
{
    if (!(tau_obs >= 0.0)) throw std::invalid_argument("observation time must be >= 0");
    const System system = System::fock(params, photons);
    std::vector<double> out(z_in.size());
    parallel_for(z_in.size(), threads, [&](std::size_t i) {
        const HybridState init = prepare_fock_window(photons, Superposition{z_in[i]}, x0, p0);
        if (tau_obs == 0.0) {
            out[i] = population_inversion(init);
            return;
        }
        IntegratorConfig cfg = integrator;
        cfg.t_max = tau_obs;
        const Trajectory tr = integrate(system, init, cfg);
        out[i] = tr.ok() ? population_inversion(tr.state(tr.y.size() - 1)) : std::numeric_limits<double>::quiet_NaN();
    });
    return out;
}

}  // namespace cavity
