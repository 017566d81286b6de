#include "cavity/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cavity {

namespace {

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;
constexpr double kErrorExponent = -1.0 / 8.0;

double rms_norm(const Vector& v)
{
    return v.norm() / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

void IntegratorConfig::validate() const
{
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("integrator tolerances must be positive");
    if (!(t_max > 0.0)) throw std::invalid_argument("integration horizon t_max must be positive");
    if (max_step < 0.0) throw std::invalid_argument("max_step must be >= 0 (0 selects the default)");
}

double IntegratorConfig::max_step_for(const System& system) const
{
    if (max_step > 0.0) return max_step;
    return 0.05 / std::sqrt(system.max_photon() + 1.0);
}

Dop853::Dop853(Rhs rhs, Eigen::Index dim, double rel_tol, double abs_tol, double max_step)
    : rhs_(std::move(rhs)), rel_tol_(rel_tol), abs_tol_(abs_tol), max_step_(max_step)
{
    for (Vector* v : {&y_, &y_prev_, &f_, &y_new_, &f_new_, &tmp_, &scale_}) v->setZero(dim);
    for (auto& k : k_) k.setZero(dim);
    for (auto& c : coeff_) c.setZero(dim);
}

void Dop853::reset(double t, const Vector& y)
{
    t_ = t;
    t_prev_ = t;
    y_ = y;
    y_prev_ = y;
    rhs_(t_, y_, f_);
    ++nfev_;
    dense_ready_ = false;
    if (h_ <= 0.0) h_ = initial_step();
}

double Dop853::initial_step()
{
    scale_ = abs_tol_ + y_.array().abs() * rel_tol_;
    const double d0 = rms_norm((y_.array() / scale_.array()).matrix());
    const double d1 = rms_norm((f_.array() / scale_.array()).matrix());
    const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    tmp_ = y_ + h0 * f_;
    rhs_(t_ + h0, tmp_, f_new_);
    ++nfev_;
    const double d2 = rms_norm(((f_new_ - f_).array() / scale_.array()).matrix()) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                 : std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    return std::min({100.0 * h0, h1, max_step_});
}

Dop853::Status Dop853::step(double t_limit)
{
    using namespace dop853;
    if (!y_.allFinite() || !f_.allFinite()) return Status::NonFinite;
    dense_ready_ = false;

    const double min_step = 10.0 * std::abs(std::nextafter(t_, std::numeric_limits<double>::infinity()) - t_);
    double h_abs = std::min(h_, max_step_);
    bool rejected = false;

    for (;;) {
        if (h_abs < min_step) return Status::StepUnderflow;
        double t_new = t_ + h_abs;
        if (t_new > t_limit) t_new = t_limit;
        const double h = t_new - t_;

        k_[0] = f_;
        for (int s = 1; s < kStages; ++s) {
            tmp_ = y_;
            for (int j = 0; j < s; ++j)
                if (A[s][j] != 0.0) tmp_.noalias() += (h * A[s][j]) * k_[j];
            rhs_(t_ + C[s] * h, tmp_, k_[s]);
        }
        y_new_ = y_;
        for (int j = 0; j < kStages; ++j)
            if (B[j] != 0.0) y_new_.noalias() += (h * B[j]) * k_[j];
        rhs_(t_new, y_new_, f_new_);
        k_[kStages] = f_new_;
        nfev_ += kStages;

        if (!y_new_.allFinite() || !f_new_.allFinite()) {
            if (h_abs <= min_step) return Status::NonFinite;
            h_abs *= kMinFactor;
            rejected = true;
            continue;
        }

        scale_ = abs_tol_ + y_.array().abs().max(y_new_.array().abs()) * rel_tol_;
        Vector& err5 = tmp_;
        err5.setZero();
        Vector& err3 = coeff_[0];
        err3.setZero();
        for (int j = 0; j <= kStages; ++j) {
            if (E5[j] != 0.0) err5.noalias() += E5[j] * k_[j];
            if (E3[j] != 0.0) err3.noalias() += E3[j] * k_[j];
        }
        const double e5 = (err5.array() / scale_.array()).matrix().squaredNorm();
        const double e3 = (err3.array() / scale_.array()).matrix().squaredNorm();
        double error = 0.0;
        if (e5 > 0.0 || e3 > 0.0)
            error = std::abs(h) * e5 / std::sqrt((e5 + 0.01 * e3) * static_cast<double>(y_.size()));

        if (error < 1.0) {
            double factor = error == 0.0 ? kMaxFactor : std::min(kMaxFactor, kSafety * std::pow(error, kErrorExponent));
            if (rejected) factor = std::min(1.0, factor);
            // A step clipped by t_limit says nothing about the achievable step size.
            if (t_new == t_limit && h < h_abs) h_abs = std::max(h_abs, h * factor);
            else h_abs = h * factor;
            h_ = h_abs;

            t_prev_ = t_;
            y_prev_.swap(y_);
            y_.swap(y_new_);
            f_.swap(f_new_);
            t_ = t_new;
            dense_ready_ = false;
            return Status::Ok;
        }
        h_abs *= std::max(kMinFactor, kSafety * std::pow(error, kErrorExponent));
        rejected = true;
    }
}

void Dop853::prepare_dense()
{
    using namespace dop853;
    const double h = t_ - t_prev_;
    for (int s = kStages + 1; s < kStagesExtended; ++s) {
        tmp_ = y_prev_;
        for (int j = 0; j < s; ++j)
            if (A[s][j] != 0.0) tmp_.noalias() += (h * A[s][j]) * k_[j];
        rhs_(t_prev_ + C[s] * h, tmp_, k_[s]);
    }
    nfev_ += kStagesExtended - kStages - 1;

    // k_[0] is f at t_prev and k_[kStages] is f at t.
    coeff_[0] = y_ - y_prev_;
    coeff_[1] = h * k_[0] - coeff_[0];
    coeff_[2] = 2.0 * coeff_[0] - h * (k_[kStages] + k_[0]);
    for (int i = 0; i < kInterpolatorPower - 3; ++i) {
        Vector& c = coeff_[3 + i];
        c.setZero();
        for (int j = 0; j < kStagesExtended; ++j)
            if (D[i][j] != 0.0) c.noalias() += (h * D[i][j]) * k_[j];
    }
    dense_ready_ = true;
}

void Dop853::dense(double t, Vector& out)
{
    if (t == t_) {
        out = y_;
        return;
    }
    if (t == t_prev_) {
        out = y_prev_;
        return;
    }
    if (!dense_ready_) prepare_dense();
    const double x = (t - t_prev_) / (t_ - t_prev_);
    out.setZero(y_.size());
    for (int i = 0; i < dop853::kInterpolatorPower; ++i) {
        out += coeff_[dop853::kInterpolatorPower - 1 - i];
        out *= (i % 2 == 0) ? x : 1.0 - x;
    }
    out += y_prev_;
}

Vector Dop853::dense(double t)
{
    Vector out(y_.size());
    dense(t, out);
    return out;
}

double locate_root(const std::function<double(double)>& g, double t_lo, double t_hi, double tol)
{
    double g_lo = g(t_lo);
    double g_hi = g(t_hi);
    if (g_lo == 0.0) return t_lo;
    if (g_hi == 0.0) return t_hi;
    if (std::signbit(g_lo) == std::signbit(g_hi))
        throw std::invalid_argument("locate_root: event function does not change sign across the bracket");

    double width = t_hi - t_lo;
    bool bisect = false;
    for (int iter = 0; iter < 200 && t_hi - t_lo > tol; ++iter) {
        double t = bisect ? 0.5 * (t_lo + t_hi) : t_hi - g_hi * (t_hi - t_lo) / (g_hi - g_lo);
        if (!(t > t_lo && t < t_hi)) t = 0.5 * (t_lo + t_hi);
        const double gt = g(t);
        if (gt == 0.0) return t;
        if (std::signbit(gt) == std::signbit(g_lo)) {
            t_lo = t;
            g_lo = gt;
        }
        else {
            t_hi = t;
            g_hi = gt;
        }
        // Fall back to bisection whenever the secant fails to halve the bracket.
        const double new_width = t_hi - t_lo;
        bisect = new_width > 0.5 * width;
        width = new_width;
    }
    return std::abs(g_lo) < std::abs(g_hi) ? t_lo : t_hi;
}

double locate_event(Dop853& stepper, const EventSpec& event, double t_lo, double t_hi, double tol)
{
    Vector y(stepper.y().size());
    return locate_root(
        [&](double t) {
            stepper.dense(t, y);
            return event.g(t, y);
        },
        t_lo, t_hi, tol);
}

std::string to_string(Termination reason)
{
    switch (reason) {
    case Termination::Horizon: return "horizon";
    case Termination::TerminalEvent: return "terminal_event";
    case Termination::StepUnderflow: return "step_underflow";
    case Termination::NonFinite: return "non_finite";
    }
    return "unknown";
}

SampleSpec SampleSpec::uniform(double t0, double t1, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("sample spacing must be positive");
    std::vector<double> times;
    const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;
    times.reserve(count);
    for (std::size_t i = 0; i < count; ++i) times.push_back(t0 + static_cast<double>(i) * dt);
    return grid(std::move(times));
}

namespace {

bool crossed(Direction direction, double before, double after)
{
    const bool rising = before < 0.0 && after >= 0.0;
    const bool falling = before > 0.0 && after <= 0.0;
    switch (direction) {
    case Direction::Rising: return rising;
    case Direction::Falling: return falling;
    case Direction::Any: return rising || falling;
    }
    return false;
}

}  // namespace

Trajectory integrate(const System& system, const HybridState& init, const IntegratorConfig& config,
                     std::span<const EventSpec> events, const SampleSpec& samples)
{
    config.validate();
    if (static_cast<std::size_t>(init.data().size()) != system.dimension())
        throw std::invalid_argument("initial state does not match the system dimension");
    if (samples.mode == SampleSpec::Mode::Grid &&
        !std::is_sorted(samples.times.begin(), samples.times.end()))
        throw std::invalid_argument("sample times must be sorted");

    Trajectory out;
    out.first_photon = init.first_photon();

    Dop853 stepper([&system](double t, const Vector& y, Vector& dy) { system(t, y, dy); }, init.data().size(),
                   config.rel_tol, config.abs_tol, config.max_step_for(system));
    stepper.reset(0.0, init.data());

    std::vector<double> g_prev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = events[i].g(0.0, init.data());

    std::size_t next_sample = 0;
    auto emit_grid_until = [&](double t_end) {
        if (samples.mode != SampleSpec::Mode::Grid) return;
        while (next_sample < samples.times.size() && samples.times[next_sample] <= t_end) {
            const double ts = samples.times[next_sample++];
            if (ts < 0.0) continue;
            out.t.push_back(ts);
            out.y.push_back(stepper.dense(ts));
        }
    };

    if (samples.mode != SampleSpec::Mode::Grid) {
        out.t.push_back(0.0);
        out.y.push_back(init.data());
    }
    else {
        emit_grid_until(0.0);
    }

    struct Pending {
        double t;
        std::size_t event;
    };
    std::vector<Pending> pending;
    std::vector<double> g_new(events.size());

    while (stepper.t() < config.t_max) {
        const auto status = stepper.step(config.t_max);
        if (status != Dop853::Status::Ok) {
            out.reason = status == Dop853::Status::StepUnderflow ? Termination::StepUnderflow : Termination::NonFinite;
            break;
        }
        ++out.steps;
        const double t_lo = stepper.t_prev();
        const double t_hi = stepper.t();
        const double tol = std::max(1e-13, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(t_hi));

        pending.clear();
        for (std::size_t i = 0; i < events.size(); ++i) {
            g_new[i] = events[i].g(t_hi, stepper.y());
            if (crossed(events[i].direction, g_prev[i], g_new[i]))
                pending.push_back({locate_event(stepper, events[i], t_lo, t_hi, tol), i});
        }
        std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) { return a.t < b.t; });

        bool stop = false;
        double t_stop = t_hi;
        for (const auto& hit : pending) {
            out.events.push_back({hit.t, stepper.dense(hit.t), hit.event});
            if (events[hit.event].terminal) {
                stop = true;
                t_stop = hit.t;
                break;
            }
        }

        emit_grid_until(t_stop);
        if (stop) {
            out.reason = Termination::TerminalEvent;
            if (samples.mode != SampleSpec::Mode::Grid) {
                out.t.push_back(t_stop);
                out.y.push_back(out.events.back().y);
            }
            return out;
        }
        if (samples.mode == SampleSpec::Mode::EveryStep) {
            out.t.push_back(t_hi);
            out.y.push_back(stepper.y());
        }
        g_prev.swap(g_new);
    }

    if (samples.mode == SampleSpec::Mode::Endpoints) {
        out.t.push_back(stepper.t());
        out.y.push_back(stepper.y());
    }
    return out;
}

ConservationReport conservation_report(const Trajectory& trajectory, const System& system)
{
    ConservationReport report;
    if (trajectory.y.empty()) return report;

    auto energy = [&](const HybridState& s) {
        if (system.kind() != RhsKind::JaynesCummings) return energy_integral(s, system.params());
        const Eigen::ArrayXd c = ladder_couplings(s.first_photon(), s.triples());
        return system.mode_amplitude() * (c * s.ladder().row(0).transpose().array()).sum() -
               0.5 * system.params().delta * s.ladder().row(2).sum();
    };

    const HybridState s0 = trajectory.state(0);
    const double w0 = energy(s0);
    const BlochNorms r0 = bloch_norms(s0);
    for (std::size_t i = 1; i < trajectory.y.size(); ++i) {
        const HybridState s = trajectory.state(i);
        const BlochNorms r = bloch_norms(s);
        report.energy = std::max(report.energy, std::abs(energy(s) - w0));
        report.max_norm = std::max(report.max_norm, (r.per_triple - r0.per_triple).abs().maxCoeff());
        report.total_norm = std::max(report.total_norm, std::abs(r.total - r0.total));
    }
    return report;
}

}  // namespace cavity
