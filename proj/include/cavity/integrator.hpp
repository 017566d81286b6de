#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cavity/dop853_tableau.hpp"
#include "cavity/dynamics.hpp"

namespace cavity {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    /// 0 selects 0.05 / sqrt(n_max + 1) from the system's largest photon number.
    double max_step = 0.0;
    double t_max = 1e3;

    void validate() const;
    double max_step_for(const System& system) const;
};

/// Drift above which conservation is flagged (not fatal) in results.
inline constexpr double kConservationWarning = 1e-6;

enum class Direction { Rising, Falling, Any };

struct EventSpec {
    std::function<double(double t, const Vector& y)> g;
    Direction direction = Direction::Any;
    bool terminal = false;
};

/// Embedded Dormand-Prince 8(5,3) stepper with 7th-order dense output.
class Dop853 {
public:
    using Rhs = std::function<void(double, const Vector&, Vector&)>;

    Dop853(Rhs rhs, Eigen::Index dim, double rel_tol, double abs_tol, double max_step);

    /// Restart from (t, y); keeps the current step-size estimate if one exists.
    void reset(double t, const Vector& y);

    enum class Status { Ok, StepUnderflow, NonFinite };
    /// One accepted step that does not pass t_limit.
    Status step(double t_limit);

    double t() const { return t_; }
    const Vector& y() const { return y_; }
    double t_prev() const { return t_prev_; }
    const Vector& y_prev() const { return y_prev_; }
    double last_step() const { return t_ - t_prev_; }
    std::size_t rhs_evaluations() const { return nfev_; }

    /// Dense-output value inside the last accepted step.
    void dense(double t, Vector& out);
    Vector dense(double t);

private:
    void prepare_dense();
    double initial_step();

    Rhs rhs_;
    double rel_tol_;
    double abs_tol_;
    double max_step_;

    double t_ = 0.0;
    double t_prev_ = 0.0;
    double h_ = 0.0;
    Vector y_, y_prev_, f_, y_new_, f_new_, tmp_, scale_;
    std::array<Vector, dop853::kStagesExtended> k_;
    std::array<Vector, dop853::kInterpolatorPower> coeff_;
    bool dense_ready_ = false;
    std::size_t nfev_ = 0;
};

/// Bisection-safeguarded secant root of g on [t_lo, t_hi]; g(t_lo) and g(t_hi)
/// must have opposite signs (or one of them be zero). Converges to |dt| < tol.
double locate_root(const std::function<double(double)>& g, double t_lo, double t_hi, double tol = 1e-13);

/// Root of an event on the dense interpolant of the stepper's last step.
double locate_event(Dop853& stepper, const EventSpec& event, double t_lo, double t_hi, double tol = 1e-13);

struct EventHit {
    double t = 0.0;
    Vector y;
    std::size_t event = 0;
};

enum class Termination { Horizon, TerminalEvent, StepUnderflow, NonFinite };

std::string to_string(Termination reason);

/// Which states to record.
struct SampleSpec {
    enum class Mode { Endpoints, EveryStep, Grid };
    Mode mode = Mode::Endpoints;
    std::vector<double> times;

    static SampleSpec endpoints() { return {}; }
    static SampleSpec every_step() { return {Mode::EveryStep, {}}; }
    static SampleSpec grid(std::vector<double> times) { return {Mode::Grid, std::move(times)}; }
    /// Uniform grid t0, t0 + dt, ..., <= t1.
    static SampleSpec uniform(double t0, double t1, double dt);
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vector> y;
    std::vector<EventHit> events;
    Termination reason = Termination::Horizon;
    std::size_t steps = 0;
    int first_photon = 0;

    bool ok() const { return reason == Termination::Horizon || reason == Termination::TerminalEvent; }
    HybridState state(std::size_t i) const { return HybridState(y[i], first_photon); }
    const Vector& final() const { return y.back(); }
};

/// Integrate `system` from `init` over [0, config.t_max]. Events are checked on
/// every accepted step, located on the dense interpolant, reported in time
/// order, and stop the run when terminal.
Trajectory integrate(const System& system, const HybridState& init, const IntegratorConfig& config,
                     std::span<const EventSpec> events = {}, const SampleSpec& samples = SampleSpec::endpoints());

struct ConservationReport {
    double energy = 0.0;       ///< max |W(t) - W(0)|
    double max_norm = 0.0;     ///< max over t and n of |R_n(t) - R_n(0)|
    double total_norm = 0.0;   ///< max |sum R_n(t) - sum R_n(0)|

    double worst() const { return std::max({energy, max_norm, total_norm}); }
    bool flagged() const { return worst() > kConservationWarning; }
};

/// Drift of the integrals of motion along the recorded samples. For the
/// motionless system the energy uses the frozen-amplitude form.
ConservationReport conservation_report(const Trajectory& trajectory, const System& system);

}  // namespace cavity
