#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cavity/integrator.hpp"

namespace cavity {

struct LyapunovConfig {
    double d0 = 1e-8;              ///< separation restored after each renormalization
    double renorm_interval = 1.0;  ///< time between renormalizations
    double t_total = 2e4;          ///< averaging horizon
    double t_discard = -1.0;       ///< transient; negative selects 10% of t_total
    /// Separation growth (d / d0) within one interval that counts as overflow.
    double overflow_ratio = 1e6;
    int max_retries = 4;           ///< interval halvings allowed after an overflow

    void validate() const;
    double discard() const { return t_discard < 0.0 ? 0.1 * t_total : t_discard; }
};

struct LyapunovResult {
    double lambda = 0.0;
    double renorm_interval = 0.0;  ///< interval actually used
    int retries = 0;
    std::size_t renormalizations = 0;
    bool ok = false;
    std::string message;
};

/// Largest Lyapunov exponent by the two-trajectory (Benettin) method with the
/// Euclidean metric over the whole state vector.
LyapunovResult max_lyapunov(const System& system, const HybridState& init, const LyapunovConfig& config,
                            const IntegratorConfig& integrator = {});

enum class AxisScale { Linear, Log };

/// One axis of a parameter grid. Recognized names: delta, alpha, photons
/// (Fock photon number or mean photon number), p0, x0, z_in.
struct AxisSpec {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 1;
    AxisScale scale = AxisScale::Linear;

    void validate() const;
    double value(std::size_t i) const;
    std::vector<double> values() const;
};

/// Sets the scenario parameter named by an axis.
void apply_axis(Scenario& scenario, const std::string& name, double value);

/// values(i, j) belongs to (x_axis.value(i), y_axis.value(j)); missing cells are NaN.
struct GridMap {
    AxisSpec x_axis;
    AxisSpec y_axis;
    Eigen::MatrixXd values;
    std::map<std::string, std::string> metadata;
};

GridMap lyapunov_map(const AxisSpec& x_axis, const AxisSpec& y_axis, const Scenario& base,
                     const LyapunovConfig& config, const IntegratorConfig& integrator = {}, unsigned threads = 0);

struct SectionPoint {
    double x = 0.0;  ///< wrapped to [-pi, pi)
    double p = 0.0;
    std::size_t trajectory = 0;
};

double wrap_angle(double x);

/// Rising zero of sum_n v_n.
EventSpec default_section();

std::vector<SectionPoint> poincare_section(std::span<const HybridState> inits, const System& system, double t_max,
                                           const EventSpec& section, const IntegratorConfig& integrator = {},
                                           unsigned threads = 0);

/// Number of occupied cells of a bins x bins grid over [-pi, pi) x [p_lo, p_hi).
std::size_t box_count(std::span<const SectionPoint> points, std::size_t bins, double p_lo, double p_hi);

/// Inversion at tau_obs of a Fock(n) superposition atom for each z_in.
std::vector<double> zout_zin_scan(std::span<const double> z_in, const ModelParams& params, int photons, double x0,
                                  double p0, double tau_obs, const IntegratorConfig& integrator = {},
                                  unsigned threads = 0);

}  // namespace cavity
