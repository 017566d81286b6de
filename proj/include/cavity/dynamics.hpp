#pragma once

#include <optional>
#include <span>

#include "cavity/model.hpp"

namespace cavity {

/// Which equations of motion drive a state.
enum class RhsKind {
    JaynesCummings,  ///< motionless atom, fixed mode amplitude f; (x, p) frozen
    HybridLadder,    ///< atom moving in the standing wave f(x) = -cos x, any ladder window
    FockReduced,     ///< two-triple window {n-1, n} of a Fock(n) field (one triple for n = 0)
};

// Right-hand sides. `y` and `dydt` use the HybridState flat layout.

/// Bloch-like ladder equations with a constant mode amplitude:
///   u' = delta v,  v' = -delta u - 2 sqrt(n+1) f z,  z' = 2 sqrt(n+1) f v.
/// Only the ladder part of `dydt` is written.
void rhs_jc(const ModelParams& params, double f, int first_photon, const Vector& y, Vector& dydt);
void rhs_jc(const ModelParams& params, double f, const Eigen::ArrayXd& couplings, const Vector& y, Vector& dydt);

/// Hamilton-Schrodinger equations of the hybrid system. `couplings` holds
/// sqrt(n+1) for each triple of the window (see ladder_couplings).
void rhs_hybrid(const ModelParams& params, const Eigen::ArrayXd& couplings, const Vector& y, Vector& dydt);
HybridState rhs_hybrid(const HybridState& state, const ModelParams& params);

/// Reduced 8-equation system for a Fock(n) field, written out term by term.
/// For n = 0 the state has 5 components and the n-1 block is absent.
void rhs_fock(const ModelParams& params, int photons, const Vector& y, Vector& dydt);
HybridState rhs_fock(const HybridState& state, const ModelParams& params, int photons);

/// An RHS bound to its parameters; callable as f(t, y, dydt).
class System {
public:
    static System jaynes_cummings(const ModelParams& params, double f, int first_photon, std::size_t triples);
    static System hybrid(const ModelParams& params, int first_photon, std::size_t triples);
    static System fock(const ModelParams& params, int photons);

    /// Picks FockReduced for a Fock window state, HybridLadder otherwise.
    static System for_state(const HybridState& state, const ModelParams& params, bool fock_reduced);

    void operator()(double t, const Vector& y, Vector& dydt) const;

    RhsKind kind() const { return kind_; }
    const ModelParams& params() const { return params_; }
    int first_photon() const { return first_photon_; }
    std::size_t triples() const { return static_cast<std::size_t>(couplings_.size()); }
    std::size_t dimension() const { return 2 + 3 * triples(); }
    /// Largest photon number reached by the window.
    int max_photon() const { return first_photon_ + static_cast<int>(triples()) - 1; }
    double mode_amplitude() const { return f_; }
    int photons() const { return photons_; }

private:
    RhsKind kind_ = RhsKind::HybridLadder;
    ModelParams params_;
    double f_ = 0.0;
    int first_photon_ = 0;
    int photons_ = 0;
    Eigen::ArrayXd couplings_;
};

/// Everything needed to start one trajectory: parameters, preparations and
/// the initial (x0, p0). Fock fields run on the reduced two-triple window
/// unless `reduce_fock` is false; other fields use the ladder 0..n_max with
/// n_max = default_truncation(field) when unset.
struct Scenario {
    ModelParams params;
    FieldPreparation field = Fock{10};
    AtomPreparation atom = Superposition{0.0};
    double x0 = 0.0;
    double p0 = 50.0;
    std::optional<int> n_max;
    bool reduce_fock = true;

    bool uses_fock_window() const { return reduce_fock && std::holds_alternative<Fock>(field); }
    int truncation() const;
    HybridState initial_state() const;
    System system() const;
};

// Closed forms.

/// n-photon Rabi frequency sqrt(delta^2 + 4 (n+1) f^2).
double rabi_frequency(int n, double delta, double f);

/// Inversion z(tau) of the motionless atom from an arbitrary initial ladder.
double jc_inversion_exact(const HybridState& initial, const ModelParams& params, double f, double tau);

/// Inversion at resonance for an atom started at x = 0 with u_n = v_n = 0:
///   z(tau) = sum z_n(0) cos(2 sqrt(n+1) sin(alpha p0 tau) / (alpha p0)).
/// `z0[k]` belongs to photon number first_photon + k. p0 = 0 falls back to the
/// motionless resonant solution.
double resonant_inversion_exact(std::span<const double> z0, int first_photon, double alpha, double p0, double tau);
double resonant_inversion_exact(const HybridState& initial, double alpha, double tau);

/// Exit time of a resonant atom injected at x = 0: 3 pi / (2 alpha p0) to the
/// right, pi / (2 alpha |p0|) to the left. Throws std::domain_error for p0 = 0.
double resonant_exit_time(double p0, double alpha);

/// tau_p = ln(delta_z / delta_z_in) / lambda.
double predictability_horizon(double lambda, double delta_z, double delta_z_in);

}  // namespace cavity
