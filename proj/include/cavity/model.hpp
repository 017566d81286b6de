#pragma once

#include <complex>
#include <cstddef>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace cavity {

using Vector = Eigen::VectorXd;

/// Control parameters of the atom-field system in units of the vacuum Rabi
/// frequency: detuning `delta` and recoil frequency `alpha`.
struct ModelParams {
    double delta = 0.0;
    double alpha = 1e-3;

    void validate() const;
};

/// Largest probability mass a truncated photon ladder may discard.
inline constexpr double kTruncationTail = 1e-12;

struct BlochTriple {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;

    double norm() const;
};

// Field preparations.
struct Fock {
    int photons = 0;
};
struct Coherent {
    double mean = 0.0;
};
struct BoseEinstein {
    double mean = 0.0;
};
using FieldPreparation = std::variant<Fock, Coherent, BoseEinstein>;

// Atom preparations. A superposition with inversion z_in puts (1+z_in)/2 in
// the excited level and (1-z_in)/2 in the ground level with no coherence.
struct Excited {};
struct Superposition {
    double z_in = 0.0;
};
using AtomPreparation = std::variant<Excited, Superposition>;

void validate(const FieldPreparation& field);
void validate(const AtomPreparation& atom);

/// Probability of n photons in the prepared field.
double photon_probability(const FieldPreparation& field, int n);

/// Probability mass above photon number n_max.
double truncation_tail(const FieldPreparation& field, int n_max);

/// Smallest n_max whose truncation tail is below kTruncationTail (the Fock
/// photon number for Fock fields).
int default_truncation(const FieldPreparation& field);

/// State of the hybrid system stored as one flat vector
///   [x, p, u_0, v_0, z_0, u_1, v_1, z_1, ...].
/// Triple k couples |2, n> and |1, n+1> with n = first_photon + k, so a full
/// ladder has first_photon = 0 and the reduced Fock system a window of two
/// triples starting at n-1.
class HybridState {
public:
    HybridState() = default;
    HybridState(std::size_t triples, int first_photon = 0);
    HybridState(Vector data, int first_photon);

    double& x() { return data_[0]; }
    double x() const { return data_[0]; }
    double& p() { return data_[1]; }
    double p() const { return data_[1]; }

    double& u(std::size_t k) { return data_[2 + 3 * k]; }
    double u(std::size_t k) const { return data_[2 + 3 * k]; }
    double& v(std::size_t k) { return data_[3 + 3 * k]; }
    double v(std::size_t k) const { return data_[3 + 3 * k]; }
    double& z(std::size_t k) { return data_[4 + 3 * k]; }
    double z(std::size_t k) const { return data_[4 + 3 * k]; }

    BlochTriple triple(std::size_t k) const { return {u(k), v(k), z(k)}; }
    void set_triple(std::size_t k, const BlochTriple& t);

    /// Ladder viewed as a 3 x triples matrix with rows (u, v, z).
    auto ladder() { return Eigen::Map<Eigen::Matrix<double, 3, Eigen::Dynamic>>(data_.data() + 2, 3, triples()); }
    auto ladder() const
    {
        return Eigen::Map<const Eigen::Matrix<double, 3, Eigen::Dynamic>>(data_.data() + 2, 3, triples());
    }

    std::size_t triples() const { return data_.size() < 2 ? 0 : (data_.size() - 2) / 3; }
    int first_photon() const { return first_photon_; }
    int photon_number(std::size_t k) const { return first_photon_ + static_cast<int>(k); }

    const Vector& data() const { return data_; }
    Vector& data() { return data_; }

private:
    Vector data_ = Vector::Zero(2);
    int first_photon_ = 0;
};

/// sqrt(n + 1) for every triple of a ladder window.
Eigen::ArrayXd ladder_couplings(int first_photon, std::size_t triples);

BlochTriple bloch_from_amplitudes(std::complex<double> a, std::complex<double> b);

/// Full ladder 0..n_max.
HybridState prepare_initial_state(const FieldPreparation& field, const AtomPreparation& atom, double x0, double p0,
                                  int n_max);

/// Two-triple window {n-1, n} of a Fock(n) preparation (one triple when n = 0).
HybridState prepare_fock_window(int photons, const AtomPreparation& atom, double x0, double p0);

double population_inversion(const HybridState& state);

double energy_integral(const HybridState& state, const ModelParams& params);

struct BlochNorms {
    Eigen::ArrayXd per_triple;
    double total = 0.0;
};

BlochNorms bloch_norms(const HybridState& state);

}  // namespace cavity
