#include "cavity/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cavity {

namespace {

using LadderMap = Eigen::Map<Eigen::Matrix<double, 3, Eigen::Dynamic>>;
using ConstLadderMap = Eigen::Map<const Eigen::Matrix<double, 3, Eigen::Dynamic>>;

Eigen::Index triples_of(const Vector& y)
{
    return (y.size() - 2) / 3;
}

}  // namespace

void rhs_jc(const ModelParams& params, double f, int first_photon, const Vector& y, Vector& dydt)
{
    rhs_jc(params, f, ladder_couplings(first_photon, static_cast<std::size_t>(triples_of(y))), y, dydt);
}

void rhs_jc(const ModelParams& params, double f, const Eigen::ArrayXd& c, const Vector& y, Vector& dydt)
{
    const Eigen::Index k = c.size();
    ConstLadderMap in(y.data() + 2, 3, k);
    LadderMap out(dydt.data() + 2, 3, k);
    const double delta = params.delta;
    out.row(0) = delta * in.row(1);
    out.row(1) = -delta * in.row(0) - (2.0 * f * c.transpose() * in.row(2).array()).matrix();
    out.row(2) = (2.0 * f * c.transpose() * in.row(1).array()).matrix();
}

void rhs_hybrid(const ModelParams& params, const Eigen::ArrayXd& couplings, const Vector& y, Vector& dydt)
{
    const Eigen::Index k = couplings.size();
    ConstLadderMap in(y.data() + 2, 3, k);
    LadderMap out(dydt.data() + 2, 3, k);
    const double s = std::sin(y[0]);
    const double c = std::cos(y[0]);
    const double delta = params.delta;

    dydt[0] = params.alpha * y[1];
    dydt[1] = -(couplings.transpose() * in.row(0).array()).sum() * s;
    out.row(0) = delta * in.row(1);
    out.row(1) = -delta * in.row(0) + (2.0 * c * couplings.transpose() * in.row(2).array()).matrix();
    out.row(2) = (-2.0 * c * couplings.transpose() * in.row(1).array()).matrix();
}

HybridState rhs_hybrid(const HybridState& state, const ModelParams& params)
{
    Vector d(state.data().size());
    rhs_hybrid(params, ladder_couplings(state.first_photon(), state.triples()), state.data(), d);
    return HybridState(std::move(d), state.first_photon());
}

void rhs_fock(const ModelParams& params, int photons, const Vector& y, Vector& dydt)
{
    const double a = params.alpha;
    const double d = params.delta;
    const double s = std::sin(y[0]);
    const double c = std::cos(y[0]);
    const double rn1 = std::sqrt(photons + 1.0);

    if (photons == 0) {
        // x, p, u_0, v_0, z_0
        dydt[0] = a * y[1];
        dydt[1] = -rn1 * y[2] * s;
        dydt[2] = d * y[3];
        dydt[3] = -d * y[2] + 2.0 * rn1 * y[4] * c;
        dydt[4] = -2.0 * rn1 * y[3] * c;
        return;
    }

    // x, p, u_{n-1}, v_{n-1}, z_{n-1}, u_n, v_n, z_n
    const double rn = std::sqrt(static_cast<double>(photons));
    dydt[0] = a * y[1];
    dydt[1] = -(rn * y[2] + rn1 * y[5]) * s;
    dydt[2] = d * y[3];
    dydt[3] = -d * y[2] + 2.0 * rn * y[4] * c;
    dydt[4] = -2.0 * rn * y[3] * c;
    dydt[5] = d * y[6];
    dydt[6] = -d * y[5] + 2.0 * rn1 * y[7] * c;
    dydt[7] = -2.0 * rn1 * y[6] * c;
}

HybridState rhs_fock(const HybridState& state, const ModelParams& params, int photons)
{
    const std::size_t expected = photons == 0 ? 1 : 2;
    if (state.triples() != expected || state.first_photon() != std::max(photons - 1, 0))
        throw std::invalid_argument("state is not a Fock window for the given photon number");
    Vector d(state.data().size());
    rhs_fock(params, photons, state.data(), d);
    return HybridState(std::move(d), state.first_photon());
}

System System::jaynes_cummings(const ModelParams& params, double f, int first_photon, std::size_t triples)
{
    System s;
    s.kind_ = RhsKind::JaynesCummings;
    s.params_ = params;
    s.f_ = f;
    s.first_photon_ = first_photon;
    s.couplings_ = ladder_couplings(first_photon, triples);
    return s;
}

System System::hybrid(const ModelParams& params, int first_photon, std::size_t triples)
{
    params.validate();
    System s;
    s.kind_ = RhsKind::HybridLadder;
    s.params_ = params;
    s.first_photon_ = first_photon;
    s.couplings_ = ladder_couplings(first_photon, triples);
    return s;
}

System System::fock(const ModelParams& params, int photons)
{
    params.validate();
    if (photons < 0) throw std::invalid_argument("photon number must be >= 0");
    System s;
    s.kind_ = RhsKind::FockReduced;
    s.params_ = params;
    s.photons_ = photons;
    s.first_photon_ = std::max(photons - 1, 0);
    s.couplings_ = ladder_couplings(s.first_photon_, photons == 0 ? 1 : 2);
    return s;
}

System System::for_state(const HybridState& state, const ModelParams& params, bool fock_reduced)
{
    if (fock_reduced) {
        const int photons = state.triples() == 1 && state.first_photon() == 0 ? 0 : state.first_photon() + 1;
        const System s = fock(params, photons);
        if (s.triples() != state.triples() || s.first_photon() != state.first_photon())
            throw std::invalid_argument("state is not a Fock window");
        return s;
    }
    return hybrid(params, state.first_photon(), state.triples());
}

void System::operator()(double, const Vector& y, Vector& dydt) const
{
    switch (kind_) {
    case RhsKind::JaynesCummings:
        dydt[0] = 0.0;
        dydt[1] = 0.0;
        rhs_jc(params_, f_, couplings_, y, dydt);
        break;
    case RhsKind::HybridLadder:
        rhs_hybrid(params_, couplings_, y, dydt);
        break;
    case RhsKind::FockReduced:
        rhs_fock(params_, photons_, y, dydt);
        break;
    }
}

int Scenario::truncation() const
{
    return n_max ? *n_max : default_truncation(field);
}

HybridState Scenario::initial_state() const
{
    if (uses_fock_window()) return prepare_fock_window(std::get<Fock>(field).photons, atom, x0, p0);
    return prepare_initial_state(field, atom, x0, p0, truncation());
}

System Scenario::system() const
{
    if (uses_fock_window()) return System::fock(params, std::get<Fock>(field).photons);
    return System::hybrid(params, 0, static_cast<std::size_t>(truncation()) + 1);
}

double rabi_frequency(int n, double delta, double f)
{
    return std::sqrt(delta * delta + 4.0 * (n + 1.0) * f * f);
}

double jc_inversion_exact(const HybridState& initial, const ModelParams& params, double f, double tau)
{
    const double d = params.delta;
    double z = 0.0;
    for (std::size_t k = 0; k < initial.triples(); ++k) {
        const int n = initial.photon_number(k);
        const double omega = rabi_frequency(n, d, f);
        if (omega == 0.0) {
            z += initial.z(k);
            continue;
        }
        const double g = 2.0 * std::sqrt(n + 1.0) * f;
        const double w2 = omega * omega;
        const double cw = std::cos(omega * tau);
        z += initial.u(k) * d * g * (1.0 - cw) / w2 + initial.v(k) * g * std::sin(omega * tau) / omega +
             initial.z(k) * (d * d + g * g * cw) / w2;
    }
    return z;
}

double resonant_inversion_exact(std::span<const double> z0, int first_photon, double alpha, double p0, double tau)
{
    // Rotation angle of triple n: 2 sqrt(n+1) * integral of cos(alpha p0 s) ds.
    const double phase = alpha * p0 == 0.0 ? tau : std::sin(alpha * p0 * tau) / (alpha * p0);
    double z = 0.0;
    for (std::size_t k = 0; k < z0.size(); ++k)
        z += z0[k] * std::cos(2.0 * std::sqrt(first_photon + static_cast<double>(k) + 1.0) * phase);
    return z;
}

double resonant_inversion_exact(const HybridState& initial, double alpha, double tau)
{
    std::vector<double> z0(initial.triples());
    for (std::size_t k = 0; k < z0.size(); ++k) z0[k] = initial.z(k);
    return resonant_inversion_exact(z0, initial.first_photon(), alpha, initial.p(), tau);
}

double resonant_exit_time(double p0, double alpha)
{
    if (p0 == 0.0) throw std::domain_error("an atom at rest never reaches a detector");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    constexpr double pi = std::numbers::pi;
    return p0 > 0.0 ? 3.0 * pi / (2.0 * alpha * p0) : pi / (2.0 * alpha * -p0);
}

double predictability_horizon(double lambda, double delta_z, double delta_z_in)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (!(delta_z_in > 0.0) || !(delta_z > delta_z_in))
        throw std::invalid_argument("need delta_z > delta_z_in > 0");
    return std::log(delta_z / delta_z_in) / lambda;
}

}  // namespace cavity
