#include "cavity/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cavity {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double poisson_pmf(double mean, int n)
{
    return std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
}

double bose_einstein_pmf(double mean, int n)
{
    return std::exp(n * std::log(mean) - (n + 1) * std::log1p(mean));
}

}  // namespace

void ModelParams::validate() const
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("alpha must be positive, got " + std::to_string(alpha));
    if (!std::isfinite(delta))
        throw std::invalid_argument("delta must be finite");
}

double BlochTriple::norm() const
{
    return std::sqrt(u * u + v * v + z * z);
}

void validate(const FieldPreparation& field)
{
    std::visit(overloaded{
                   [](const Fock& f) {
                       if (f.photons < 0) throw std::invalid_argument("Fock photon number must be >= 0");
                   },
                   [](const Coherent& c) {
                       if (!(c.mean > 0.0)) throw std::invalid_argument("coherent mean photon number must be > 0");
                   },
                   [](const BoseEinstein& b) {
                       if (!(b.mean > 0.0)) throw std::invalid_argument("Bose-Einstein mean photon number must be > 0");
                   },
               },
               field);
}

void validate(const AtomPreparation& atom)
{
    if (const auto* s = std::get_if<Superposition>(&atom)) {
        if (!(s->z_in >= -1.0 && s->z_in <= 1.0))
            throw std::invalid_argument("initial inversion z_in must lie in [-1, 1]");
    }
}

double photon_probability(const FieldPreparation& field, int n)
{
    if (n < 0) return 0.0;
    return std::visit(overloaded{
                          [n](const Fock& f) { return n == f.photons ? 1.0 : 0.0; },
                          [n](const Coherent& c) { return poisson_pmf(c.mean, n); },
                          [n](const BoseEinstein& b) { return bose_einstein_pmf(b.mean, n); },
                      },
                      field);
}

double truncation_tail(const FieldPreparation& field, int n_max)
{
    return std::visit(overloaded{
                          [n_max](const Fock& f) { return f.photons > n_max ? 1.0 : 0.0; },
                          [n_max](const Coherent& c) {
                              // Sum upward from n_max + 1; terms decay super-geometrically past the mean.
                              double tail = 0.0;
                              for (int n = std::max(n_max + 1, 0);; ++n) {
                                  const double term = poisson_pmf(c.mean, n);
                                  tail += term;
                                  if (n > c.mean && term < 1e-18 * std::max(tail, 1e-300)) break;
                                  if (term == 0.0 && n > c.mean) break;
                              }
                              return tail;
                          },
                          [n_max](const BoseEinstein& b) {
                              return std::exp((n_max + 1) * (std::log(b.mean) - std::log1p(b.mean)));
                          },
                      },
                      field);
}

int default_truncation(const FieldPreparation& field)
{
    validate(field);
    if (const auto* f = std::get_if<Fock>(&field)) return f->photons;
    int n_max = 0;
    while (truncation_tail(field, n_max) >= kTruncationTail) ++n_max;
    return n_max;
}

HybridState::HybridState(std::size_t triples, int first_photon)
    : data_(Vector::Zero(2 + 3 * static_cast<Eigen::Index>(triples))), first_photon_(first_photon)
{
    if (first_photon < 0) throw std::invalid_argument("first photon index must be >= 0");
}

HybridState::HybridState(Vector data, int first_photon) : data_(std::move(data)), first_photon_(first_photon)
{
    if (data_.size() < 2 || (data_.size() - 2) % 3 != 0)
        throw std::invalid_argument("hybrid state vector must hold (x, p) plus whole Bloch triples");
    if (first_photon < 0) throw std::invalid_argument("first photon index must be >= 0");
}

void HybridState::set_triple(std::size_t k, const BlochTriple& t)
{
    u(k) = t.u;
    v(k) = t.v;
    z(k) = t.z;
}

Eigen::ArrayXd ladder_couplings(int first_photon, std::size_t triples)
{
    Eigen::ArrayXd c(static_cast<Eigen::Index>(triples));
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = std::sqrt(static_cast<double>(first_photon + k + 1));
    return c;
}

BlochTriple bloch_from_amplitudes(std::complex<double> a, std::complex<double> b)
{
    const std::complex<double> coherence = a * std::conj(b);
    return {2.0 * coherence.real(), -2.0 * coherence.imag(), std::norm(a) - std::norm(b)};
}

namespace {

// Excited and ground populations of a superposition (or excited) atom.
std::pair<double, double> atom_populations(const AtomPreparation& atom)
{
    if (const auto* s = std::get_if<Superposition>(&atom)) return {(1.0 + s->z_in) / 2.0, (1.0 - s->z_in) / 2.0};
    return {1.0, 0.0};
}

}  // namespace

HybridState prepare_initial_state(const FieldPreparation& field, const AtomPreparation& atom, double x0, double p0,
                                  int n_max)
{
    validate(field);
    validate(atom);
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");

    HybridState state(static_cast<std::size_t>(n_max) + 1, 0);
    state.x() = x0;
    state.p() = p0;

    if (const auto* fock = std::get_if<Fock>(&field)) {
        const int n = fock->photons;
        if (n > n_max)
            throw std::out_of_range("Fock photon number " + std::to_string(n) + " exceeds n_max " +
                                    std::to_string(n_max));
        const auto [excited, ground] = atom_populations(atom);
        if (ground > 0.0 && n == 0)
            throw std::out_of_range("ground-level population of Fock(0) needs triple n = -1; |1,0> has no partner");
        state.z(static_cast<std::size_t>(n)) = excited;
        if (n > 0) state.z(static_cast<std::size_t>(n - 1)) = -ground;
        return state;
    }

    if (const auto* s = std::get_if<Superposition>(&atom); s && s->z_in != 1.0)
        throw std::invalid_argument("superposition atoms are only supported with Fock fields");

    const double tail = truncation_tail(field, n_max);
    if (tail >= kTruncationTail)
        throw std::out_of_range("truncation tail " + std::to_string(tail) + " above n_max " + std::to_string(n_max) +
                                " exceeds 1e-12");
    for (int n = 0; n <= n_max; ++n) state.z(static_cast<std::size_t>(n)) = photon_probability(field, n);
    return state;
}

HybridState prepare_fock_window(int photons, const AtomPreparation& atom, double x0, double p0)
{
    validate(Fock{photons});
    validate(atom);
    const auto [excited, ground] = atom_populations(atom);
    if (photons == 0) {
        if (ground > 0.0)
            throw std::out_of_range("ground-level population of Fock(0) needs triple n = -1; |1,0> has no partner");
        HybridState state(1, 0);
        state.x() = x0;
        state.p() = p0;
        state.z(0) = excited;
        return state;
    }
    HybridState state(2, photons - 1);
    state.x() = x0;
    state.p() = p0;
    state.z(0) = -ground;
    state.z(1) = excited;
    return state;
}

double population_inversion(const HybridState& state)
{
    return state.ladder().row(2).sum();
}

double energy_integral(const HybridState& state, const ModelParams& params)
{
    const auto ladder = state.ladder();
    const Eigen::ArrayXd c = ladder_couplings(state.first_photon(), state.triples());
    const double coupling = (c * ladder.row(0).transpose().array()).sum();
    return 0.5 * params.alpha * state.p() * state.p() - coupling * std::cos(state.x()) -
           0.5 * params.delta * ladder.row(2).sum();
}

BlochNorms bloch_norms(const HybridState& state)
{
    BlochNorms out;
    out.per_triple = state.ladder().colwise().norm().transpose().array();
    out.total = out.per_triple.sum();
    return out;
}

}  // namespace cavity
