#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "cavity/chaos.hpp"

using namespace cavity;
using doctest::Approx;

namespace {

Scenario fock_scenario(double delta)
{
    Scenario s;
    s.params = {delta, 1e-3};
    s.field = Fock{10};
    s.atom = Superposition{0.0};
    s.p0 = 50.0;
    return s;
}

double lambda_of(const Scenario& s, const LyapunovConfig& c)
{
    const LyapunovResult r = max_lyapunov(s.system(), s.initial_state(), c);
    REQUIRE(r.ok);
    return r.lambda;
}

std::vector<HybridState> fig6_inits(Scenario q)
{
    std::vector<HybridState> inits;
    for (double p : {5.0, 10.0, 15.0, 20.0, 25.0}) {
        q.p0 = p;
        inits.push_back(q.initial_state());
    }
    return inits;
}

}  // namespace

TEST_CASE("Lyapunov exponent vanishes at resonance")
{
    LyapunovConfig c;
    const double l = lambda_of(fock_scenario(0.0), c);
    CHECK(std::abs(l) < 1e-3);

    Scenario other = fock_scenario(0.0);
    other.atom = Excited{};
    other.p0 = 17.0;
    CHECK(std::abs(lambda_of(other, c)) < 1e-3);
}

TEST_CASE("Lyapunov exponent of the chaotic Fock configuration")
{
    LyapunovConfig c;
    const Scenario s = fock_scenario(0.4);
    const double l = lambda_of(s, c);
    CHECK(std::abs(l - 0.05) <= 0.03);
    CHECK(l >= -1e-3);

    LyapunovConfig half_d0 = c;
    half_d0.d0 *= 0.5;
    CHECK(std::abs(lambda_of(s, half_d0) - l) <= 0.1 * l);

    LyapunovConfig half_interval = c;
    half_interval.renorm_interval *= 0.5;
    CHECK(std::abs(lambda_of(s, half_interval) - l) <= 0.1 * l);
}

TEST_CASE("Lyapunov configuration")
{
    LyapunovConfig c;
    CHECK(c.discard() == Approx(2e3));
    c.t_discard = 0.0;
    CHECK(c.discard() == 0.0);
    CHECK_NOTHROW(c.validate());
    for (auto mutate : {+[](LyapunovConfig& k) { k.d0 = 0.0; }, +[](LyapunovConfig& k) { k.t_discard = 3e4; },
                        +[](LyapunovConfig& k) { k.renorm_interval = -1.0; }}) {
        LyapunovConfig k;
        mutate(k);
        CHECK_THROWS_AS(k.validate(), std::invalid_argument);
    }
}

TEST_CASE("axes")
{
    const AxisSpec lin{"delta", -2.0, 2.0, 5, AxisScale::Linear};
    CHECK(lin.values() == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
    const AxisSpec lg{"alpha", 1e-4, 1e-2, 3, AxisScale::Log};
    CHECK(lg.value(0) == 1e-4);
    CHECK(lg.value(1) == Approx(1e-3).epsilon(1e-14));
    CHECK(lg.value(2) == 1e-2);
    CHECK(AxisSpec{"p0", 3.0, 3.0, 1}.values() == std::vector<double>{3.0});
    CHECK_THROWS(AxisSpec({"alpha", -1.0, 1.0, 3, AxisScale::Log}).validate());
    CHECK_THROWS(AxisSpec({"delta", 0.0, 1.0, 0}).validate());

    Scenario s;
    apply_axis(s, "photons", 4.0);
    CHECK(std::get<Fock>(s.field).photons == 4);
    s.field = Coherent{10.0};
    s.n_max = 80;
    apply_axis(s, "photons", 3.0);
    CHECK(std::get<Coherent>(s.field).mean == 3.0);
    CHECK_FALSE(s.n_max.has_value());
    CHECK_THROWS_AS(apply_axis(s, "omega", 1.0), std::invalid_argument);
}

TEST_CASE("one-cell map is a single Lyapunov run")
{
    LyapunovConfig c;
    c.t_total = 2000.0;
    const Scenario base = fock_scenario(0.0);
    const GridMap m = lyapunov_map({"delta", 0.4, 0.4, 1}, {"p0", 50.0, 50.0, 1}, base, c, {}, 1);
    REQUIRE(m.values.rows() == 1);
    REQUIRE(m.values.cols() == 1);
    CHECK(m.values(0, 0) == lambda_of(fock_scenario(0.4), c));
}

TEST_CASE("resonant column of a map and missing cells")
{
    LyapunovConfig c;
    c.t_total = 5000.0;
    const Scenario base = fock_scenario(0.4);
    const GridMap m = lyapunov_map({"delta", 0.0, 0.4, 2}, {"alpha", 1e-4, 1e-2, 3, AxisScale::Log}, base, c, {}, 2);
    REQUIRE(m.values.rows() == 2);
    REQUIRE(m.values.cols() == 3);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(m.values(0, j)) < 1e-3);
    CHECK(m.values.row(1).maxCoeff() > 1e-2);

    // z_in = 1.5 cannot be prepared: that cell is recorded as missing.
    const GridMap bad = lyapunov_map({"z_in", 0.5, 1.5, 2}, {"delta", 0.4, 0.4, 1}, base, {1e-8, 1.0, 500.0}, {}, 1);
    CHECK(std::isfinite(bad.values(0, 0)));
    CHECK(std::isnan(bad.values(1, 0)));
    CHECK(bad.metadata.at("missing_cells") == "1");
}

TEST_CASE("map output does not depend on the thread count")
{
    LyapunovConfig c;
    c.t_total = 500.0;
    const Scenario base = fock_scenario(0.4);
    const AxisSpec x{"delta", -1.0, 1.0, 3}, y{"p0", 20.0, 40.0, 2};
    const GridMap a = lyapunov_map(x, y, base, c, {}, 1);
    const GridMap b = lyapunov_map(x, y, base, c, {}, 3);
    CHECK((a.values.array() == b.values.array()).all());
}

TEST_CASE("mean Lyapunov exponent grows with the photon number")
{
    Scenario base;
    base.params = {0.5, 1e-3};
    base.field = Fock{10};
    base.atom = Excited{};
    base.p0 = 20.0;
    LyapunovConfig c;
    c.t_total = 3000.0;
    const AxisSpec alpha{"alpha", 1e-4, 1e-2, 8, AxisScale::Log}, photons{"photons", 1.0, 100.0, 8, AxisScale::Log};
    const GridMap m = lyapunov_map(alpha, photons, base, c, {}, 0);
    const Eigen::VectorXd means = m.values.colwise().mean();
    for (Eigen::Index j = 1; j < means.size(); ++j) CHECK(means(j) > means(j - 1));
    CHECK(m.values.minCoeff() >= -1e-3);
}

TEST_CASE("section points satisfy the section condition")
{
    const Scenario s = fock_scenario(0.4);
    IntegratorConfig c;
    c.t_max = 500.0;
    const EventSpec section = default_section();
    const Trajectory tr = integrate(s.system(), s.initial_state(), c, std::span(&section, 1));
    REQUIRE(tr.events.size() > 5);
    for (const EventHit& hit : tr.events) CHECK(std::abs(HybridState(hit.y, 9).ladder().row(1).sum()) < 1e-8);

    const std::vector<HybridState> one{s.initial_state()};
    const std::vector<SectionPoint> pts = poincare_section(one, s.system(), 500.0, section, {}, 1);
    REQUIRE(pts.size() == tr.events.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].x == wrap_angle(tr.events[i].y(0)));
        CHECK(pts[i].p == tr.events[i].y(1));
        CHECK(pts[i].x >= -std::numbers::pi);
        CHECK(pts[i].x < std::numbers::pi);
    }
}

TEST_CASE("angle wrapping")
{
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(std::numbers::pi) == -std::numbers::pi);
    CHECK(wrap_angle(-std::numbers::pi) == -std::numbers::pi);
    CHECK(wrap_angle(3.0 * std::numbers::pi / 2.0) == Approx(-std::numbers::pi / 2.0));
    CHECK(wrap_angle(-7.0) == Approx(-7.0 + 2.0 * std::numbers::pi));
}

TEST_CASE("empty sections")
{
    // Excited atom at rest on the node at resonance: cos x vanishes, so v_n
    // stays zero up to rounding and the section function never changes sign.
    Scenario s = fock_scenario(0.0);
    s.atom = Excited{};
    s.x0 = std::numbers::pi / 2.0;
    s.p0 = 0.0;
    const std::vector<HybridState> one{s.initial_state()};
    CHECK(poincare_section(one, s.system(), 500.0, default_section(), {}, 1).empty());
    // A horizon too short for any crossing.
    const Scenario c = fock_scenario(0.4);
    const std::vector<HybridState> two{c.initial_state()};
    CHECK(poincare_section(two, c.system(), 1e-3, default_section(), {}, 1).empty());
    CHECK(box_count({}, 64, -1.0, 1.0) == 0);
}

TEST_CASE("regular sections fill fewer boxes than chaotic ones")
{
    Scenario q;
    q.field = Coherent{10.0};
    q.atom = Excited{};
    q.params = {0.1, 1e-3};
    const std::vector<SectionPoint> chaotic = poincare_section(fig6_inits(q), q.system(), 2000.0, default_section());
    q.params.delta = 0.5;
    const std::vector<SectionPoint> regular = poincare_section(fig6_inits(q), q.system(), 2000.0, default_section());
    REQUIRE(!chaotic.empty());
    REQUIRE(!regular.empty());
    CHECK(box_count(regular, 64, -60.0, 60.0) < box_count(chaotic, 64, -60.0, 60.0));
}

TEST_CASE("box counting")
{
    const std::vector<SectionPoint> pts{{0.0, 0.0, 0}, {0.01, 0.01, 0}, {-3.0, 0.9, 1}, {3.0, 5.0, 1}};
    // the last point lies outside the p range
    CHECK(box_count(pts, 4, -1.0, 1.0) == 2);
    CHECK(box_count(pts, 1000, -1.0, 1.0) == 3);
}

TEST_CASE("z_out against z_in")
{
    const ModelParams chaotic{0.4, 1e-3};
    const std::vector<double> z_in{-1.0, -0.3, 0.0, 0.61, 1.0};
    const std::vector<double> same = zout_zin_scan(z_in, chaotic, 10, 0.0, 50.0, 0.0);
    // (1 + z)/2 - (1 - z)/2 can differ from z in the last bit.
    for (std::size_t i = 0; i < z_in.size(); ++i) CHECK(std::abs(same[i] - z_in[i]) <= std::numeric_limits<double>::epsilon());
    CHECK(same[0] == -1.0);
    CHECK(same[2] == 0.0);
    CHECK(same[4] == 1.0);

    // Resonant curve: smooth and reproducible.
    std::vector<double> fine;
    for (int i = 0; i <= 20; ++i) fine.push_back(0.998 + 1e-4 * i);
    const ModelParams resonant{0.0, 1e-3};
    const std::vector<double> a = zout_zin_scan(fine, resonant, 10, 0.0, 50.0, 200.0, {}, 1);
    const std::vector<double> b = zout_zin_scan(fine, resonant, 10, 0.0, 50.0, 200.0, {}, 2);
    for (std::size_t i = 0; i < fine.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-10);
    for (std::size_t i = 1; i < fine.size(); ++i) CHECK(std::abs(a[i] - a[i - 1]) < 1e-2);
}
