#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include <ghzsim/fock.hpp>

using namespace ghzsim;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
}

TEST_CASE("monomials, amplitudes and photon number") {
    const FockState one = FockState::monomial({3});
    CHECK(one.photon_number() == 1);
    CHECK(one.norm_squared() == doctest::Approx(1.0));

    // (a^dag)^2 |0> = sqrt(2) |2>, so the normalized amplitude is sqrt(2)
    const FockState two = FockState::monomial({5, 5});
    CHECK(two.photon_number() == 2);
    CHECK(std::abs(fock_amplitude(two.terms()[0]) - std::sqrt(2.0)) < 1e-14);
    CHECK(two.norm_squared() == doctest::Approx(2.0));

    const auto occ = occupations(two.terms()[0]);
    CHECK(occ.at(5) == 2);

    CHECK(FockState::vacuum().empty());
    CHECK(FockState::vacuum().photon_number() == 0);

    const FockState mixed = FockState::monomial({0}) + FockState::monomial({1, 2});
    CHECK_THROWS_AS(mixed.photon_number(), std::logic_error);
}

TEST_CASE("terms with the same mode multiset merge under simplified") {
    const FockState s =
        FockState::monomial({1, 2}, 0.5) + FockState::monomial({2, 1}, 0.5);
    const FockState m = s.simplified();
    REQUIRE(m.terms().size() == 1);
    CHECK(std::abs(m.terms()[0].coeff - cxd(1.0)) < 1e-14);

    // exact cancellation drops the term
    const FockState z =
        (FockState::monomial({4}, 1.0) + FockState::monomial({4}, -1.0)).simplified();
    CHECK(z.empty());
}

TEST_CASE("product concatenates monomials and scaling is linear") {
    const FockState a = FockState::monomial({0}, cxd(0, 1));
    const FockState b = FockState::monomial({1}, 2.0);
    const FockState p = a.product(b);
    REQUIRE(p.terms().size() == 1);
    CHECK(p.terms()[0].modes == std::vector<uint16_t>{0, 1});
    CHECK(std::abs(p.terms()[0].coeff - cxd(0, 2)) < 1e-14);

    const FockState scaled = p * cxd(0.5);
    CHECK(std::abs(scaled.terms()[0].coeff - cxd(0, 1)) < 1e-14);
}

TEST_CASE("balanced beam splitter reproduces the two-photon interference dip") {
    // a -> (c + d)/sqrt(2), b -> (c - d)/sqrt(2) with a=0, b=1, c=2, d=3
    std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> bs;
    bs[0] = {{2, kInvSqrt2}, {3, kInvSqrt2}};
    bs[1] = {{2, kInvSqrt2}, {3, -kInvSqrt2}};

    const FockState in = FockState::monomial({0, 1});
    const FockState out = in.apply_linear_map(bs).simplified();

    // (c^2 - d^2)/2: the coincidence term cd cancels
    REQUIRE(out.terms().size() == 2);
    CHECK(out.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& t : out.terms()) {
        CHECK((t.modes == std::vector<uint16_t>{2, 2} ||
               t.modes == std::vector<uint16_t>{3, 3}));
        // |amplitude|^2 = |1/2 * sqrt(2)|^2 = 1/2 per bunched pattern
        CHECK(std::norm(fock_amplitude(t)) == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(out.requiring_modes({2, 3}).empty());

    // a photon carrying an orthogonal tag (modes 4 -> 6,7) is distinguishable,
    // so the cross-port coincidence survives at probability 1/2
    std::map<uint16_t, std::vector<std::pair<uint16_t, cxd>>> bs_tagged;
    bs_tagged[4] = {{6, kInvSqrt2}, {7, -kInvSqrt2}};
    const FockState dis = FockState::monomial({0})
                              .apply_linear_map(bs)
                              .product(FockState::monomial({4}).apply_linear_map(bs_tagged))
                              .simplified();
    const double coincidence = dis.requiring_modes({2, 7}).norm_squared() +
                               dis.requiring_modes({3, 6}).norm_squared();
    CHECK(coincidence == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mode filters keep and drop the right terms") {
    const FockState s = FockState::monomial({0, 2}) + FockState::monomial({1, 2}) +
                        FockState::monomial({1, 3});
    CHECK(s.without_modes({0}).terms().size() == 2);
    CHECK(s.requiring_modes({1}).terms().size() == 2);
    CHECK(s.requiring_modes({1, 3}).terms().size() == 1);
    CHECK(s.requiring_modes({7}).empty());
}

TEST_CASE("partial_trace_outer reduces a mode-entangled pair to the mixed state") {
    // (a0 b2 + a1 b3)/sqrt(2): tracing modes 2,3 leaves I/2 on the {0},{1} basis
    const FockState bell = (FockState::monomial({0, 2}) + FockState::monomial({1, 3})) *
                           cxd(kInvSqrt2);
    const std::vector<std::vector<uint16_t>> kept = {{0}, {1}};
    Eigen::MatrixXcd r = partial_trace_outer(bell, kept, {2, 3});
    r /= r.trace();
    CHECK(std::abs(r(0, 0) - 0.5) < 1e-12);
    CHECK(std::abs(r(1, 1) - 0.5) < 1e-12);
    CHECK(std::abs(r(0, 1)) < 1e-12);

    // a product state keeps full coherence
    const FockState prod =
        (FockState::monomial({0}) + FockState::monomial({1})) * cxd(kInvSqrt2);
    const FockState with_env = prod.product(FockState::monomial({2}));
    Eigen::MatrixXcd q = partial_trace_outer(with_env, kept, {2, 3});
    q /= q.trace();
    CHECK(std::abs(q(0, 1) - 0.5) < 1e-12);
    CHECK(std::abs((q * q).trace() - cxd(1.0)) < 1e-12);
}
