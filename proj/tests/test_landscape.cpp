#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "metacap/landscape.hpp"

using namespace metacap;

namespace {

VectorXd vec1(double x) {
    VectorXd z(1);
    z[0] = x;
    return z;
}

VectorXd vec2(double x, double y) {
    VectorXd z(2);
    z[0] = x;
    z[1] = y;
    return z;
}

} // namespace

TEST_CASE("1d double well critical points") {
    auto model = make_double_well_1d();
    Box box{vec1(-2.0), vec1(2.0)};
    auto pts = find_critical_points(*model, box, 9);
    REQUIRE(pts.size() == 3);
    // sorted by value: the two minima first, then the saddle
    CHECK(pts[0].kind == CriticalKind::minimum);
    CHECK(pts[1].kind == CriticalKind::minimum);
    CHECK(pts[2].kind == CriticalKind::saddle_index_1);
    CHECK(pts[0].location[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(pts[1].location[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pts[2].location[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(pts[2].value == doctest::Approx(0.25));
    CHECK(pts[2].hess_eigs[0] == doctest::Approx(-1.0));
}

TEST_CASE("strictly convex potential has a single minimum") {
    std::vector<PolyTerm> w = {{0.5, {2, 0}}, {0.5, {0, 2}}};
    auto model = make_custom_polynomial(2, w, {}, {},
                                        ConfiningParams{2.0, 0.25, 0.0}, 0.5);
    Box box{vec2(-2, -2), vec2(2, 2)};
    auto pts = find_critical_points(*model, box, 5);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].kind == CriticalKind::minimum);
    CHECK(pts[0].location.norm() < 1e-10);
}

TEST_CASE("2d double well family critical points") {
    for (double gamma : {0.0, 1.0}) {
        auto model = make_double_well_2d_rot(gamma);
        Box box{vec2(-2, -2), vec2(2, 2)};
        auto pts = find_critical_points(*model, box, 7);
        REQUIRE(pts.size() == 3);
        auto tw = identify_two_well(pts);
        CHECK(tw.m0.location.isApprox(vec2(-1, 0), 1e-8));
        CHECK(tw.m1.location.isApprox(vec2(1, 0), 1e-8));
        CHECK(tw.saddle.location.norm() < 1e-8);
        CHECK(tw.barrier_height() == doctest::Approx(0.25));
    }
}

TEST_CASE("degenerate critical point is rejected") {
    // W = x^4 has a vanishing Hessian eigenvalue at the origin
    std::vector<PolyTerm> w = {{1.0, {4}}};
    auto model =
        make_custom_polynomial(1, w, {}, {}, ConfiningParams{2.0, 0.2, 1.0}, 0.5);
    Box box{vec1(-1.5), vec1(1.5)};
    CHECK_THROWS_AS(find_critical_points(*model, box, 9), LandscapeError);
}

TEST_CASE("communication height on the 1d double well") {
    auto model = make_double_well_1d();
    LatticeSpec lat{Box{vec1(-2.05), vec1(2.13)}, 1e-3};

    SUBCASE("saddle height from well to well") {
        TargetSet tgt;
        tgt.kind = TargetSet::Kind::point;
        tgt.center = vec1(-1.0);
        auto r = communication_height(*model, vec1(1.0), tgt, lat);
        CHECK(r.height == doctest::Approx(0.25).epsilon(1e-5));
        CHECK(std::abs(r.witness[0]) < 2e-3);
        CHECK(r.path.size() > 10);
    }

    SUBCASE("start inside target") {
        TargetSet tgt;
        tgt.kind = TargetSet::Kind::ball;
        tgt.center = vec1(1.0);
        tgt.radius = 0.2;
        auto r = communication_height(*model, vec1(1.05), tgt, lat);
        CHECK(r.height == doctest::Approx(model->potential(vec1(1.05))));
        CHECK(r.path.empty());
    }

    SUBCASE("unreachable target") {
        TargetSet tgt;
        tgt.kind = TargetSet::Kind::ball;
        tgt.center = vec1(5.0);
        tgt.radius = 0.1;
        CHECK_THROWS_AS(communication_height(*model, vec1(1.0), tgt, lat),
                        LandscapeError);
    }
}

TEST_CASE("communication height on the 2d family") {
    auto model = make_double_well_2d_rot(1.0);
    LatticeSpec lat{Box{vec2(-1.52, -0.61), vec2(1.55, 0.64)}, 0.01};
    TargetSet tgt;
    tgt.kind = TargetSet::Kind::ball;
    tgt.center = vec2(-1, 0);
    tgt.radius = 0.1;
    auto r = communication_height(*model, vec2(1.0, 0.0), tgt, lat);
    CHECK(r.height == doctest::Approx(0.25).epsilon(1e-3));
    CHECK(r.witness.norm() < 0.03);
}

TEST_CASE("minimax height symmetry between singletons") {
    auto model = make_double_well_2d_rot(0.5);
    LatticeSpec lat{Box{vec2(-1.52, -0.61), vec2(1.55, 0.64)}, 0.02};
    TargetSet to_m0, to_m1;
    to_m0.kind = TargetSet::Kind::point;
    to_m0.center = vec2(-1, 0);
    to_m1.kind = TargetSet::Kind::point;
    to_m1.center = vec2(1, 0);
    auto fwd = communication_height(*model, vec2(1, 0), to_m0, lat);
    auto bwd = communication_height(*model, vec2(-1, 0), to_m1, lat);
    // Lip(W) on this box is below 4
    CHECK(std::abs(fwd.height - bwd.height) <= 2 * lat.step * 4.0);
}

TEST_CASE("refinement is a Cauchy sequence") {
    auto model = make_double_well_1d();
    TargetSet tgt;
    tgt.kind = TargetSet::Kind::point;
    tgt.center = vec1(-1.0);
    // origin chosen so the node nearest the saddle moves in under refinement
    double h0 = 0.012;
    std::vector<double> heights;
    for (double step : {h0, h0 / 2, h0 / 4}) {
        LatticeSpec lat{Box{vec1(-2.008), vec1(2.0061)}, step};
        heights.push_back(
            communication_height(*model, vec1(1.0), tgt, lat).height);
    }
    double prev = std::abs(heights[1] - heights[0]);
    double cur = std::abs(heights[2] - heights[1]);
    CHECK(cur <= prev + 1e-12);
}

TEST_CASE("two-well identification orients m1 along the positive axis") {
    auto model = make_double_well_1d();
    Box box{vec1(-2.0), vec1(2.0)};
    auto tw = identify_two_well(find_critical_points(*model, box, 9));
    CHECK(tw.m1.location[0] == doctest::Approx(1.0));
    CHECK(tw.m0.location[0] == doctest::Approx(-1.0));
}

TEST_CASE("target descriptor parsing") {
    auto ball = parse_target_json(
        {{"kind", "ball"}, {"center", {-1.0, 0.0}}, {"radius", 0.1}});
    CHECK(ball.kind == TargetSet::Kind::ball);
    CHECK(ball.contains(vec2(-1.05, 0.0)));
    CHECK_FALSE(ball.contains(vec2(-0.8, 0.0)));

    auto pt = parse_target_json({{"kind", "point"}, {"at", {0.5}}});
    CHECK(pt.kind == TargetSet::Kind::point);
    CHECK(pt.center[0] == doctest::Approx(0.5));

    CHECK_THROWS_AS(parse_target_json({{"kind", "box"}}), ConfigError);
    CHECK_THROWS_AS(parse_target_json({{"kind", "ball"},
                                       {"center", {0.0}},
                                       {"radius", 0.1},
                                       {"extra", 1}}),
                    ConfigError);
}
