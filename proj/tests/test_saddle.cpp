#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "metacap/saddle.hpp"

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

CriticalPoint saddle_of(const DiffusionModel& model, const Box& box) {
    auto pts = find_critical_points(model, box, 9);
    return identify_two_well(pts).saddle;
}

TwoWellSystem wells_of(const DiffusionModel& model, const Box& box) {
    return identify_two_well(find_critical_points(model, box, 9));
}

} // namespace

TEST_CASE("scalar saddle analysis") {
    auto model = make_double_well_1d();
    Box box{vec1(-2), vec1(2)};
    auto tw = wells_of(*model, box);
    auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);
    CHECK(sa.mu == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sa.mu_dag == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sa.v[0] == doctest::Approx(1.0));
    CHECK(sa.beta == doctest::Approx(1.0));
    CHECK(sa.omega0 == doctest::Approx(1.0 / (2 * M_PI)).epsilon(1e-12));
}

TEST_CASE("2d gamma family closed-form eigendecomposition") {
    Box box{vec2(-2, -2), vec2(2, 2)};
    for (double gamma : {0.0, 0.5, 1.0, 2.0}) {
        CAPTURE(gamma);
        auto model = make_double_well_2d_rot(gamma);
        auto tw = wells_of(*model, box);
        auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);
        double mu_exact = std::sqrt(1.0 + gamma * gamma);
        CHECK(std::abs(sa.mu - mu_exact) <= 1e-10);
        CHECK(std::abs(sa.mu_dag - mu_exact) <= 1e-10);
        // v . H0^{-1} v = -1/beta for both the primal and adjoint vectors
        MatrixXd Hinv = sa.H0.inverse();
        CHECK(std::abs(sa.v.dot(Hinv * sa.v) + 1.0 / sa.beta) <= 1e-10);
        CHECK(std::abs(sa.v_dag.dot(Hinv * sa.v_dag) + 1.0 / sa.beta_dag) <= 1e-10);
        CHECK(sa.v.dot(sa.e1) > 0.0);
        CHECK(sa.beta > 0.0);
        CHECK(sa.beta_dag > 0.0);
        // H0 L0 is skew-symmetric for the valid perturbation family
        MatrixXd HL = sa.H0 * sa.L0;
        CHECK((HL + HL.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
        if (gamma == 1.0) {
            // v proportional to (1, sqrt(2)-1)
            CHECK(sa.v[1] / sa.v[0] ==
                  doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-10));
            CHECK(sa.beta == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
            CHECK(sa.omega0 ==
                  doctest::Approx(std::sqrt(2.0) / (2 * M_PI)).epsilon(1e-10));
        }
        if (gamma == 0.0) {
            CHECK(sa.v.isApprox(sa.e1, 1e-12));
            CHECK(sa.beta == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("primal and adjoint spectra agree as multisets") {
    auto model = make_double_well_2d_rot(1.3);
    Box box{vec2(-2, -2), vec2(2, 2)};
    auto tw = wells_of(*model, box);
    auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);
    MatrixXd M = sa.H0 * sa.A0 + sa.L0.transpose();
    MatrixXd Md = sa.H0 * sa.A0.transpose() - sa.L0.transpose();
    Eigen::EigenSolver<MatrixXd> e1(M), e2(Md);
    std::vector<double> s1, s2;
    for (int i = 0; i < 2; ++i) {
        s1.push_back(e1.eigenvalues()[i].real());
        s2.push_back(e2.eigenvalues()[i].real());
    }
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());
    CHECK(std::abs(s1[0] - s2[0]) <= 1e-10);
    CHECK(std::abs(s1[1] - s2[1]) <= 1e-10);
}

TEST_CASE("transpose-and-flip swaps the primal and adjoint data") {
    // replacing A0 by A0^T and L0 by -L0 turns M into M_dag
    auto model = make_double_well_2d_rot(0.8);
    Box box{vec2(-2, -2), vec2(2, 2)};
    auto tw = wells_of(*model, box);
    auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);
    MatrixXd M_from_flip = sa.H0 * sa.A0.transpose() + (-sa.L0).transpose();
    MatrixXd Md = sa.H0 * sa.A0.transpose() - sa.L0.transpose();
    CHECK(M_from_flip.isApprox(Md, 1e-14));
}

TEST_CASE("mu is even and nondecreasing in gamma") {
    Box box{vec2(-2, -2), vec2(2, 2)};
    double prev = 0.0;
    for (double gamma : {0.0, 0.4, 0.9, 1.5}) {
        auto model = make_double_well_2d_rot(gamma);
        auto tw = wells_of(*model, box);
        auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);
        auto modeln = make_double_well_2d_rot(-gamma);
        auto twn = wells_of(*modeln, box);
        auto san = analyze_saddle(*modeln, twn.saddle, twn.m1.location);
        CHECK(sa.mu == doctest::Approx(san.mu).epsilon(1e-12));
        CHECK(sa.mu >= prev - 1e-12);
        prev = sa.mu;
        // flipping the perturbation sign swaps the primal and adjoint data
        CHECK(san.v.isApprox(sa.v_dag, 1e-10));
        CHECK(san.v_dag.isApprox(sa.v, 1e-10));
        CHECK(san.beta == doctest::Approx(sa.beta_dag).epsilon(1e-12));
        CHECK(san.beta_dag == doctest::Approx(sa.beta).epsilon(1e-12));
    }
}

TEST_CASE("structural failures are reported") {
    SUBCASE("index-2 saddle rejected by precondition") {
        std::vector<PolyTerm> w = {{0.25, {4, 0}}, {-0.5, {2, 0}},
                                   {0.25, {0, 4}}, {-0.5, {0, 2}}};
        auto model = make_custom_polynomial(2, w, {}, {},
                                            ConfiningParams{2.0, 0.1, 1.0}, 0.5);
        CriticalPoint p;
        p.location = vec2(0, 0);
        p.value = model->potential(p.location);
        p.kind = CriticalKind::other;
        CHECK_THROWS_AS(analyze_saddle(*model, p), ModelError);
    }
    SUBCASE("perturbation destroying the unique negative eigenvalue") {
        // l with Jacobian [[0.9,-2],[2,-1.1]] at the saddle makes the drift
        // matrix complex with two negative-real-part eigenvalues
        std::vector<PolyTerm> w = {{0.25, {4, 0}}, {-0.5, {2, 0}}, {0.25, {0, 0}},
                                   {0.5, {0, 2}}};
        std::vector<std::vector<PolyTerm>> l = {
            {{0.9, {1, 0}}, {-2.0, {0, 1}}},
            {{2.0, {1, 0}}, {-1.1, {0, 1}}}};
        auto model = make_custom_polynomial(2, w, l, {},
                                            ConfiningParams{2.0, 0.2, 0.4}, 0.5);
        auto pts = find_critical_points(*model, Box{vec2(-2, -2), vec2(2, 2)}, 9);
        auto tw = identify_two_well(pts);
        CHECK_THROWS_AS(analyze_saddle(*model, tw.saddle, tw.m1.location),
                        ModelError);
    }
}

TEST_CASE("sharp capacity values") {
    Box box1{vec1(-2), vec1(2)};
    auto model = make_double_well_1d();
    auto tw = wells_of(*model, box1);
    auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);

    GibbsMeasure laplace_only;
    laplace_only.epsilon = 0.1;
    laplace_only.Z = 2.0 * std::sqrt(M_PI * 0.1);  // Laplace value

    double cap = sharp_capacity(sa, laplace_only, 0.25);
    CHECK(cap == doctest::Approx(std::sqrt(2.0) / (4 * M_PI) * std::exp(-2.5))
                     .epsilon(1e-12));
    CHECK(cap == doctest::Approx(9.2378e-3).epsilon(1e-4));

    SUBCASE("asymptotic normalization recovers omega0") {
        for (double eps : {0.1, 0.05}) {
            GibbsMeasure m;
            m.epsilon = eps;
            m.Z = 1.7;  // arbitrary; cancels in the normalization
            double c = sharp_capacity(sa, m, 0.25);
            double normalized = c * std::exp(0.25 / eps) * m.Z /
                                std::pow(2 * M_PI * eps, 0.5);
            CHECK(normalized == doctest::Approx(sa.omega0).epsilon(1e-12));
        }
    }

    SUBCASE("gamma scales the 2d capacity by mu") {
        Box box2{vec2(-2, -2), vec2(2, 2)};
        auto m0 = make_double_well_2d_rot(0.0);
        auto m1 = make_double_well_2d_rot(1.0);
        auto tw0 = wells_of(*m0, box2);
        auto tw1 = wells_of(*m1, box2);
        auto sa0 = analyze_saddle(*m0, tw0.saddle, tw0.m1.location);
        auto sa1 = analyze_saddle(*m1, tw1.saddle, tw1.m1.location);
        GibbsMeasure m;
        m.epsilon = 0.1;
        m.Z = 2 * M_PI * 0.1 * std::sqrt(2.0);
        double c0 = sharp_capacity(sa0, m, 0.25);
        double c1 = sharp_capacity(sa1, m, 0.25);
        CHECK(c1 / c0 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("mean transition time prediction") {
    Box box1{vec1(-2), vec1(2)};
    auto model = make_double_well_1d();
    auto tw = wells_of(*model, box1);
    auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);

    double t = eyring_kramers_time(sa, tw.m1, tw.saddle, 0.1);
    CHECK(t == doctest::Approx(2 * M_PI / std::sqrt(2.0) * std::exp(2.5))
                   .epsilon(1e-12));
    CHECK(t == doctest::Approx(54.1257).epsilon(1e-4));

    SUBCASE("prefactor alone when the barrier vanishes") {
        CriticalPoint fake_saddle = tw.saddle;
        fake_saddle.value = tw.m1.value;  // synthetic zero barrier
        double t0 = eyring_kramers_time(sa, tw.m1, fake_saddle, 0.1);
        CHECK(t0 == doctest::Approx(2 * M_PI / std::sqrt(2.0)).epsilon(1e-12));
    }

    SUBCASE("non-reversibility accelerates the transition by 1/mu") {
        Box box2{vec2(-2, -2), vec2(2, 2)};
        for (double gamma : {0.5, 1.0}) {
            auto m0 = make_double_well_2d_rot(0.0);
            auto mg = make_double_well_2d_rot(gamma);
            auto tw0 = wells_of(*m0, box2);
            auto twg = wells_of(*mg, box2);
            auto sa0 = analyze_saddle(*m0, tw0.saddle, tw0.m1.location);
            auto sag = analyze_saddle(*mg, twg.saddle, twg.m1.location);
            double t0 = eyring_kramers_time(sa0, tw0.m1, tw0.saddle, 0.1);
            double tg = eyring_kramers_time(sag, twg.m1, twg.saddle, 0.1);
            CHECK(tg / t0 ==
                  doctest::Approx(1.0 / std::sqrt(1 + gamma * gamma)).epsilon(1e-12));
        }
    }
}

TEST_CASE("capacity-time consistency identity") {
    // mean_time * capacity equals the Laplace mass of the starting well / Z
    Box box{vec2(-2, -2), vec2(2, 2)};
    auto model = make_double_well_2d_rot(1.0);
    auto tw = wells_of(*model, box);
    auto sa = analyze_saddle(*model, tw.saddle, tw.m1.location);
    GibbsMeasure m;
    m.epsilon = 0.08;
    m.Z = 0.9;  // arbitrary
    auto p = ek_prediction(sa, m, tw.m1, tw.saddle);
    double detm = tw.m1.hess_eigs[0] * tw.m1.hess_eigs[1];
    double well_mass = std::pow(2 * M_PI * m.epsilon, 1.0) / std::sqrt(detm) *
                       std::exp(-tw.m1.value / m.epsilon);
    CHECK(p.capacity * p.mean_time ==
          doctest::Approx(well_mass / m.Z).epsilon(1e-12));
}
