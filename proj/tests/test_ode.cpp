#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qwf/kernel.hpp"
#include "qwf/ode.hpp"

using namespace qwf;

namespace {

RealMatrix scalar(double x) {
    RealMatrix M(1, 1);
    M(0, 0) = x;
    return M;
}

// smooth random sigma with an analytic derivative
SigmaPath random_smooth_sigma(int d, double T, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    RealMatrix A(d, d), B(d, d), C(d, d);
    for (double& x : A.a) x = u(rng);
    for (double& x : B.a) x = u(rng);
    for (double& x : C.a) x = u(rng);
    double w = 2.0 * M_PI / T;
    return SigmaPath::from_function(
        d, T,
        [A, B, C, w](double t) { return A + std::cos(w * t) * B + std::sin(w * t) * C; },
        [B, C, w](double t) { return (-w * std::sin(w * t)) * B + (w * std::cos(w * t)) * C; });
}

} // namespace

TEST_CASE("rk4_matrix_ode basics") {
    // rhs = 0, terminal value I: constant path
    MatrixRhs zero = [](double, const RealMatrix& Y) { return RealMatrix(Y.rows, Y.cols); };
    MatrixPath p = rk4_matrix_ode(zero, RealMatrix::identity(2), 1.0, true, 32);
    for (const auto& Y : p.v) CHECK((Y - RealMatrix::identity(2)).frobenius() == doctest::Approx(0.0));

    // y' = y, y(0) = 1: e at T = 1 within 1e-8 at 64 steps
    MatrixRhs growth = [](double, const RealMatrix& Y) { return Y; };
    p = rk4_matrix_ode(growth, scalar(1.0), 1.0, false, 64);
    CHECK(std::abs(p.v.back()(0, 0) - std::exp(1.0)) < 1e-8);

    // y' = y^2, y(0) = 2 blows up at t = 1/2
    MatrixRhs quad = [](double, const RealMatrix& Y) { return Y * Y; };
    CHECK_THROWS_AS(rk4_matrix_ode(quad, scalar(2.0), 1.0, false, 64), NonFinite);

    CHECK_THROWS_AS(rk4_matrix_ode(zero, RealMatrix::identity(2), 1.0, false, 8), BadParams);
}

TEST_CASE("riccati_solve closed forms") {
    // sigma = 0: R = 0
    RiccatiOutcome r = riccati_solve(SigmaPath::constant(scalar(0.0), 1.0), 64);
    CHECK(r.solved);
    CHECK(r.trace_integral == doctest::Approx(0.0));
    for (const auto& R : r.path.v) CHECK(R.frobenius() == doctest::Approx(0.0));

    // d=1, sigma = c with cT < 1: R(0) = c/(1-cT) - c, int tr R = -log(1-cT) - cT
    double c = 0.5, T = 1.0;
    r = riccati_solve(SigmaPath::constant(scalar(c), T), 512);
    CHECK(r.solved);
    CHECK(r.path.v.front()(0, 0) == doctest::Approx(c / (1 - c * T) - c).epsilon(1e-8));
    CHECK(r.trace_integral == doctest::Approx(-std::log(1 - c * T) - c * T).epsilon(1e-7));

    // threshold case cT = 1: blow-up at t = 0
    r = riccati_solve(SigmaPath::constant(scalar(1.0), 1.0), 512);
    CHECK_FALSE(r.solved);
    CHECK(r.blowup_time < 0.05);

    // cT = 2: blow-up at T - 1/c = 0.5, bracketed within one step
    r = riccati_solve(SigmaPath::constant(scalar(2.0), 1.0), 512);
    CHECK_FALSE(r.solved);
    CHECK(r.blowup_hi - r.blowup_lo <= 1.0 / 512 + 1e-12);
    CHECK(std::abs(r.blowup_time - 0.5) < 0.01);
}

TEST_CASE("riccati solutions stay symmetric") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        int d = 1 + static_cast<int>(rng() % 2);
        SigmaPath s = random_smooth_sigma(d, 1.0, rng, 0.25);
        RiccatiOutcome r = riccati_solve(s, 256);
        REQUIRE(r.solved);
        for (const auto& R : r.path.v)
            CHECK((R - R.transposed()).frobenius() <= 1e-8 * (1.0 + R.frobenius()));
    }
}

TEST_CASE("second_order_suite closed forms") {
    // sigma = 0: S = U = I, V(t) = (t-T) I
    SecondOrderSuite s = second_order_suite(SigmaPath::constant(RealMatrix(2, 2), 1.0), 64);
    CHECK(s.nonsingular);
    for (size_t k = 0; k < s.S.v.size(); ++k) {
        CHECK((s.S.v[k] - RealMatrix::identity(2)).frobenius() < 1e-12);
        CHECK((s.U.v[k] - RealMatrix::identity(2)).frobenius() < 1e-12);
        CHECK((s.V.v[k] - (s.V.t[k] - 1.0) * RealMatrix::identity(2)).frobenius() < 1e-10);
    }

    // phi = 0, psi = -lambda^2: S(t) = cosh(lambda (t - T))
    double lam = 1.25, T = 1.0;
    SigmaPath phi = SigmaPath::constant(scalar(0.0), T);
    SigmaPath psi = SigmaPath::constant(scalar(-lam * lam), T);
    s = second_order_suite(phi, psi, 256);
    CHECK(s.nonsingular);
    for (size_t k = 0; k < s.S.v.size(); k += 16)
        CHECK(s.S.v[k](0, 0) == doctest::Approx(std::cosh(lam * (s.S.t[k] - T))).epsilon(1e-9));
    CHECK(s.U.v.front()(0, 0) == doctest::Approx(std::cosh(lam * T)).epsilon(1e-8));
    CHECK(s.V.v.front()(0, 0) == doctest::Approx(-std::sinh(lam * T) / lam).epsilon(1e-8));

    // phi = 0, psi = +lambda^2: S(t) = cos(lambda (t - T)); singular iff lam T >= pi/2
    psi = SigmaPath::constant(scalar(lam * lam), T);
    s = second_order_suite(phi, psi, 256);
    CHECK(s.nonsingular == (lam * T < M_PI_2));
    for (size_t k = 0; k < s.S.v.size(); k += 16)
        CHECK(s.S.v[k](0, 0) == doctest::Approx(std::cos(lam * (s.S.t[k] - T))).epsilon(1e-8));

    double lam2 = 1.8; // lam2 * T > pi/2: S vanishes inside [0, T]
    s = second_order_suite(phi, SigmaPath::constant(scalar(lam2 * lam2), T), 256);
    CHECK_FALSE(s.nonsingular);
}

TEST_CASE("equivalence chain between the Riccati and second-order routes") {
    std::mt19937_64 rng(7);
    int done = 0;
    while (done < 6) {
        int d = 1 + static_cast<int>(rng() % 2);
        SigmaPath s = random_smooth_sigma(d, 1.0, rng, 0.2);
        double nrm = s.sup_norm();
        if (s.T * std::sqrt(d) * nrm * std::exp(s.T * nrm) >= 1.0) continue;
        ++done;

        RiccatiOutcome r = riccati_solve(s, 512);
        SecondOrderSuite so = second_order_suite(s, 512);
        CHECK(r.solved == so.nonsingular);
        REQUIRE(r.solved);

        // chi = R + sigma equals S' S^{-1} within 1e-5
        for (size_t k = 0; k < so.S.v.size(); k += 64) {
            RealMatrix chi_r = r.path.v[k] + s(so.S.t[k]);
            RealMatrix chi_s = so.Sprime.v[k] * inverse(so.S.v[k]);
            CHECK((chi_r - chi_s).frobenius() < 1e-5 * (1.0 + chi_s.frobenius()));
        }

        // log det S(0) + int_0^T tr(R + sigma) = 0 within 1e-5
        double trace_sigma = 0;
        int steps = so.S.steps();
        for (int k = 0; k < steps; ++k) {
            double a = so.S.t[k], b = so.S.t[k + 1];
            trace_sigma += 0.5 * (b - a) * (s(a).trace() + s(b).trace());
        }
        CHECK(std::abs(std::log(std::abs(so.detS.front())) + r.trace_integral + trace_sigma) < 1e-5);
    }
}

TEST_CASE("riccati blow-up tracks the integrability threshold") {
    // scalar boundary: sigma = c on [0,1] solves iff c < 1
    for (double c : {0.90, 0.95}) {
        CHECK(riccati_solve(SigmaPath::constant(scalar(c), 1.0), 512).solved);
    }
    for (double c : {1.05, 1.10, 1.50}) {
        CHECK_FALSE(riccati_solve(SigmaPath::constant(scalar(c), 1.0), 512).solved);
    }
}

TEST_CASE("halving the step shrinks the terminal error ~16x") {
    double lam = 1.0, T = 1.0;
    SigmaPath phi = SigmaPath::constant(scalar(0.0), T);
    SigmaPath psi = SigmaPath::constant(scalar(-lam * lam), T);
    double exact = std::cosh(lam * T);
    double e16 = std::abs(second_order_suite(phi, psi, 16).S.v.front()(0, 0) - exact);
    double e32 = std::abs(second_order_suite(phi, psi, 32).S.v.front()(0, 0) - exact);
    double ratio = e16 / e32;
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
}

TEST_CASE("matrix paths serialize to csv rows") {
    MatrixPath p;
    p.t = {0.0, 0.5};
    RealMatrix A(2, 2);
    A(0, 1) = 3.0;
    p.v = {RealMatrix::identity(2), A};
    std::ostringstream ss;
    write_matrix_path_csv(p, ss);
    std::istringstream in(ss.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,i,j,value");
    std::getline(in, line);
    CHECK(line == "0,1,1,1");
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 8);
    CHECK(ss.str().find("0.5,1,2,3") != std::string::npos);
}

TEST_CASE("v_t_of_S") {
    // S = I: v_t = t I
    MatrixPath S;
    for (int k = 0; k <= 64; ++k) {
        S.t.push_back(k / 64.0);
        S.v.push_back(RealMatrix::identity(2));
    }
    RealMatrix v = v_t_of_S(S, 0.75);
    CHECK((v - 0.75 * RealMatrix::identity(2)).frobenius() < 1e-12);

    // d=1, S(t) = cosh(lambda (t-T)): v_T = tanh(lambda T)/lambda
    double lam = 0.8, T = 1.0;
    SecondOrderSuite so =
        second_order_suite(SigmaPath::constant(scalar(0.0), T),
                           SigmaPath::constant(scalar(-lam * lam), T), 512);
    v = v_t_of_S(so.S, T);
    CHECK(v(0, 0) == doctest::Approx(std::tanh(lam * T) / lam).epsilon(1e-5));

    // d=2 skew generator: v_T = T tnh[TA] = (tan(aT)/a) I
    double a = 0.6;
    RealMatrix A(2, 2);
    A(0, 1) = -a;
    A(1, 0) = a;
    so = second_order_suite(SigmaPath::constant(A, T), 512);
    v = v_t_of_S(so.S, T);
    CHECK(v(0, 0) == doctest::Approx(std::tan(a * T) / a).epsilon(1e-5));
    CHECK(v(1, 1) == doctest::Approx(std::tan(a * T) / a).epsilon(1e-5));
    CHECK(std::abs(v(0, 1)) < 1e-6);

    // singular S on the window raises
    MatrixPath bad;
    for (int k = 0; k <= 32; ++k) {
        bad.t.push_back(k / 32.0);
        bad.v.push_back(scalar(k == 16 ? 0.0 : 1.0));
    }
    CHECK_THROWS_AS(v_t_of_S(bad, 1.0), SingularS);
}
