#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qwf/montecarlo.hpp"
#include "qwf/special.hpp"

using namespace qwf;

TEST_CASE("moment_table basics") {
    MomentTable t = moment_table(8);
    CHECK(std::abs(t.mixed[0] - 1.0) < 1e-13);
    CHECK(std::abs(t.area[0] - 1.0) < 1e-13);
    CHECK(std::abs(t.conditional[0] - 1.0) < 1e-13);
    // E[(s + i|th|^2/4)^k] = (i/2)^k from the exponential generating function
    for (int k = 1; k <= 8; ++k) {
        cplx expect = std::pow(cplx(0, 0.5), k);
        CHECK(std::abs(t.mixed[k] - expect) < 1e-10);
    }
    // odd area moments vanish by symmetry
    CHECK(std::abs(t.area[1]) < 1e-13);
    CHECK(std::abs(t.area[3]) < 1e-13);
    CHECK_THROWS_AS(moment_table(13), BadParams);
}

TEST_CASE("euler and bernoulli basics") {
    CHECK(euler_poly(0, 0.3) == doctest::Approx(1.0));
    CHECK(bernoulli_poly(0, 0.7) == doctest::Approx(1.0));
    CHECK(bernoulli_poly(1, 0.0) == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(bernoulli_poly_classical(1, 0.0) == doctest::Approx(-0.5));

    // Euler numbers 2^n E_n(1/2) = 1, 0, -1, 0, 5
    std::vector<double> euler_numbers{1.0, 0.0, -1.0, 0.0, 5.0};
    for (int n = 0; n <= 4; ++n) {
        double en = std::pow(2.0, n) * euler_poly(n, 0.5);
        CHECK(en == doctest::Approx(euler_numbers[n]).epsilon(1e-9));
        double ec = std::pow(2.0, n) * euler_poly_classical(n, 0.5);
        CHECK(ec == doctest::Approx(euler_numbers[n]));
    }
}

TEST_CASE("stochastic and classical polynomial routes agree") {
    for (int n = 0; n <= 8; ++n)
        for (double xi : {0.0, 0.25, 0.5, 1.0}) {
            CHECK(std::abs(euler_poly(n, xi) - euler_poly_classical(n, xi)) < 1e-7);
            CHECK(std::abs(bernoulli_poly(n, xi) - bernoulli_poly_classical(n, xi)) < 1e-7);
        }
    // Eulerian polynomials need |xi| < 1
    for (int n = 0; n <= 8; ++n)
        for (double xi : {0.0, 0.25, 0.5}) {
            CHECK(std::abs(eulerian_poly_A(n, xi) - eulerian_poly_A_series(n, xi)) < 1e-7);
            CHECK(std::abs(eulerian_poly_B(n, xi) - eulerian_poly_B_series(n, xi)) < 1e-7);
        }
}

TEST_CASE("eulerian polynomial values") {
    CHECK(eulerian_poly_A(0, 0.4) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(eulerian_poly_A(1, 0.4) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(eulerian_poly_B(1, 0.4) == doctest::Approx(1.4).epsilon(1e-10));
    CHECK(eulerian_poly_B(1, -0.3) == doctest::Approx(0.7).epsilon(1e-10));
    CHECK_THROWS_AS(eulerian_poly_A(2, 1.0), BadParams);
}

TEST_CASE("scattering_from_measure closed cases") {
    // n=1, p=-1, c=1: eta = sqrt(2), m = 6 sqrt(2) - 8
    DiscreteMeasure a{{-1.0}, {1.0}};
    ScatteringData s = scattering_from_measure(a);
    CHECK(s.eta[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
    CHECK(s.m[0] == doctest::Approx(6.0 * std::sqrt(2.0) - 8.0).epsilon(1e-9));

    // n=1, p=0, c=1: eta = 1, m = 2
    DiscreteMeasure b{{0.0}, {1.0}};
    s = scattering_from_measure(b);
    CHECK(s.eta[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(s.m[0] == doctest::Approx(2.0).epsilon(1e-10));

    // paired case: eta equals the shared modulus exactly
    DiscreteMeasure c{{1.0, -1.0, 2.0}, {0.8, 0.5, 1.0}};
    s = scattering_from_measure(c);
    CHECK(s.eta[0] == doctest::Approx(1.0));
    CHECK(s.eta[0] < s.eta[1]);
    CHECK(s.eta[1] < s.eta[2]);
    for (double m : s.m) CHECK(m > 0);

    CHECK_THROWS_AS(scattering_from_measure(DiscreteMeasure{{1.0}, {-1.0}}), BadParams);
    CHECK_THROWS_AS(scattering_from_measure(DiscreteMeasure{{2.0, 1.0}, {1.0, 1.0}}), BadParams);
}

TEST_CASE("reflectionless potential") {
    // eta = 1, m = 2: u(x) = -2 sech^2(x)
    ScatteringData s{{1.0}, {2.0}};
    for (double x : {-1.5, -0.3, 0.0, 0.7, 2.0}) {
        double expect = -2.0 / std::pow(std::cosh(x), 2);
        CHECK(reflectionless_potential(s, x) == doctest::Approx(expect).epsilon(1e-8));
    }
    CHECK(std::abs(reflectionless_potential(s, 20.0)) < 1e-8);
    CHECK(std::abs(reflectionless_potential(s, -20.0)) < 1e-8);

    // two-soliton potential: smooth, negative somewhere, bounded below
    ScatteringData s2{{0.7, 1.3}, {1.0, 0.6}};
    double minv = 0, maxv = -1e9;
    for (double x = -10.0; x <= 10.0; x += 0.05) {
        double u = reflectionless_potential(s2, x);
        minv = std::min(minv, u);
        maxv = std::max(maxv, u);
    }
    CHECK(minv < -0.5);
    CHECK(minv > -2.0 * (0.7 * 0.7 + 1.3 * 1.3) * 2.0);
    CHECK(std::abs(reflectionless_potential(s2, 20.0)) < 1e-8);
}

TEST_CASE("psi_via_ode") {
    DiscreteMeasure a{{0.0}, {1.0}};
    CHECK(psi_via_ode(a, 0.0) == doctest::Approx(1.0));
    for (double x : {0.5, 1.0, 2.0})
        CHECK(psi_via_ode(a, x) == doctest::Approx(1.0 / std::sqrt(std::cosh(x))).epsilon(1e-9));

    // 0 < Psi <= 1 on generic measures
    DiscreteMeasure b{{-0.8, 0.5}, {0.7, 0.9}};
    double prev = 1.0;
    for (double x : {0.5, 1.0, 1.5, 2.0}) {
        double v = psi_via_ode(b, x);
        CHECK(v > 0.0);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("4 (log Psi)'' equals the reflectionless potential") {
    DiscreteMeasure a{{0.4, -0.9}, {0.6, 0.8}};
    ScatteringData s = scattering_from_measure(a);
    for (double x : {0.8, 1.5, 2.5}) {
        double h = 1e-3;
        auto lp = [&](double y) { return std::log(psi_via_ode(a, y, 2048)); };
        double second =
            (-lp(x - 2 * h) + 16 * lp(x - h) - 30 * lp(x) + 16 * lp(x + h) - lp(x + 2 * h)) /
            (12 * h * h);
        CHECK(std::abs(4.0 * second - reflectionless_potential(s, x)) < 1e-4);
    }
}

TEST_CASE("full probabilistic identity for the potential") {
    // 4 log Psi(x) + 2 log det(I+G(x)) - 2 log det(I+G(0)) + 2x sum(p+eta) = 0
    std::vector<DiscreteMeasure> cases{
        {{-1.0}, {1.0}},
        {{0.6, -0.8}, {0.7, 0.9}},
        {{0.3, -1.1, 1.4}, {0.8, 0.5, 0.6}},
    };
    for (const auto& a : cases) {
        ScatteringData s = scattering_from_measure(a);
        double sum_pe = 0;
        for (size_t j = 0; j < a.p.size(); ++j) sum_pe += a.p[j] + s.eta[j];
        for (double x : {0.0, 1.0, 2.5, 5.0}) {
            double lhs = 4.0 * std::log(psi_via_ode(a, x, 4096)) + 2.0 * log_det_tau(s, x) -
                         2.0 * log_det_tau(s, 0.0) + 2.0 * x * sum_pe;
            CHECK(std::abs(lhs) < 1e-6);
        }
    }
}

TEST_CASE("determinant identities hold on scattering-generated data") {
    DiscreteMeasure a{{0.3, -1.1, 1.4}, {0.8, 0.5, 0.6}};
    ScatteringData s = scattering_from_measure(a);
    int n = static_cast<int>(a.p.size());

    // det[(1/(eta_i + p_j))] against the product formula
    RealMatrix X(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) X(i, j) = 1.0 / (s.eta[i] + a.p[j]);
    double direct = det(X);
    double formula = cauchy_det(s.eta, a.p);
    CHECK(std::abs(direct - formula) <= 1e-9 * std::max(std::abs(direct), 1e-12));

    // interpolation identity with the eta nodes and p offsets
    std::vector<double> b(a.p.begin(), a.p.end() - 1);
    for (double z : {0.0, 0.7, -0.4}) {
        double rhs = 1.0;
        for (double bk : b) rhs *= (z + bk);
        CHECK(std::abs(lagrange_sum(s.eta, b, z) - rhs) <= 1e-9 * std::max(std::abs(rhs), 1.0));
    }
}

TEST_CASE("psi_via_ode agrees with the OU Monte Carlo oracle") {
    DiscreteMeasure a{{0.5, -0.7}, {0.8, 0.6}};
    double x = 1.0;
    double analytic = psi_via_ode(a, x, 2048);

    PathBatch b;
    b.n_paths = 20000;
    b.n_steps = 2048;
    b.d = 2;
    b.T = x;
    b.seed = 91;
    RealMatrix D = RealMatrix::diagonal({a.p[0], a.p[1]});
    MCEstimate est = estimate_ou_quadratic_exp(SigmaPath::constant(D, x), a.c, b);
    CHECK(std::abs(est.mean - analytic) < 3.0 * est.stderr_ + 1e-3);
}

TEST_CASE("soliton surface") {
    // single soliton: v(x,t) = 2 eta^2 sech^2(eta x + eta^3 t - c),
    // c = (1/2) log(m / (2 eta))
    double eta = 1.0, m = 2.0;
    ScatteringData s{{eta}, {m}};
    std::vector<double> xg, tg{-0.5, 0.0, 0.4};
    for (double x = -3.0; x <= 3.01; x += 0.5) xg.push_back(x);
    SolitonSurface surf = soliton_surface(s, xg, tg);
    double c = 0.5 * std::log(m / (2 * eta));
    for (size_t it = 0; it < tg.size(); ++it)
        for (size_t ix = 0; ix < xg.size(); ++ix) {
            double z = eta * xg[ix] + eta * eta * eta * tg[it] - c;
            double expect = 2.0 * eta * eta / std::pow(std::cosh(z), 2);
            CHECK(surf.at(static_cast<int>(it), static_cast<int>(ix)) ==
                  doctest::Approx(expect).epsilon(1e-7));
        }

    // t = 0 slice equals minus the potential (exact route vs finite differences)
    for (size_t ix = 0; ix < xg.size(); ++ix) {
        double fd = -reflectionless_potential(s, xg[ix]);
        CHECK(std::abs(surf.at(1, static_cast<int>(ix)) - fd) <
              1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("two-soliton KdV residual under interior stencils") {
    ScatteringData s{{0.5, 0.8}, {1.0, 1.0}};
    double hx = 0.01, ht = 0.005;
    std::vector<double> xg, tg;
    for (int i = -600; i <= 600; ++i) xg.push_back(i * hx);
    for (int j = -2; j <= 2; ++j) tg.push_back(j * ht);
    SolitonSurface surf = soliton_surface(s, xg, tg);
    int nx = static_cast<int>(xg.size());

    double worst = 0;
    for (int ix = 2; ix < nx - 2; ix += 3) {
        double vt = (surf.at(3, ix) - surf.at(1, ix)) / (2 * ht);
        double vx = (surf.at(2, ix + 1) - surf.at(2, ix - 1)) / (2 * hx);
        double vxxx = (-0.5 * surf.at(2, ix - 2) + surf.at(2, ix - 1) - surf.at(2, ix + 1) +
                       0.5 * surf.at(2, ix + 2)) /
                      (hx * hx * hx);
        double resid = vt - 1.5 * surf.at(2, ix) * vx - 0.25 * vxxx;
        worst = std::max(worst, std::abs(resid));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("two-soliton asymptotic speed from peak tracking") {
    // track on one side of the collision so the interaction phase shift
    // stays out of the baseline
    ScatteringData s{{0.6, 1.0}, {1.0, 1.0}};
    double t0 = 3.0, t1 = 5.0;
    auto peak_of = [&](double t) {
        std::vector<double> xg;
        for (double x = -9.0; x <= 9.0; x += 0.01) xg.push_back(x);
        SolitonSurface surf = soliton_surface(s, xg, {t});
        int best = 0;
        for (size_t i = 0; i < xg.size(); ++i)
            if (surf.at(0, static_cast<int>(i)) > surf.at(0, best)) best = static_cast<int>(i);
        return xg[best];
    };
    double speed = (peak_of(t1) - peak_of(t0)) / (t1 - t0);
    CHECK(std::abs(std::abs(speed) - 1.0) < 0.02); // fast soliton: |speed| = eta_max^2
}
