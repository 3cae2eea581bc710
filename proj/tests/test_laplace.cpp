#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qwf/laplace.hpp"

using namespace qwf;

namespace {

RealMatrix scalar(double x) {
    RealMatrix M(1, 1);
    M(0, 0) = x;
    return M;
}

CMVector unit_h(int d, int n, double T, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CMVector h = CMVector::zero(d, n, T);
    for (double& x : h.hp) x = u(rng);
    double nm = norm(h);
    for (double& x : h.hp) x /= nm;
    return h;
}

// truncated product over the analytic Kac spectrum, frozen oracle for
// E[exp(-lambda int_0^1 theta^2)] = prod_k (1 + 2 lambda / ((k-1/2)^2 pi^2))^{-1/2}
double kac_product(double lambda, int terms = 200000) {
    double logv = 0;
    for (int k = 1; k <= terms; ++k) {
        double mu = 1.0 / ((k - 0.5) * (k - 0.5) * M_PI * M_PI);
        logv += -0.5 * std::log1p(2.0 * lambda * mu);
    }
    return std::exp(logv);
}

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

TEST_CASE("is_exp_integrable") {
    IntegrabilityReport rep = is_exp_integrable(zero_kernel(1, 16, 1.0));
    CHECK(rep.integrable);
    CHECK(rep.upper_bound == doctest::Approx(1.0));

    std::mt19937_64 rng(3);
    CMVector h = unit_h(1, 24, 1.0, rng);
    CHECK(is_exp_integrable(rank_one_kernel(h, 0.5)).integrable);
    CHECK_FALSE(is_exp_integrable(rank_one_kernel(h, 1.0)).integrable);
}

TEST_CASE("laplace_spectral closed forms") {
    CHECK(laplace_spectral(zero_kernel(1, 16, 1.0)).value == doctest::Approx(1.0));

    // rank one a h@h: 1-D Gaussian integral E[e^{a(Z^2-1)/2}] = ((1-a)e^a)^{-1/2}
    std::mt19937_64 rng(5);
    CMVector h = unit_h(1, 32, 1.0, rng);
    double a = 0.55;
    LaplaceResult r = laplace_spectral(rank_one_kernel(h, a));
    CHECK(r.value == doctest::Approx(1.0 / std::sqrt((1 - a) * std::exp(a))).epsilon(1e-10));

    // drift: E[e^{a(Z^2-1)/2 + beta Z}] adds exp(beta^2 / (2(1-a)))
    double beta = 0.8;
    CMVector bh = h;
    for (double& x : bh.hp) x *= beta;
    r = laplace_spectral(rank_one_kernel(h, a), &bh);
    double expect = 1.0 / std::sqrt((1 - a) * std::exp(a)) * std::exp(beta * beta / (2 * (1 - a)));
    CHECK(r.value == doctest::Approx(expect).epsilon(1e-10));
    CHECK(r.diag.shift_term == doctest::Approx(beta * beta / (2 * (1 - a))).epsilon(1e-9));

    CHECK_THROWS_AS(laplace_spectral(rank_one_kernel(h, 1.2)), NotIntegrable);
}

TEST_CASE("laplace_spectral matches the Kac eigenvalue product") {
    // E[exp(-lambda int theta^2)] = e^{-lambda tr c} E[e^{q_{-2 lambda c}}],
    // with tr c the constant from h = 2 q_c + ||kappa||_2^2
    double lambda = 0.5;
    int n = 256;
    GridKernel c = kac_kernel(n, 1.0);
    LaplaceResult r = laplace_spectral((-2.0 * lambda) * c);
    double value = std::exp(-lambda * trace(to_operator(c))) * r.value;
    double oracle = kac_product(lambda);
    CHECK(std::abs(value - oracle) < 5e-3 * oracle);
    CHECK(oracle == doctest::Approx(1.0 / std::sqrt(std::cosh(1.0))).epsilon(1e-4));
}

TEST_CASE("laplace_ode closed forms") {
    OdeLaplace z = laplace_ode(SigmaPath::constant(scalar(0.0), 1.0));
    CHECK(z.riccati.value == doctest::Approx(1.0));
    CHECK(z.second_order.value == doctest::Approx(1.0));

    // d=1, sigma = c: E[e^{p_sigma}] = (1-cT)^{-1/2} e^{-cT/2}
    double c = 0.5, T = 1.0;
    OdeLaplace r = laplace_ode(SigmaPath::constant(scalar(c), T));
    double expect = std::exp(-0.5 * c * T) / std::sqrt(1 - c * T);
    CHECK(r.riccati.value == doctest::Approx(expect).epsilon(1e-7));
    CHECK(r.second_order.value == doctest::Approx(expect).epsilon(1e-7));

    // d=2, sigma = (a/2) J on [0,1]: value = 1/cos(a/2)
    double a = 0.7;
    RealMatrix A(2, 2);
    A(0, 1) = -0.5 * a;
    A(1, 0) = 0.5 * a;
    r = laplace_ode(SigmaPath::constant(A, 1.0));
    CHECK(r.riccati.value == doctest::Approx(1.0 / std::cos(0.5 * a)).epsilon(1e-6));
    CHECK(r.second_order.value == doctest::Approx(1.0 / std::cos(0.5 * a)).epsilon(1e-6));

    CHECK_THROWS_AS(laplace_ode(SigmaPath::constant(scalar(1.2), 1.0)), Blowup);
}

TEST_CASE("drifted transform agrees across routes and with the Gaussian oracle") {
    double c = 0.5, T = 1.0;
    int n = 256;
    SigmaPath sigma = SigmaPath::constant(scalar(c), T);
    CMVector h = CMVector::from_function(1, n, T, [](double) { return std::vector<double>{1.0}; });

    // oracle: E[exp((c/2)(theta(T)^2 - T) + theta(T))]
    double oracle = std::exp(-0.5 * c * T) / std::sqrt(1 - c * T) * std::exp(T / (2 * (1 - c * T)));
    LaplaceResult spec = laplace_spectral(rho_sigma_kernel(sigma, n), &h);
    CHECK(spec.value == doctest::Approx(oracle).epsilon(1e-9));

    OdeLaplace ode = laplace_ode(sigma, &h, 512);
    CHECK(ode.riccati.value == doctest::Approx(oracle).epsilon(5e-3));
    CHECK(ode.second_order.value == doctest::Approx(oracle).epsilon(5e-3));
}

TEST_CASE("route agreement on random smooth sigma") {
    std::mt19937_64 rng(11);
    int done = 0;
    while (done < 3) {
        int d = 1 + static_cast<int>(rng() % 2);
        SigmaPath s = random_smooth_sigma(d, 1.0, rng, 0.18);
        int n = 256;
        GridKernel rho = rho_sigma_kernel(s, n);
        double lam = lambda_max(to_operator(rho));
        if (lam >= 0.9) continue;
        ++done;
        LaplaceResult spec = laplace_spectral(rho);
        OdeLaplace ode = laplace_ode(s, nullptr, 512);
        CHECK(std::abs(spec.value - ode.riccati.value) <= 5e-3 * spec.value);
        CHECK(std::abs(spec.value - ode.second_order.value) <= 5e-3 * spec.value);
    }
}

TEST_CASE("drifted routes agree at d = 2") {
    std::mt19937_64 rng(19);
    SigmaPath s = random_smooth_sigma(2, 1.0, rng, 0.12);
    int n = 256;
    GridKernel rho = rho_sigma_kernel(s, n);
    REQUIRE(lambda_max(to_operator(rho)) < 0.9);
    CMVector h = CMVector::from_function(2, n, 1.0, [](double t) {
        return std::vector<double>{std::cos(M_PI * t), 0.5 * t};
    });
    LaplaceResult spec = laplace_spectral(rho, &h);
    OdeLaplace ode = laplace_ode(s, &h, 512);
    CHECK(std::abs(spec.value - ode.riccati.value) <= 5e-3 * spec.value);
    CHECK(std::abs(spec.value - ode.second_order.value) <= 5e-3 * spec.value);
}

TEST_CASE("linear sigma against the matrix-function closed form") {
    // sigma(t) = D1 + (t-T) D2 with symmetric D1, D2: the transform of
    // p_sigma + (1/2) int tr sigma_S equals
    // det(ch[i T sqrt(D2)] - T sh[i T sqrt(D2)] D1)^{-1/2}
    double T = 1.0;
    auto closed = [&](double a, double b) {
        // scalar: cos/cosh branch through the complex series
        ComplexMatrix M(1, 1);
        M(0, 0) = cplx(0.0, T) * std::sqrt(cplx(b));
        MatrixFunctions f = matrix_functions(M, false);
        cplx v = f.ch(0, 0) - T * f.sh(0, 0) * a;
        return 1.0 / std::sqrt(v.real());
    };
    for (double a : {0.0, 0.3})
        for (double b : {-1.0, 0.8}) {
            RealMatrix D1 = scalar(a), D2 = scalar(b);
            // h = p_sigma + (1/2) int tr sigma_S with sigma(t) = D1 + (T-t) D2
            // (the Ito expansion of (1/2) int <D2 theta, theta> dt)
            SigmaPath sigma = SigmaPath::linear(D1, D2, T);
            OdeLaplace ode = laplace_ode(sigma, nullptr, 512);
            double trace_sym = a * T + 0.5 * b * T * T;
            double got = ode.second_order.value * std::exp(0.5 * trace_sym);
            CHECK(got == doctest::Approx(closed(a, b)).epsilon(1e-7));
            got = ode.riccati.value * std::exp(0.5 * trace_sym);
            CHECK(got == doctest::Approx(closed(a, b)).epsilon(1e-6));
        }
}

TEST_CASE("closed_form_levy_area") {
    CHECK(closed_form_levy_area(0.0, 0.0) == doctest::Approx(1.0));
    for (double beta : {0.25, 0.5, 1.0})
        CHECK(closed_form_levy_area(beta, 0.0) ==
              doctest::Approx(1.0 / std::cosh(0.5 * beta)).epsilon(1e-15));
    CHECK_THROWS_AS(closed_form_levy_area(4.0, -0.5), DomainError);
    CHECK_THROWS_AS(closed_form_levy_area(1.0, 0.8), DomainError);

    CHECK(closed_form_levy_area_conditional(0.0) == doctest::Approx(1.0));
    CHECK(closed_form_levy_area_conditional(1.0) ==
          doctest::Approx(0.5 / std::sinh(0.5)).epsilon(1e-14));
}

TEST_CASE("charfn_ode") {
    SigmaPath sigma = SigmaPath::constant(scalar(0.5), 1.0);
    CHECK(charfn_ode(sigma, 0.0) == cplx(1.0));

    // d=1, sigma = c: e^{-i l cT/2} (1 - i l cT)^{-1/2}
    for (double lam : {0.5, 1.0, 2.0}) {
        cplx got = charfn_ode(sigma, lam);
        cplx expect = std::exp(cplx(0, -lam * 0.25)) / std::sqrt(cplx(1.0, -lam * 0.5));
        CHECK(std::abs(got - expect) < 1e-7);
        CHECK(std::abs(got) <= 1.0 + 1e-12);
        // conjugate symmetry
        cplx mirrored = charfn_ode(sigma, -lam);
        CHECK(std::abs(mirrored - std::conj(got)) < 1e-7);
    }

    // area: sigma = (1/2) J on [0,1], |charfn(beta)| = 1/cosh(beta/2)
    RealMatrix A(2, 2);
    A(0, 1) = -0.5;
    A(1, 0) = 0.5;
    SigmaPath area = SigmaPath::constant(A, 1.0);
    for (double beta : {0.25, 0.5, 1.0}) {
        cplx got = charfn_ode(area, beta);
        CHECK(std::abs(std::abs(got) - 1.0 / std::cosh(0.5 * beta)) < 1e-5);
    }
}

TEST_CASE("levy_density") {
    std::vector<double> xs{-2.0, -1.0, -0.5, 0.5, 1.0, 2.0};

    // zero form: empty spectrum, vanishing density
    LevyDensitySpec z = levy_density(zero_kernel(1, 16, 1.0), xs);
    CHECK(z.eigenvalues.empty());
    for (double f : z.f) CHECK(f == 0.0);

    // rank one a > 0: f(x) = e^{-x/a}/(2x) on x > 0, zero on x < 0
    std::mt19937_64 rng(13);
    CMVector h = unit_h(1, 32, 1.0, rng);
    double a = 0.6;
    LevyDensitySpec spec = levy_density(rank_one_kernel(h, a), xs);
    REQUIRE(spec.eigenvalues.size() == 1);
    for (size_t i = 0; i < xs.size(); ++i) {
        double expect = xs[i] > 0 ? std::exp(-xs[i] / a) / (2 * xs[i]) : 0.0;
        CHECK(spec.f[i] == doctest::Approx(expect).epsilon(1e-9));
    }
    CHECK(spec.exponent_error < 1e-6);

    // Kac operator at n = 256: exponent quadrature within 1e-4 for |l| <= 2
    LevyDensitySpec kac = levy_density(kac_kernel(256, 1.0), xs);
    CHECK(kac.tail < 1e-8);
    CHECK(kac.exponent_error < 1e-4);

    // sub-threshold modes trip the tail guard once the budget shrinks
    CHECK_THROWS_AS(levy_density(1e-8 * kac_kernel(32, 1.0), xs, 1e-30), TailTooHeavy);
}

TEST_CASE("harmonic_laplace") {
    CHECK(harmonic_laplace(zero_kernel(1, 16, 1.0)).value == doctest::Approx(1.0));

    // E[e^{-h(kappa)}] with kappa = indicator: (cosh 1)^{-1/2}
    int n = 256;
    LaplaceResult r = harmonic_laplace(indicator_base_kernel(n, 1.0));
    CHECK(std::abs(r.value - 1.0 / std::sqrt(std::cosh(1.0))) < 5e-3);

    // scaling: sqrt(2) kappa gives E[e^{-int theta^2}] = (cosh sqrt(2))^{-1/2}
    GridKernel k2 = std::sqrt(2.0) * indicator_base_kernel(n, 1.0);
    r = harmonic_laplace(k2);
    CHECK(std::abs(r.value - 1.0 / std::sqrt(std::cosh(std::sqrt(2.0)))) < 5e-3);

    // monotone decrease of lambda -> E[e^{-lambda h(kappa)}]
    double prev = 1.0 + 1e-9;
    for (double lam : {0.2, 0.6, 1.0, 1.5, 2.5}) {
        double val = harmonic_laplace(std::sqrt(lam) * indicator_base_kernel(64, 1.0)).value;
        CHECK(val < prev);
        prev = val;
    }

    // c(kappa;x) version sums over an orthonormal basis consistently:
    // value(x=e1)*value(x=e2) = value(full) for diagonal structures
    GridKernel kd(2, 32, 1.0, false);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < i; ++j) {
            kd.at(i, j, 0, 0) = 1.0;
            kd.at(i, j, 1, 1) = 0.5;
        }
    std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
    double vx = harmonic_laplace(kd, &e1).value * harmonic_laplace(kd, &e2).value;
    CHECK(harmonic_laplace(kd).value == doctest::Approx(vx).epsilon(1e-9));
}

TEST_CASE("positivity and det2 sign") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 4; ++rep) {
        SigmaPath s = random_smooth_sigma(1, 1.0, rng, 0.3);
        GridKernel rho = rho_sigma_kernel(s, 64);
        if (lambda_max(to_operator(rho)) >= 1.0) continue;
        LaplaceResult r = laplace_spectral(rho);
        CHECK(r.value > 0.0);
        Det2 d2 = det2(to_operator(rho), -1.0);
        CHECK(d2.sign == 1);
    }
}
