#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qwf/laplace.hpp"
#include "qwf/montecarlo.hpp"
#include "qwf/pinned.hpp"

using namespace qwf;

namespace {

RealMatrix scalar(double x) {
    RealMatrix M(1, 1);
    M(0, 0) = x;
    return M;
}

// orthonormalized random pins in the discrete Cameron-Martin metric
std::vector<CMVector> random_orthonormal_pins(int count, int d, int n, double T,
                                              std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<CMVector> pins;
    for (int j = 0; j < count; ++j) {
        CMVector k = CMVector::zero(d, n, T);
        for (double& x : k.hp) x = u(rng);
        for (const CMVector& prev : pins) {
            double c = inner(k, prev);
            for (size_t i = 0; i < k.hp.size(); ++i) k.hp[i] -= c * prev.hp[i];
        }
        double nm = norm(k);
        for (double& x : k.hp) x /= nm;
        pins.push_back(k);
    }
    return pins;
}

// eta for the once-iterated path integral with sigma(u) = C/2 + (T-u) D, d = 1
GridKernel iterated1_eta_kernel(double C, double D, double T, int n) {
    GridKernel k(1, n, T, true);
    auto sig = [&](double u) { return 0.5 * C + (T - u) * D; };
    auto anti = [&](double t, double s) {
        // int_{max(t,s)}^T ((u-s) + (u-t)) sigma(u) du by Simpson
        double lo = std::max(t, s);
        const int m = 64;
        double h = (T - lo) / m, acc = 0;
        if (h <= 0) return 0.0;
        auto f = [&](double u) { return ((u - s) + (u - t)) * sig(u); };
        for (int j = 0; j < m; ++j) {
            double a = lo + j * h;
            acc += (h / 6.0) * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
        }
        return acc;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = anti(k.t(i), k.t(j));
            k.at(i, j, 0, 0) = v;
            k.at(j, i, 0, 0) = v;
        }
    return k;
}

} // namespace

TEST_CASE("plucker closed forms for constant sigma") {
    double c = 0.5, T = 1.0;
    PluckerFrame frame = plucker_frame_rho_sigma(SigmaPath::constant(scalar(c), T), 512);

    // N=1 pin at the endpoint: (2 pi T)^{-1/2} e^{-cT/2}
    PinnedValue v1 = plucker_pinned(frame, 1);
    CHECK(v1.value ==
          doctest::Approx(std::exp(-0.5 * c * T) / std::sqrt(2 * M_PI * T)).epsilon(1e-9));

    // N=0 recovers the plain transform (1-cT)^{-1/2} e^{-cT/2}
    PinnedValue v0 = plucker_pinned(frame, 0);
    CHECK(v0.value ==
          doctest::Approx(std::exp(-0.5 * c * T) / std::sqrt(1 - c * T)).epsilon(1e-9));

    // sigma = 0: (2 pi)^{-1/2} at T = 1
    PluckerFrame zero = plucker_frame_rho_sigma(SigmaPath::constant(scalar(0.0), 1.0), 256);
    CHECK(plucker_pinned(zero, 1).value ==
          doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-10));
    CHECK(plucker_pinned(zero, 0).value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("plucker agrees with the grid routes on rho_sigma") {
    SigmaPath s = SigmaPath::from_function(
        1, 1.0, [](double t) { return scalar(0.3 * std::cos(2 * M_PI * t) + 0.2); },
        [](double t) { return scalar(-0.6 * M_PI * std::sin(2 * M_PI * t)); });
    PluckerFrame frame = plucker_frame_rho_sigma(s, 1024);
    int n = 256;
    GridKernel eta = rho_sigma_kernel(s, n);
    CMVector k =
        CMVector::from_function(1, n, 1.0, [](double) { return std::vector<double>{1.0}; });

    PinnedValue ode = plucker_pinned(frame, 1);
    PinnedValue grid = pinned_general(eta, {k});
    CHECK(std::abs(ode.value - grid.value) < 1e-4 * grid.value);

    // N=0 equals the spectral transform
    double spectral = laplace_spectral(eta).value;
    CHECK(std::abs(plucker_pinned(frame, 0).value - spectral) < 1e-5 * spectral);
}

TEST_CASE("d=2 rho_sigma frame against the grid route") {
    RealMatrix A(2, 2);
    A(0, 0) = 0.2;
    A(0, 1) = -0.3;
    A(1, 0) = 0.25;
    A(1, 1) = -0.1;
    double T = 1.0;
    SigmaPath s = SigmaPath::constant(A, T);
    PluckerFrame frame = plucker_frame_rho_sigma(s, 512);
    int n = 256;
    GridKernel eta = rho_sigma_kernel(s, n);
    for (int N : {1, 2}) {
        std::vector<CMVector> pins;
        for (int j = 0; j < N; ++j)
            pins.push_back(CMVector::from_function(2, n, T, [j](double) {
                std::vector<double> e(2, 0.0);
                e[j] = 1.0;
                return e;
            }));
        PinnedValue grid = pinned_general(eta, pins);
        PinnedValue ode = plucker_pinned(frame, N);
        // the d=2 discretization converges first order; n=256 sits near 1.5e-4
        CHECK(std::abs(ode.value - grid.value) < 2e-4 * grid.value);
    }
}

TEST_CASE("sample variance family") {
    double lam = 0.8, T = 1.0;
    RealMatrix D = scalar(lam);
    PluckerFrame frame = plucker_frame_sample_variance(D, T, 512);

    // N=0: E[e^{-v_D}] = (sinh(sqrt(lam))/sqrt(lam))^{-1/2} at T = 1
    double fam0 = std::exp(frame.constant_log) * plucker_pinned(frame, 0).value;
    double oracle = std::pow(std::sinh(std::sqrt(lam)) / std::sqrt(lam), -0.5);
    CHECK(fam0 == doctest::Approx(oracle).epsilon(1e-8));

    // N=1,2 against the grid route on q_{-eta}
    int n = 256;
    GridKernel eta = (-1.0) * sample_variance_kernel(D, n, T);
    CMVector k1 =
        CMVector::from_function(1, n, T, [](double) { return std::vector<double>{1.0}; });
    CMVector k2 =
        CMVector::from_function(1, n, T, [T](double t) { return std::vector<double>{t - T / 2}; });
    PinnedValue g1 = pinned_general(eta, {k1});
    CHECK(std::abs(plucker_pinned(frame, 1).value - g1.value) < 1e-4 * g1.value);
    PinnedValue g2 = pinned_general(eta, {k1, k2});
    CHECK(std::abs(plucker_pinned(frame, 2).value - g2.value) < 1e-4 * g2.value);
}

TEST_CASE("iterated-integral family") {
    double T = 1.0;
    // C = D = 0 collapses to pure Gaussian pins
    PluckerFrame trivial = plucker_frame_iterated(scalar(0.0), scalar(0.0), T, 1, 256);
    CHECK(plucker_pinned(trivial, 0).value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(plucker_pinned(trivial, 1).value ==
          doctest::Approx(1.0 / std::sqrt(2 * M_PI * T)).epsilon(1e-8));

    // nontrivial sigma: compare with the grid route through the eta kernel
    double C = 0.4, D = 0.3;
    PluckerFrame frame = plucker_frame_iterated(scalar(C), scalar(D), T, 1, 512);
    int n = 256;
    GridKernel eta = iterated1_eta_kernel(C, D, T, n);
    CHECK(lambda_max(to_operator(eta)) < 1.0);
    double spectral = laplace_spectral(eta).value;
    CHECK(std::abs(plucker_pinned(frame, 0).value - spectral) < 2e-4 * spectral);

    CMVector k1 =
        CMVector::from_function(1, n, T, [](double) { return std::vector<double>{1.0}; });
    CMVector k2 =
        CMVector::from_function(1, n, T, [T](double t) { return std::vector<double>{t - T / 2}; });
    PinnedValue g1 = pinned_general(eta, {k1});
    CHECK(std::abs(plucker_pinned(frame, 1).value - g1.value) < 2e-4 * g1.value);
    PinnedValue g2 = pinned_general(eta, {k1, k2});
    CHECK(std::abs(plucker_pinned(frame, 2).value - g2.value) < 2e-4 * g2.value);

    CHECK_THROWS_AS(plucker_frame_iterated(scalar(0.1), scalar(0.0), T, 3, 128), BadParams);
}

TEST_CASE("row-selection identity on the trivial split") {
    std::mt19937_64 rng(5);
    int n = 48, M = 3;
    GridKernel eta = 0.5 * kac_kernel(n, 1.0);
    std::vector<CMVector> pins = random_orthonormal_pins(M, 1, n, 1.0, rng);
    PluckerFrame frame = plucker_frame_trivial(eta, pins);
    for (int N = 0; N <= M; ++N) {
        RealMatrix direct = plucker_JN_direct(eta, pins, N);
        RealMatrix selected = frame.JN(N);
        CHECK((direct - selected).frobenius() < 1e-10 * (1.0 + direct.frobenius()));
    }
}

TEST_CASE("trivial split reproduces the projected-determinant route exactly") {
    std::mt19937_64 rng(7);
    int n = 40, M = 3;
    GridKernel eta = 0.45 * kac_kernel(n, 1.0);
    std::vector<CMVector> pins = random_orthonormal_pins(M, 1, n, 1.0, rng);
    PluckerFrame frame = plucker_frame_trivial(eta, pins);

    // N = 0 equals the spectral transform; both use the same discretization
    double spectral = laplace_spectral(eta).value;
    CHECK(plucker_pinned(frame, 0).value == doctest::Approx(spectral).epsilon(1e-10));
    for (int N = 1; N <= M; ++N) {
        std::vector<CMVector> sub(pins.begin(), pins.begin() + N);
        PinnedValue general = pinned_general(eta, sub);
        PinnedValue plucker = plucker_pinned(frame, N);
        CHECK(plucker.value == doctest::Approx(general.value).epsilon(1e-10));
    }
}

TEST_CASE("pin normalization: bookkeeping pins cancel, pinned ones rescale the delta") {
    std::mt19937_64 rng(11);
    int n = 40;
    GridKernel eta = 0.4 * kac_kernel(n, 1.0);
    std::vector<CMVector> pins = random_orthonormal_pins(2, 1, n, 1.0, rng);
    PluckerFrame base = plucker_frame_trivial(eta, pins);
    std::vector<CMVector> scaled = pins;
    double s0 = 2.0, s1 = 0.3;
    for (double& x : scaled[0].hp) x *= s0;
    for (double& x : scaled[1].hp) x *= s1;
    PluckerFrame rescaled = plucker_frame_trivial(eta, scaled);
    // pins beyond the pinned count only carry bookkeeping: N=0 is invariant,
    // N=1 picks up 1/s0 from delta_0(s0 X) = delta_0(X)/s0, and so on
    CHECK(plucker_pinned(base, 0).value ==
          doctest::Approx(plucker_pinned(rescaled, 0).value).epsilon(1e-9));
    CHECK(plucker_pinned(base, 1).value / s0 ==
          doctest::Approx(plucker_pinned(rescaled, 1).value).epsilon(1e-9));
    CHECK(plucker_pinned(base, 2).value / (s0 * s1) ==
          doctest::Approx(plucker_pinned(rescaled, 2).value).epsilon(1e-9));
}

TEST_CASE("pinned_general drift, dependence, and error paths") {
    int n = 48;
    GridKernel eta = zero_kernel(1, n, 1.0);
    CMVector k =
        CMVector::from_function(1, n, 1.0, [](double) { return std::vector<double>{1.0}; });

    // eta = 0, unit pin: Gaussian density of the pinned functional at zero
    PinnedValue v = pinned_general(eta, {k});
    CHECK(v.value == doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-10));

    // pinning twice on the same direction: dependent pins
    CHECK_THROWS_AS(pinned_general(eta, {k, k}), DependentPins);

    // drift orthogonal to the pin passes through the projected resolvent
    GridKernel kac = 0.5 * kac_kernel(n, 1.0);
    CMVector h = CMVector::from_function(
        1, n, 1.0, [](double t) { return std::vector<double>{std::cos(2 * M_PI * t)}; });
    PinnedValue with_h = pinned_general(kac, {k}, &h);
    PinnedValue base = pinned_general(kac, {k});
    CHECK(with_h.value > base.value);

    GridKernel heavy = rank_one_kernel(k, 1.2);
    CHECK_THROWS_AS(pinned_general(heavy, {k}), NotIntegrable);
}

TEST_CASE("linear-sigma pinned value equals the endpoint density") {
    // sigma(t) = C/2 + (T-t) D, pin theta(T) = 0: the pinned transform of
    // int <sigma theta, d theta> equals e^{-CT/4 - T^2 tr D/4} times the
    // weighted endpoint density at the origin, the hyperbolic kernel value
    double T = 1.0, C = 0.6, D = -1.21; // D = -lambda^2
    double lam = std::sqrt(-D);
    RealMatrix half_C = scalar(0.5 * C), Dm = scalar(D);
    SigmaPath sigma = SigmaPath::linear(half_C, Dm, T); // C/2 + (T-t) D
    PluckerFrame frame = plucker_frame_rho_sigma(sigma, 512);
    double got = plucker_pinned(frame, 1).value;
    double mehler00 = std::sqrt(lam / (2.0 * M_PI * std::sinh(lam * T)));
    double expect = std::exp(-0.25 * C * T - 0.25 * T * T * D) * mehler00;
    CHECK(got == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("condition-A decompositions split the operator exactly") {
    // rho_sigma: finite-rank part has rank <= d, split exact, Volterra det2 -> 1
    RealMatrix A(2, 2);
    A(0, 0) = 0.2;
    A(0, 1) = -0.35;
    A(1, 0) = 0.15;
    A(1, 1) = 0.1;
    int n = 64;
    ConditionADecomposition dec = decompose_condition_A_rho_sigma(SigmaPath::constant(A, 1.0), n);
    CHECK(dec.split_defect < 1e-12);
    // the averaged skew diagonal cells leave det(I - dt sigma_A) = 1 + O(dt^2)
    // per node, an O(1/n) total that vanishes with refinement
    CHECK(std::abs(dec.log_det2_AI) < 2e-3);
    ConditionADecomposition fine = decompose_condition_A_rho_sigma(SigmaPath::constant(A, 1.0), 4 * n);
    CHECK(std::abs(fine.log_det2_AI) < std::abs(dec.log_det2_AI) / 3.0);
    std::vector<double> sv = sym_eigenvalues(dec.A_F.transposed() * dec.A_F);
    int rank = 0;
    for (double s : sv)
        if (s > 1e-16 * sv.front()) ++rank;
    CHECK(rank <= dec.rank_bound);

    // sample variance: strictly triangular A_I, det2 exactly one
    RealMatrix D(1, 1);
    D(0, 0) = 0.9;
    dec = decompose_condition_A_sample_variance(D, 1.0, n);
    CHECK(dec.split_defect < 1e-12);
    CHECK(dec.log_det2_AI == 0.0);
    sv = sym_eigenvalues(dec.A_F.transposed() * dec.A_F);
    rank = 0;
    for (double s : sv)
        if (s > 1e-16 * sv.front()) ++rank;
    CHECK(rank <= dec.rank_bound);

    // trivial split on a generic integrable kernel: det2(I - A_I) away from zero
    std::mt19937_64 rng(17);
    GridKernel eta = 0.5 * kac_kernel(48, 1.0);
    std::vector<CMVector> pins = random_orthonormal_pins(2, 1, 48, 1.0, rng);
    dec = decompose_condition_A_trivial(eta, pins);
    CHECK(dec.split_defect < 1e-12);
    CHECK(std::isfinite(dec.log_det2_AI));
    CHECK(std::exp(dec.log_det2_AI) > 1e-6);
}

TEST_CASE("J_p solves the defining integral equation on the grid") {
    // sample-variance family, d = 1: closed-form J' against the grid A_I
    double lam = 0.9, T = 1.0;
    int n = 2048;
    RealMatrix D(1, 1);
    D(0, 0) = lam;
    ConditionADecomposition dec = decompose_condition_A_sample_variance(D, T, n);
    double p1 = 0.7, p2 = -0.4, r = std::sqrt(lam);
    auto Jp = [&](double t) {
        return (p1 - 0.5 * T * p2) * std::cosh(r * t) + (p2 / r) * std::sinh(r * t);
    };
    std::vector<double> j(n);
    double dt = T / n;
    for (int i = 0; i < n; ++i) j[i] = Jp((i + 0.5) * dt);
    std::vector<double> AIj = dec.A_I * j;
    double worst = 0;
    for (int i = 0; i < n; ++i) {
        double t = (i + 0.5) * dt;
        double rhs = p1 + (t - 0.5 * T) * p2;
        worst = std::max(worst, std::abs(j[i] - AIj[i] - rhs));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("pinned Kac value against the smoothed Monte Carlo oracle") {
    int n = 128;
    GridKernel eta = 0.6 * kac_kernel(n, 1.0);
    CMVector k =
        CMVector::from_function(1, n, 1.0, [](double) { return std::vector<double>{1.0}; });
    PinnedValue analytic = pinned_general(eta, {k});

    PathBatch b;
    b.n_paths = 200000;
    b.n_steps = n;
    b.d = 1;
    b.T = 1.0;
    b.seed = 19;
    PinnedSpec spec;
    spec.kind = PinnedSpec::Kind::eta_kernel;
    spec.eta = &eta;
    PinnedEstimate mc = pinned_estimate(spec, 1, 0.25, b);
    CHECK(std::abs(mc.value - analytic.value) < 3.0 * mc.stderr_ + mc.bias_band + 3e-3);
}
