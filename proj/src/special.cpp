#include "qwf/special.hpp"

#include "qwf/sigma.hpp"

#include <algorithm>
#include <cmath>

namespace qwf {

namespace {

// k-th derivative at zero from 64 trapezoid nodes on |z| = radius; spectrally
// accurate for integrands analytic past the circle. Extended precision keeps
// the k! r^{-k} amplification of node rounding below 1e-11 through k = 12.
using lcplx = std::complex<long double>;

std::vector<cplx> cauchy_derivatives(const std::function<lcplx(lcplx)>& f, int K,
                                     long double radius = 0.5L, int nodes = 64) {
    std::vector<lcplx> samples(nodes);
    for (int j = 0; j < nodes; ++j) {
        long double th = 2.0L * M_PIl * j / nodes;
        samples[j] = f(lcplx(radius * std::cos(th), radius * std::sin(th)));
    }
    std::vector<cplx> der(K + 1);
    long double factorial = 1.0L;
    for (int k = 0; k <= K; ++k) {
        if (k > 0) factorial *= k;
        lcplx acc = 0.0L;
        for (int j = 0; j < nodes; ++j) {
            long double th = 2.0L * M_PIl * j / nodes;
            acc += samples[j] * lcplx(std::cos(k * th), -std::sin(k * th));
        }
        acc = factorial * acc / (static_cast<long double>(nodes) * std::pow(radius, k));
        der[k] = cplx(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
    }
    return der;
}

lcplx zsinh_ratio(lcplx z) { // z / sinh(z), removable at zero
    if (std::abs(z) < 1e-6L) return 1.0L / (1.0L + z * z / 6.0L);
    return z / std::sinh(z);
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

cplx ipow(int k) {
    switch (k & 3) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

} // namespace

MomentTable moment_table(int K) {
    if (K < 0 || K > 12) throw BadParams("moment table supports 0 <= K <= 12");
    MomentTable t;
    t.K = K;
    // generating functions: E[e^{i b (s+ i|th|^2/4)}] = e^{-b/2},
    // E[e^{i z s}] = sech(z/2), E[e^{i a s}|th(1)=0] = (a/2)/sinh(a/2)
    auto mixed_d = cauchy_derivatives([](lcplx b) { return std::exp(-0.5L * b); }, K);
    auto area_d = cauchy_derivatives([](lcplx z) { return 1.0L / std::cosh(0.5L * z); }, K);
    auto cond_d = cauchy_derivatives([](lcplx a) { return zsinh_ratio(0.5L * a); }, K);
    t.mixed.resize(K + 1);
    t.area.resize(K + 1);
    t.conditional.resize(K + 1);
    for (int k = 0; k <= K; ++k) {
        cplx inv_ik = ipow((4 - (k & 3)) & 3); // 1 / i^k
        t.mixed[k] = inv_ik * mixed_d[k];
        t.area[k] = inv_ik * area_d[k];
        t.conditional[k] = inv_ik * cond_d[k];
    }
    // sanity against instability of the trapezoid extraction
    if (std::abs(t.mixed[0] - 1.0) > 1e-12 || std::abs(t.area[0] - 1.0) > 1e-12 ||
        std::abs(t.conditional[0] - 1.0) > 1e-12)
        throw DifferentiationUnstable();
    return t;
}

double euler_poly(int n, double xi) {
    if (n < 0 || n > 10) throw BadParams("need 0 <= n <= 10");
    MomentTable t = moment_table(n);
    cplx acc = 0.0;
    for (int k = 0; k <= n; ++k)
        acc += binomial(n, k) * std::pow(1.0 - 2.0 * xi, k) * t.mixed[k] * t.area[n - k];
    acc *= ipow(n);
    return acc.real();
}

double bernoulli_poly(int n, double xi) {
    if (n < 0 || n > 10) throw BadParams("need 0 <= n <= 10");
    MomentTable t = moment_table(n);
    cplx acc = 0.0;
    for (int k = 0; k <= n; ++k)
        acc += binomial(n, k) * std::pow(1.0 - 2.0 * xi, k) * t.mixed[k] * t.conditional[n - k];
    acc *= ipow(n);
    return acc.real();
}

double bernoulli_poly_classical(int n, double xi) {
    // Bernoulli numbers b_k by the defining recurrence, then the binomial shift
    std::vector<double> b(n + 1, 0.0);
    b[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
        double s = 0;
        for (int j = 0; j < k; ++j) s += binomial(k + 1, j) * b[j];
        b[k] = -s / (k + 1);
    }
    double acc = 0;
    for (int k = 0; k <= n; ++k) acc += binomial(n, k) * b[k] * std::pow(xi, n - k);
    return acc;
}

double euler_poly_classical(int n, double xi) {
    // Euler numbers from cosh(t) sech(t) = 1, then E_n(x) in powers of (x-1/2)
    std::vector<double> e(n + 1, 0.0);
    e[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
        if (k % 2 == 1) continue;
        double s = 0;
        for (int m = 1; 2 * m <= k; ++m) s += binomial(k, 2 * m) * e[k - 2 * m];
        e[k] = -s;
    }
    double acc = 0;
    for (int k = 0; k <= n; ++k)
        acc += binomial(n, k) * (e[k] / std::pow(2.0, k)) * std::pow(xi - 0.5, n - k);
    return acc;
}

namespace {

// radius below the nearest pole of 1/(e^{-w} - xi e^w) with w = w_scale(1-xi)z;
// the poles sit at w = -(1/2)log(xi) modulo i pi
long double eulerian_radius(double xi, double w_scale) {
    long double dist;
    if (xi > 0) dist = 0.5L * std::abs(std::log(static_cast<long double>(xi)));
    else if (xi < 0)
        dist = 0.5L * std::sqrt(std::pow(std::log(static_cast<long double>(-xi)), 2.0L) +
                                M_PIl * M_PIl);
    else
        return 0.5L;
    dist /= static_cast<long double>(w_scale * (1.0 - xi));
    return std::min(0.5L, 0.6L * dist);
}

// E[{i(1-xi) s + ((1+xi)/4)|th|^2}^j] from the type-A generating function
std::vector<cplx> eulerian_base_moments(int n, double xi) {
    auto gen = [xi](lcplx z) {
        lcplx w = 0.5L * (1.0L - static_cast<long double>(xi)) * z;
        return (1.0L - static_cast<long double>(xi)) /
               (std::exp(-w) - static_cast<long double>(xi) * std::exp(w));
    };
    return cauchy_derivatives(gen, n, eulerian_radius(xi, 0.5));
}

} // namespace

double eulerian_poly_A(int n, double xi) {
    if (n < 0 || n > 8) throw BadParams("need 0 <= n <= 8");
    if (std::abs(xi) >= 1.0) throw BadParams("need |xi| < 1");
    std::vector<cplx> base = eulerian_base_moments(n, xi);
    cplx acc = 0.0;
    for (int k = 0; k <= n; ++k)
        acc += binomial(n, k) * std::pow(1.0 - xi, k) * std::pow(0.5, k) * base[n - k];
    return acc.real();
}

double eulerian_poly_B(int n, double xi) {
    if (n < 0 || n > 8) throw BadParams("need 0 <= n <= 8");
    if (std::abs(xi) >= 1.0) throw BadParams("need |xi| < 1");
    auto gen = [xi](lcplx z) {
        lcplx w = (1.0L - static_cast<long double>(xi)) * z;
        return (1.0L - static_cast<long double>(xi)) /
               (std::exp(-w) - static_cast<long double>(xi) * std::exp(w));
    };
    return cauchy_derivatives(gen, n, eulerian_radius(xi, 1.0))[n].real();
}

double eulerian_poly_A_series(int n, double xi) {
    if (std::abs(xi) >= 1.0) throw BadParams("need |xi| < 1");
    double acc = 0, xk = 1.0;
    for (int k = 0; k < 100000; ++k) {
        double term = std::pow(k + 1.0, n) * xk;
        acc += term;
        xk *= xi;
        if (std::abs(term) < 1e-16 * std::max(std::abs(acc), 1.0) && k > n) break;
    }
    return acc * std::pow(1.0 - xi, n + 1);
}

double eulerian_poly_B_series(int n, double xi) {
    if (std::abs(xi) >= 1.0) throw BadParams("need |xi| < 1");
    double acc = 0, xk = 1.0;
    for (int k = 0; k < 100000; ++k) {
        double term = std::pow(2.0 * k + 1.0, n) * xk;
        acc += term;
        xk *= xi;
        if (std::abs(term) < 1e-16 * std::max(std::abs(acc), 1.0) && k > n) break;
    }
    return acc * std::pow(1.0 - xi, n + 1);
}

// ------------------------------------------------------------- scattering

ScatteringData scattering_from_measure(const DiscreteMeasure& a) {
    size_t n = a.p.size();
    if (a.c.size() != n || n == 0) throw BadParams("need matching p and c lists");
    for (double cj : a.c)
        if (cj <= 0) throw BadParams("masses must be positive");
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (a.p[i] == a.p[j]) throw BadParams("points must be distinct");
    for (size_t j = 0; j + 1 < n; ++j)
        if (std::abs(a.p[j]) > std::abs(a.p[j + 1]) + 1e-14)
            throw BadParams("need |p_j| <= |p_{j+1}| ordering");

    // locate the equal-modulus pairs (p_j > 0, p_{j+1} = -p_j)
    std::vector<bool> pair_head(n, false), in_pair(n, false);
    for (size_t j = 0; j + 1 < n; ++j) {
        if (in_pair[j]) continue;
        if (std::abs(std::abs(a.p[j]) - std::abs(a.p[j + 1])) < 1e-14 * (1.0 + std::abs(a.p[j]))) {
            if (!(a.p[j] > 0 && a.p[j + 1] == -a.p[j]))
                throw BadParams("equal moduli must come as (p, -p) with p > 0");
            pair_head[j] = true;
            in_pair[j] = in_pair[j + 1] = true;
        }
    }

    double csum = 0;
    for (double cj : a.c) csum += cj * cj;
    double pmax = std::abs(a.p[n - 1]);

    auto G = [&](double eta) {
        double s = 1.0;
        for (size_t j = 0; j < n; ++j) s += a.c[j] * a.c[j] / (a.p[j] * a.p[j] - eta * eta);
        return s;
    };

    std::vector<double> eta(n), mass(n);
    for (size_t k = 0; k < n; ++k) {
        if (pair_head[k]) {
            eta[k] = a.p[k];
            continue;
        }
        if (in_pair[k]) { // tail of a pair: the root lives above the pair modulus
        }
        double lo = std::abs(a.p[k]);
        double hi = (k + 1 < n) ? std::abs(a.p[k + 1]) : std::sqrt(pmax * pmax + csum) + 1.0;
        double span = hi - lo;
        lo += 1e-12 * std::max(span, 1.0);
        hi -= 1e-12 * std::max(span, 1.0);
        double glo = G(lo), ghi = G(hi);
        if (glo > 0 || ghi < 0) throw RootBracketFailure("no sign change in (" +
                                                         std::to_string(lo) + ", " +
                                                         std::to_string(hi) + ")");
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (G(mid) < 0) lo = mid;
            else hi = mid;
            if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
        }
        eta[k] = 0.5 * (lo + hi);
    }

    for (size_t j = 0; j < n; ++j) {
        double prod_eta = 1.0;
        for (size_t k = 0; k < n; ++k)
            if (k != j) prod_eta *= (eta[k] + eta[j]) / (eta[k] - eta[j]);
        if (pair_head[j]) {
            double prod_p = 1.0;
            for (size_t k = 0; k < n; ++k) {
                if (k == j || k == j + 1) continue;
                prod_p *= (a.p[k] + eta[j]) / (a.p[k] - eta[j]);
            }
            mass[j] = 2.0 * eta[j] * (a.c[j + 1] * a.c[j + 1]) / (a.c[j] * a.c[j]) * prod_eta *
                      prod_p;
        } else {
            double prod_p = 1.0;
            for (size_t k = 0; k < n; ++k) prod_p *= (a.p[k] + eta[j]) / (a.p[k] - eta[j]);
            mass[j] = -2.0 * eta[j] * prod_eta * prod_p;
        }
        if (!(mass[j] > 0)) throw NonPositiveMass("m_" + std::to_string(j + 1) + " <= 0");
    }

    ScatteringData out;
    out.eta = eta;
    out.m = mass;
    for (size_t j = 0; j + 1 < n; ++j)
        if (!(out.eta[j] < out.eta[j + 1])) throw RootBracketFailure("eta not increasing");
    return out;
}

namespace {

RealMatrix gram_of(const ScatteringData& s, double x) {
    int n = static_cast<int>(s.eta.size());
    RealMatrix G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            G(i, j) = std::sqrt(s.m[i] * s.m[j]) * std::exp(-(s.eta[i] + s.eta[j]) * x) /
                      (s.eta[i] + s.eta[j]);
    return G;
}

// log det(I + e^{Ex} G(0)^{-1} e^{Ex}), the remainder after factoring the
// exact linear bulk -2x tr E + log det G(0) out of log det(I+G(x))
double log_det_tau_remainder(const ScatteringData& s, double x) {
    int n = static_cast<int>(s.eta.size());
    RealMatrix Ginv = inverse(gram_of(s, 0.0));
    RealMatrix H(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            H(i, j) = std::exp(s.eta[i] * x) * Ginv(i, j) * std::exp(s.eta[j] * x);
    return log_det_spd(sym_part(H + RealMatrix::identity(n)));
}

} // namespace

double log_det_tau(const ScatteringData& s, double x) {
    int n = static_cast<int>(s.eta.size());
    RealMatrix M = gram_of(s, x) + RealMatrix::identity(n);
    return log_det_spd(M);
}

namespace {

double second_derivative_logdet(const std::function<double(double)>& f, double x) {
    auto five_point = [&](double h) {
        return (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x) + 16 * f(x + h) - f(x + 2 * h)) /
               (12.0 * h * h);
    };
    double h = 1e-3;
    double coarse = five_point(h), fine = five_point(0.5 * h);
    return (16.0 * fine - coarse) / 15.0;
}

// exact (d/dx)^2 log det(I+G): G' = -(EG + GE) with E = diag(eta), and G
// commutes with M = (I+G)^{-1}, which collapses the derivative to
// 4 (tr(E^2 M) - tr(EMEM)).
double logdet_tau_dxx(const ScatteringData& s, double x) {
    int n = static_cast<int>(s.eta.size());
    RealMatrix A = RealMatrix::identity(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            A(i, j) += std::sqrt(s.m[i] * s.m[j]) * std::exp(-(s.eta[i] + s.eta[j]) * x) /
                       (s.eta[i] + s.eta[j]);
    RealMatrix M = inverse(A);
    double trE2M = 0, trEMEM = 0;
    for (int i = 0; i < n; ++i) {
        trE2M += s.eta[i] * s.eta[i] * M(i, i);
        for (int j = 0; j < n; ++j) trEMEM += s.eta[i] * M(i, j) * s.eta[j] * M(j, i);
    }
    return 4.0 * (trE2M - trEMEM);
}

} // namespace

double reflectionless_potential(const ScatteringData& s, double x) {
    // on the negative axis the tau function grows linearly; differencing the
    // factored remainder keeps the stencil away from large cancellations
    if (x < -0.01)
        return -2.0 *
               second_derivative_logdet([&](double y) { return log_det_tau_remainder(s, y); }, x);
    return -2.0 * second_derivative_logdet([&](double y) { return log_det_tau(s, y); }, x);
}

double psi_via_ode(const DiscreteMeasure& a, double x, int steps) {
    size_t n = a.p.size();
    if (a.c.size() != n || n == 0) throw BadParams();
    if (x < 0) throw BadParams("need x >= 0");
    int d = static_cast<int>(n);
    RealMatrix E(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) E(i, j) = a.c[i] * a.c[j];
        E(i, i) += a.p[i] * a.p[i];
    }
    double trD = 0;
    for (double p : a.p) trD += p;
    if (x == 0.0) return 1.0;

    // phi'' = E phi, phi(0) = I, phi'(0) = -D, classical RK4
    RealMatrix phi = RealMatrix::identity(d), dphi(d, d);
    for (int i = 0; i < d; ++i) dphi(i, i) = -a.p[i];
    double h = x / steps;
    for (int k = 0; k < steps; ++k) {
        RealMatrix k1p = dphi, k1v = E * phi;
        RealMatrix k2p = dphi + (0.5 * h) * k1v, k2v = E * (phi + (0.5 * h) * k1p);
        RealMatrix k3p = dphi + (0.5 * h) * k2v, k3v = E * (phi + (0.5 * h) * k2p);
        RealMatrix k4p = dphi + h * k3v, k4v = E * (phi + h * k3p);
        phi = phi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        dphi = dphi + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if (!phi.finite() || !dphi.finite()) throw NonFinite();
    }
    double dphi_det = det(phi);
    if (!(dphi_det > 0)) throw NonFinite("det phi must stay positive");
    return std::exp(0.5 * (-x * trD - std::log(dphi_det)));
}

SolitonSurface soliton_surface(const ScatteringData& s, const std::vector<double>& xgrid,
                               const std::vector<double>& tgrid) {
    SolitonSurface out;
    out.x = xgrid;
    out.t = tgrid;
    out.v.resize(xgrid.size() * tgrid.size());
    for (size_t it = 0; it < tgrid.size(); ++it) {
        ScatteringData st = s;
        for (size_t j = 0; j < s.eta.size(); ++j)
            st.m[j] = s.m[j] * std::exp(-2.0 * std::pow(s.eta[j], 3) * tgrid[it]);
        for (size_t ix = 0; ix < xgrid.size(); ++ix)
            out.v[it * xgrid.size() + ix] = 2.0 * logdet_tau_dxx(st, xgrid[ix]);
    }
    return out;
}

} // namespace qwf
