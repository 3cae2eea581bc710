#include "qwf/laplace.hpp"

#include <algorithm>
#include <cmath>

#include "qwf/quadrature.hpp"

namespace qwf {

std::string route_name(Route r) {
    switch (r) {
        case Route::spectral: return "spectral";
        case Route::riccati: return "riccati";
        case Route::second_order: return "second_order";
        case Route::closed_form: return "closed_form";
    }
    return "?";
}

IntegrabilityReport is_exp_integrable(const GridKernel& eta) {
    DiscreteOperator op = to_operator(eta);
    IntegrabilityReport rep;
    rep.lambda_max = lambda_max(op);
    rep.integrable = rep.lambda_max < 1.0;
    double L = std::max(rep.lambda_max, 0.0);
    double n2 = hs_norm(op);
    rep.upper_bound = rep.integrable
                          ? std::exp(0.5 * (0.5 + L / (3.0 * std::pow(1.0 - L, 3))) * n2 * n2)
                          : std::numeric_limits<double>::infinity();
    return rep;
}

LaplaceResult laplace_spectral(const GridKernel& eta, const CMVector* h) {
    DiscreteOperator op = to_operator(eta);
    std::vector<double> ev = sym_eigenvalues(op.m);
    LaplaceResult res;
    res.route = Route::spectral;
    res.diag.lambda_max = ev.front();
    res.diag.n_grid = eta.n;
    if (ev.front() >= 1.0) throw NotIntegrable("lambda_max = " + std::to_string(ev.front()));

    double log_det2 = 0;
    for (double l : ev) log_det2 += std::log1p(-l) + l;
    res.diag.det2_log = log_det2;

    double shift = 0;
    if (h) {
        if (h->n != eta.n || h->d != eta.d) throw ShapeMismatch();
        RealMatrix ImB = RealMatrix::identity(op.dim()) - op.m;
        std::vector<double> u = LU(ImB).solve(h->hp);
        double dot = 0;
        for (size_t i = 0; i < u.size(); ++i) dot += u[i] * h->hp[i];
        shift = 0.5 * dot * h->dt();
    }
    res.diag.shift_term = shift;
    res.value = std::exp(-0.5 * log_det2 + shift);
    return res;
}

namespace {

// Var of int <h', d xi_S>: the Ito integrand is
// g(s) = h'(s) + S(s)^{-T} int_s^T S'(u)^T h'(u) du.
double drift_variance(const SecondOrderSuite& suite, const CMVector& h) {
    const MatrixPath& S = suite.S;
    const MatrixPath& Sp = suite.Sprime;
    int m = S.steps();
    int d = h.d;
    auto hprime = [&](double t) {
        int cell = std::clamp(static_cast<int>(t / h.dt()), 0, h.n - 1);
        std::vector<double> out(d);
        for (int a = 0; a < d; ++a) out[a] = h.hp[static_cast<size_t>(cell) * d + a];
        return out;
    };
    std::vector<std::vector<double>> tail(m + 1, std::vector<double>(d, 0.0));
    for (int k = m - 1; k >= 0; --k) {
        double dt = S.t[k + 1] - S.t[k];
        std::vector<double> fa = Sp.v[k].transposed() * hprime(S.t[k]);
        std::vector<double> fb = Sp.v[k + 1].transposed() * hprime(S.t[k + 1]);
        for (int a = 0; a < d; ++a) tail[k][a] = tail[k + 1][a] + 0.5 * dt * (fa[a] + fb[a]);
    }
    double var = 0, prev = 0;
    for (int k = 0; k <= m; ++k) {
        std::vector<double> g = hprime(S.t[k]);
        std::vector<double> corr = inverse(S.v[k]).transposed() * tail[k];
        double sq = 0;
        for (int a = 0; a < d; ++a) {
            double val = g[a] + corr[a];
            sq += val * val;
        }
        if (k > 0) var += 0.5 * (S.t[k] - S.t[k - 1]) * (sq + prev);
        prev = sq;
    }
    return var;
}

} // namespace

OdeLaplace laplace_ode(const SigmaPath& sigma, const CMVector* h, int steps) {
    OdeLaplace out;
    RiccatiOutcome ric = riccati_solve(sigma, steps);
    if (!ric.solved) throw Blowup("Riccati blow-up near t = " + std::to_string(ric.blowup_time));
    SecondOrderSuite suite = second_order_suite(sigma, steps);
    if (!suite.nonsingular) throw Blowup("det S vanishes on [0,T]");

    double shift = 0;
    if (h) shift = 0.5 * drift_variance(suite, *h);

    out.riccati.route = Route::riccati;
    out.riccati.diag.trace_term = ric.trace_integral;
    out.riccati.diag.ode_steps = steps;
    out.riccati.diag.shift_term = shift;
    out.riccati.value = std::exp(0.5 * ric.trace_integral + shift);

    out.second_order.route = Route::second_order;
    out.second_order.diag.trace_term = suite.trace_sigma_S;
    out.second_order.diag.ode_steps = steps;
    out.second_order.diag.shift_term = shift;
    out.second_order.value =
        std::exp(-0.5 * (suite.trace_sigma_S + std::log(suite.detS.front())) + shift);
    return out;
}

double closed_form_levy_area(double beta, double gamma) {
    if (-beta * gamma >= 1.0 || std::abs(gamma) > 0.5)
        throw DomainError("need -beta*gamma < 1 and |gamma| <= 1/2");
    return 1.0 / ((0.5 + gamma) * std::exp(0.5 * beta) + (0.5 - gamma) * std::exp(-0.5 * beta));
}

double closed_form_levy_area_conditional(double a) {
    if (a == 0.0) return 1.0;
    double z = 0.5 * a;
    if (std::abs(z) < 1e-8) return 1.0 / (1.0 + z * z / 6.0);
    return z / std::sinh(z);
}

namespace {

// backward complex solve of S'' = 2 zeta sigma_A S' + zeta sigma' S,
// S(T) = I, S'(T) = zeta sigma(T); returns S(0)
ComplexMatrix charfn_S0(const SigmaPath& sigma, cplx zeta, int steps) {
    int d = sigma.d;
    double T = sigma.T, hstep = T / steps;
    ComplexMatrix S = ComplexMatrix::identity(d);
    ComplexMatrix Sp = zeta * ComplexMatrix::from_real(sigma(T));
    auto acc = [&](double t, const ComplexMatrix& phi, const ComplexMatrix& dphi) {
        ComplexMatrix sa = ComplexMatrix::from_real(skew_part(sigma(t)));
        ComplexMatrix sd = ComplexMatrix::from_real(sigma.deriv(t));
        return (2.0 * zeta) * (sa * dphi) + zeta * (sd * phi);
    };
    for (int k = steps; k > 0; --k) {
        double t = k * hstep, hh = -hstep;
        ComplexMatrix k1p = Sp, k1v = acc(t, S, Sp);
        ComplexMatrix k2p = Sp + (cplx(0.5 * hh)) * k1v;
        ComplexMatrix k2v = acc(t + 0.5 * hh, S + cplx(0.5 * hh) * k1p, k2p);
        ComplexMatrix k3p = Sp + cplx(0.5 * hh) * k2v;
        ComplexMatrix k3v = acc(t + 0.5 * hh, S + cplx(0.5 * hh) * k2p, k3p);
        ComplexMatrix k4p = Sp + cplx(hh) * k3v;
        ComplexMatrix k4v = acc(t + hh, S + cplx(hh) * k3p, k4p);
        S = S + cplx(hh / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        Sp = Sp + cplx(hh / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    return S;
}

double trace_sym_integral(const SigmaPath& sigma, int panels = 512) {
    double h = sigma.T / panels, acc = 0;
    for (int k = 0; k < panels; ++k) {
        double a = k * h, m = a + 0.5 * h, b = a + h;
        acc += (h / 6.0) * (sym_part(sigma(a)).trace() + 4.0 * sym_part(sigma(m)).trace() +
                            sym_part(sigma(b)).trace());
    }
    return acc;
}

} // namespace

cplx charfn_ode(const SigmaPath& sigma, double lambda, int steps) {
    if (lambda == 0.0) return 1.0;
    double trace_sym = trace_sym_integral(sigma);
    auto square_of = [&](double lam) {
        cplx zeta(0.0, lam);
        ComplexMatrix S0 = charfn_S0(sigma, zeta, steps);
        cplx d = det(S0);
        double floor_ = 1e-12 * std::pow(1.0 + std::abs(lam) * sigma.sup_norm(), sigma.d);
        if (std::abs(d) < floor_)
            throw BranchTrackingFailure("det S_{i lambda}(0) within threshold of zero");
        return std::exp(-zeta * trace_sym) / d;
    };

    // continuation of the square root along lambda from 0 (value 1 there)
    int substeps = 32;
    const int cap = 1024;
    while (true) {
        cplx w = 1.0;
        bool ok = true;
        for (int k = 1; k <= substeps; ++k) {
            cplx root = std::sqrt(square_of(lambda * k / substeps));
            if (std::abs(root + w) <= std::abs(root - w)) root = -root;
            if (std::abs(std::arg(root / w)) > M_PI_2) {
                ok = false;
                break;
            }
            w = root;
        }
        if (ok) return w;
        substeps *= 2;
        if (substeps > cap) throw BranchTrackingFailure("phase jumps persist after refinement");
    }
}

LevyDensitySpec levy_density(const GridKernel& eta, const std::vector<double>& xgrid,
                             double tail_tol) {
    DiscreteOperator op = to_operator(eta);
    std::vector<double> ev = sym_eigenvalues(op.m);
    LevyDensitySpec spec;
    spec.x = xgrid;
    for (double a : ev) {
        if (std::abs(a) > 1e-7) spec.eigenvalues.push_back(a);
        else spec.tail += a * a;
    }
    if (spec.tail >= tail_tol)
        throw TailTooHeavy("discarded spectral mass " + std::to_string(spec.tail));

    auto density = [&](double x) {
        if (x == 0.0) return 0.0;
        double s = 0;
        for (double a : spec.eigenvalues)
            if (x * a > 0) s += std::exp(-std::abs(x / a));
        return 0.5 * s / std::abs(x);
    };
    spec.f.resize(xgrid.size());
    for (size_t i = 0; i < xgrid.size(); ++i) spec.f[i] = density(xgrid[i]);
    if (spec.eigenvalues.empty()) return spec; // zero form: density vanishes

    double amax = 0;
    for (double a : spec.eigenvalues) amax = std::max(amax, std::abs(a));
    GaussLegendre gl(16);
    auto half_integral = [&](double lam, int sgn) {
        // panels log-spaced toward zero; the integrand vanishes linearly there
        cplx acc = 0.0;
        double xmax = 40.0 * amax, xmin = 1e-5 * amax;
        const int panels = 64;
        double ratio = std::pow(xmax / xmin, 1.0 / panels);
        double a = xmin;
        for (int k = 0; k < panels; ++k) {
            double b = a * ratio;
            double re = gl.integrate(a, b, [&](double x) {
                double xs = sgn * x;
                return (std::cos(lam * xs) - 1.0) * density(xs);
            });
            double im = gl.integrate(a, b, [&](double x) {
                double xs = sgn * x;
                return (std::sin(lam * xs) - lam * xs) * density(xs);
            });
            acc += cplx(re, im);
            a = b;
        }
        return acc;
    };
    for (double lam : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
        cplx quad = half_integral(lam, +1) + half_integral(lam, -1);
        cplx spectral = 0.0;
        for (double a : spec.eigenvalues)
            spectral += -0.5 * (std::log(cplx(1.0, -lam * a)) + cplx(0.0, lam * a));
        spec.exponent_error = std::max(spec.exponent_error, std::abs(quad - spectral));
    }
    return spec;
}

LaplaceResult harmonic_laplace(const GridKernel& kappa, const std::vector<double>* x,
                               const CMVector* h) {
    GridKernel c = x ? harmonic_kernel_x(kappa, *x) : harmonic_kernel(kappa);
    DiscreteOperator op = to_operator(c);
    std::vector<double> ev = sym_eigenvalues(op.m);
    LaplaceResult res;
    res.route = Route::spectral;
    res.diag.n_grid = kappa.n;
    res.diag.lambda_max = -ev.back(); // of the negated Gram form, always below one
    double log_det = 0;
    for (double l : ev) log_det += std::log1p(std::max(l, 0.0)); // Gram spectrum is PSD
    res.diag.det2_log = log_det;
    double shift = 0;
    if (h) {
        if (h->n != kappa.n || h->d != kappa.d) throw ShapeMismatch();
        RealMatrix IpB = RealMatrix::identity(op.dim()) + op.m;
        std::vector<double> u = LU(IpB).solve(h->hp);
        double dot = 0;
        for (size_t i = 0; i < u.size(); ++i) dot += u[i] * h->hp[i];
        shift = 0.5 * dot * h->dt();
    }
    res.diag.shift_term = shift;
    res.value = std::exp(-0.5 * log_det + shift);
    return res;
}

} // namespace qwf
