#include "qwf/feynmankac.hpp"

#include <algorithm>
#include <cmath>

#include "qwf/quadrature.hpp"

namespace qwf {

double gaussian_density(const RealMatrix& V, const std::vector<double>& x) {
    if (!V.square() || V.rows != static_cast<int>(x.size())) throw DimensionMismatch();
    if ((V - V.transposed()).frobenius() > 1e-10 * std::max(1.0, V.frobenius()))
        throw NotSPD("covariance is not symmetric");
    int d = V.rows;
    RealMatrix L = cholesky(V); // throws NotSPD on indefinite input
    double log_det = 0;
    for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(L(i, i));
    std::vector<double> u = LU(V).solve(x);
    double quad = 0;
    for (int i = 0; i < d; ++i) quad += u[i] * x[i];
    return std::exp(-0.5 * (d * std::log(2.0 * M_PI) + log_det + quad));
}

namespace {

double simpson_trace_sym_path(const SigmaPath& p, int panels = 1024) {
    double h = p.T / panels, acc = 0;
    for (int k = 0; k < panels; ++k) {
        double a = k * h, m = a + 0.5 * h, b = a + h;
        acc += (h / 6.0) * (sym_part(p(a)).trace() + 4.0 * sym_part(p(m)).trace() +
                            sym_part(p(b)).trace());
    }
    return acc;
}

std::vector<double> matvec(const RealMatrix& M, const std::vector<double>& x) { return M * x; }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

double FKDensity::quadratic_exponent(const std::vector<double>& x,
                                     const std::vector<double>& y) const {
    std::vector<double> diff(d);
    std::vector<double> U0y = matvec(U0, y);
    for (int i = 0; i < d; ++i) diff[i] = x[i] - U0y[i];
    std::vector<double> left = matvec(V0inv, diff);
    std::vector<double> right = matvec(Vprime0.transposed(), x);
    for (int i = 0; i < d; ++i) right[i] -= y[i];
    return 0.5 * (dot(matvec(phiS_T, y), y) - dot(matvec(phiS_0, x), x) +
                  dot(matvec(Uprime0, y), x) + dot(left, right));
}

double FKDensity::at(const std::vector<double>& x, const std::vector<double>& y) const {
    if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != d)
        throw DimensionMismatch();
    return std::exp(log_prefactor + quadratic_exponent(x, y));
}

FKDensity make_fk_density(const SigmaPath& phi, const SigmaPath& psi, int steps) {
    if (phi.d != psi.d || phi.T != psi.T) throw ShapeMismatch();
    FKDensity fk;
    fk.phi = phi;
    fk.psi = psi;
    fk.d = phi.d;
    fk.T = phi.T;
    fk.suite = second_order_suite(phi, psi, steps);
    if (!fk.suite.nonsingular) throw SingularS();
    RealMatrix V0 = fk.suite.V.v.front();
    if (std::abs(det(V0)) < 1e-12) throw SingularV0();

    fk.trace_phi_S = simpson_trace_sym_path(phi);
    fk.phiS_T = sym_part(phi(fk.T));
    fk.phiS_0 = sym_part(phi(0.0));
    fk.U0 = fk.suite.U.v.front();
    fk.Uprime0 = fk.suite.Uprime0;
    fk.V0inv = inverse(V0);
    fk.Vprime0 = fk.suite.Vprime0;

    RealMatrix vT = v_t_of_S(fk.suite.S, fk.T);
    double log_det_vT = log_det_spd(sym_part(vT));
    double detS0 = fk.suite.detS.front();
    fk.log_prefactor = -0.5 * (fk.trace_phi_S + fk.d * std::log(2.0 * M_PI) +
                               std::log(std::abs(detS0)) + log_det_vT);
    return fk;
}

double fk_density(const SigmaPath& phi, const SigmaPath& psi, const std::vector<double>& x,
                  const std::vector<double>& y, int steps) {
    return make_fk_density(phi, psi, steps).at(x, y);
}

NormalizationCheck fk_normalization_check(const SigmaPath& phi, const SigmaPath& psi,
                                          const std::vector<double>& x, int steps) {
    FKDensity fk = make_fk_density(phi, psi, steps);
    int d = fk.d;
    if (d > 2) throw BadParams("normalization quadrature supports d <= 2");

    NormalizationCheck out;
    // Gaussian window from the log-density curvature along each axis
    GaussLegendre gl(16);
    auto logp = [&](const std::vector<double>& y) {
        return fk.log_prefactor + fk.quadratic_exponent(x, y);
    };
    std::vector<double> center = x;
    std::vector<double> width(d, 0.0);
    for (int axis = 0; axis < d; ++axis) {
        double delta = 1e-3;
        std::vector<double> yp = center, ym = center;
        yp[axis] += delta;
        ym[axis] -= delta;
        double curv = (logp(yp) - 2.0 * logp(center) + logp(ym)) / (delta * delta);
        if (curv >= -1e-9) throw QuadratureNotConverged("density is not normalizable");
        double slope = (logp(yp) - logp(ym)) / (2.0 * delta);
        center[axis] -= slope / curv; // one Newton step to the axis mode
        width[axis] = 12.0 / std::sqrt(-curv);
    }
    if (d == 1) {
        out.quadrature = integrate_panels(center[0] - width[0], center[0] + width[0], 24, gl,
                                          [&](double y) { return fk.at(x, {y}); });
    } else {
        out.quadrature = integrate_panels(
            center[0] - width[0], center[0] + width[0], 16, gl, [&](double y0) {
                return integrate_panels(center[1] - width[1], center[1] + width[1], 16, gl,
                                        [&](double y1) { return fk.at(x, {y0, y1}); });
            });
    }

    // analytic side: E[e^{a^x_{phi,psi}}] through p_sigma^x plus the constants
    SigmaPath sigma = sigma_from_phi_psi(phi, psi);
    CMVector h = CMVector::from_function(d, 1024, fk.T, [&](double t) {
        std::vector<double> v = sigma(t) * x;
        return v;
    });
    OdeLaplace ode = laplace_ode(sigma, &h, steps);
    // (1/2)<(int psi_S) x, x> + (1/2) int_0^T s tr psi_S(s) ds
    RealMatrix psi_total(d, d);
    double tpsi = 0;
    const int panels = 1024;
    double hh = fk.T / panels;
    for (int k = 0; k < panels; ++k) {
        double a = k * hh, m = a + 0.5 * hh, b = a + hh;
        RealMatrix sa = sym_part(psi(a)), sm = sym_part(psi(m)), sb = sym_part(psi(b));
        psi_total = psi_total + (hh / 6.0) * (sa + 4.0 * sm + sb);
        tpsi += (hh / 6.0) * (a * sa.trace() + 4.0 * m * sm.trace() + b * sb.trace());
    }
    out.analytic = ode.second_order.value *
                   std::exp(0.5 * dot(matvec(psi_total, x), x) + 0.5 * tpsi);
    return out;
}

namespace {

// z / sinh(z) and z coth(z), stable near zero
double sinhc_inv(double z) {
    if (std::abs(z) < 1e-4) {
        double z2 = z * z;
        return 1.0 / (1.0 + z2 / 6.0 + z2 * z2 / 120.0);
    }
    return z / std::sinh(z);
}

double zcoth(double z) {
    if (std::abs(z) < 1e-4) {
        double z2 = z * z;
        return 1.0 + z2 / 3.0 - z2 * z2 / 45.0;
    }
    return z / std::tanh(z);
}

} // namespace

double g2_heat_kernel(const std::array<double, 2>& x, double a, double T, G2Options opts) {
    if (T <= 0) throw BadParams("need T > 0");
    double r2 = x[0] * x[0] + x[1] * x[1];
    auto integrand = [&](double b) {
        double z = 0.5 * T * b;
        return std::cos(a * b) * sinhc_inv(z) * std::exp(-(r2 / (2.0 * T)) * zcoth(z));
    };
    // envelope (Tb/2)/sinh(Tb/2) below 1e-12 fixes the cut
    double B = opts.b_cut > 0 ? opts.b_cut : 2.0 * 31.0 / T;
    auto value_for = [&](double cut) {
        int panels = opts.panels > 0
                         ? opts.panels
                         : std::max(64, static_cast<int>(cut * (std::abs(a) + 1.0) / M_PI) * 4);
        GaussLegendre gl(16);
        double half = integrate_panels(0.0, cut, panels, gl, integrand);
        return 2.0 * half / (2.0 * M_PI) / (2.0 * M_PI * T);
    };
    double v1 = value_for(B), v2 = value_for(2.0 * B);
    if (std::abs(v2 - v1) > 1e-8 * std::abs(v1) + 1e-12)
        throw QuadratureNotConverged("doubling the cut moved the heat-kernel value");
    return v2;
}

} // namespace qwf
