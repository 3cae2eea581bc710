#ifndef QWF_SPECIAL_HPP
#define QWF_SPECIAL_HPP

#include <vector>

#include "qwf/linalg.hpp"

namespace qwf {

// ---- polynomials from stochastic-area moments ----

/// Complex moments of the area functionals, extracted as Taylor coefficients
/// of their closed-form generating functions by Cauchy integrals on |z| = 1/2
/// with 64 nodes.
struct MomentTable {
    int K = 0;
    std::vector<cplx> mixed;       // E[(s_1 + (i/4)|theta(1)|^2)^k]
    std::vector<cplx> area;        // E[s_1^k]
    std::vector<cplx> conditional; // E[s_1^k | theta(1) = 0]
};

MomentTable moment_table(int K);

/// binomial convolution of the moment table; matches the classical polynomials
double euler_poly(int n, double xi);
double bernoulli_poly(int n, double xi);
/// classical recurrence oracles
double euler_poly_classical(int n, double xi);
double bernoulli_poly_classical(int n, double xi);

/// Eulerian polynomials of type A and B via area moments; need |xi| < 1
double eulerian_poly_A(int n, double xi);
double eulerian_poly_B(int n, double xi);
/// defining series sum_k (k+1)^n xi^k (resp. (2k+1)^n) as oracles
double eulerian_poly_A_series(int n, double xi);
double eulerian_poly_B_series(int n, double xi);

// ---- scattering data, reflectionless potentials, solitons ----

struct ScatteringData {
    std::vector<double> eta; // 0 < eta_1 < ... < eta_n
    std::vector<double> m;   // all positive
};

/// discrete measure sum c_j^2 delta_{p_j}; ordering per the pairing hypothesis
struct DiscreteMeasure {
    std::vector<double> p;
    std::vector<double> c;
};

/// Roots of -1 = sum c_j^2/(p_j^2 - r) bracketed between consecutive moduli,
/// plus the paired eigenvalues; masses from the product formulas. Throws
/// BadParams / RootBracketFailure / NonPositiveMass.
ScatteringData scattering_from_measure(const DiscreteMeasure& a);

/// log det(I + G_s(x)) with the Gram matrix G_s(x)_{ij} =
/// sqrt(m_i m_j) e^{-(eta_i+eta_j)x}/(eta_i+eta_j); Cholesky in log space.
double log_det_tau(const ScatteringData& s, double x);

/// u_s(x) = -2 (d/dx)^2 log det(I + G_s(x)), five-point differences with one
/// Richardson pass.
double reflectionless_potential(const ScatteringData& s, double x);

/// Psi_a(x) = (e^{-x tr D} / det phi(x))^{1/2} with phi'' = (D^2 + c c^T) phi,
/// phi(0) = I, phi'(0) = -D.
double psi_via_ode(const DiscreteMeasure& a, double x, int steps = 1024);

struct SolitonSurface {
    std::vector<double> x, t;
    std::vector<double> v; // v[it * nx + ix]

    double at(int it, int ix) const { return v[static_cast<size_t>(it) * x.size() + ix]; }
};

/// v(x,t) = 2 (d/dx)^2 log det(I + G_{s(t)}(x)) with the time-evolved masses
/// m_j(t) = m_j exp(-2 eta_j^3 t).
SolitonSurface soliton_surface(const ScatteringData& s, const std::vector<double>& xgrid,
                               const std::vector<double>& tgrid);

} // namespace qwf

#endif
