#ifndef QWF_FEYNMANKAC_HPP
#define QWF_FEYNMANKAC_HPP

#include <array>
#include <vector>

#include "qwf/laplace.hpp"
#include "qwf/ode.hpp"

namespace qwf {

/// g_V(x) = (2 pi)^{-d/2} (det V)^{-1/2} e^{-<V^{-1}x,x>/2}. Throws NotSPD.
double gaussian_density(const RealMatrix& V, const std::vector<double>& x);

/// Transition density of x + theta(T) under e^{a^x_{phi,psi}} d mu, assembled
/// from the fundamental solutions S, U, V and the quadratic exponent d(x,y).
struct FKDensity {
    SigmaPath phi, psi;
    SecondOrderSuite suite;
    double trace_phi_S = 0.0; // int_0^T tr phi_S dt
    double log_prefactor = 0.0;
    RealMatrix phiS_T, phiS_0, U0, Uprime0, V0inv, Vprime0;
    int d = 1;
    double T = 1.0;

    double quadratic_exponent(const std::vector<double>& x, const std::vector<double>& y) const;
    double at(const std::vector<double>& x, const std::vector<double>& y) const;
};

/// Throws SingularS / SingularV0 when the suite degenerates.
FKDensity make_fk_density(const SigmaPath& phi, const SigmaPath& psi, int steps = 512);

double fk_density(const SigmaPath& phi, const SigmaPath& psi, const std::vector<double>& x,
                  const std::vector<double>& y, int steps = 512);

struct NormalizationCheck {
    double quadrature = 0.0; // int p_T(x,y) dy
    double analytic = 0.0;   // E[e^{a^x_{phi,psi}}] via the ODE route
};

/// Marginal mass of the density against the unconditioned transform.
NormalizationCheck fk_normalization_check(const SigmaPath& phi, const SigmaPath& psi,
                                          const std::vector<double>& x, int steps = 512);

struct G2Options {
    double b_cut = -1.0; // integration half-width; chosen from the envelope when < 0
    int panels = 0;      // quadrature panels on [0, b_cut]; automatic when 0
};

/// Heat kernel at time T on the group R^2 x R with one stochastic-area
/// coordinate: a one-dimensional Fourier integral in b. Throws
/// QuadratureNotConverged when doubling the cut moves the value.
double g2_heat_kernel(const std::array<double, 2>& x, double a, double T, G2Options opts = {});

} // namespace qwf

#endif
