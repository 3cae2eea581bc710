#ifndef QWF_LAPLACE_HPP
#define QWF_LAPLACE_HPP

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "qwf/kernel.hpp"
#include "qwf/ode.hpp"

namespace qwf {

enum class Route { spectral, riccati, second_order, closed_form };

std::string route_name(Route r);

struct LaplaceDiagnostics {
    double lambda_max = 0.0;
    double det2_log = 0.0;
    bool blowup = false;
    double blowup_time = -1.0;
    double trace_term = 0.0;
    double shift_term = 0.0;
    int n_grid = 0;
    int ode_steps = 0;
};

struct LaplaceResult {
    double value = 0.0;
    Route route = Route::spectral;
    LaplaceDiagnostics diag;
};

struct IntegrabilityReport {
    bool integrable = false;
    double lambda_max = 0.0;
    double upper_bound = 0.0; // exp((1/2){1/2 + L/(3(1-L)^3)} ||eta||_2^2), L = max(lambda,0)
};

/// e^{q_eta} is integrable iff lambda_max(B_eta) < 1.
IntegrabilityReport is_exp_integrable(const GridKernel& eta);

/// Spectral route: det2(I - B_eta)^{-1/2} exp((1/2) <(I - B_eta)^{-1} h, h>).
/// Throws NotIntegrable when lambda_max >= 1.
LaplaceResult laplace_spectral(const GridKernel& eta, const CMVector* h = nullptr);

/// ODE routes for p_sigma = q_{rho_sigma}: the Riccati value e^{int tr R / 2}
/// and the second-order value (e^{-int tr sigma_S} / det S(0))^{1/2}. A drift h
/// multiplies in exp(Var/2) with the Ito-isometry variance computed from the
/// S path. Throws Blowup when the Riccati equation explodes.
struct OdeLaplace {
    LaplaceResult riccati;
    LaplaceResult second_order;
};

OdeLaplace laplace_ode(const SigmaPath& sigma, const CMVector* h = nullptr, int steps = 512);

/// ((1/2+gamma) e^{beta/2} + (1/2-gamma) e^{-beta/2})^{-1}
/// for -beta*gamma < 1 and |gamma| <= 1/2. Throws DomainError.
double closed_form_levy_area(double beta, double gamma);

/// conditional variant (a/2)/sinh(a/2), the pinned-area Fourier transform
double closed_form_levy_area_conditional(double a);

/// characteristic function of p_sigma at lambda, square root tracked by
/// continuation from lambda = 0. Throws BranchTrackingFailure.
cplx charfn_ode(const SigmaPath& sigma, double lambda, int steps = 512);

struct LevyDensitySpec {
    std::vector<double> eigenvalues; // kept modes a_n
    double tail = 0.0;               // discarded sum of squares
    std::vector<double> x;           // evaluation grid
    std::vector<double> f;           // f_eta on the grid
    double exponent_error = 0.0;     // worst quadrature-vs-spectrum gap over probed lambda
};

/// Levy density f_eta(x) = (1/(2|x|)) sum_{n: x a_n > 0} e^{-|x/a_n|} plus the
/// exponent consistency check against -1/2 sum [log(1 - i l a_n) + i l a_n].
LevyDensitySpec levy_density(const GridKernel& eta, const std::vector<double>& xgrid,
                             double tail_tol = 1e-8);

/// det(I + B_kappa^T B_kappa)^{-1/2} exp(shift) variants of harmonic-oscillator
/// type; always integrable.
LaplaceResult harmonic_laplace(const GridKernel& kappa, const std::vector<double>* x = nullptr,
                               const CMVector* h = nullptr);

} // namespace qwf

#endif
