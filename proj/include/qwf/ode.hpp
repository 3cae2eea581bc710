#ifndef QWF_ODE_HPP
#define QWF_ODE_HPP

#include <functional>
#include <iosfwd>
#include <vector>

#include "qwf/linalg.hpp"
#include "qwf/sigma.hpp"

namespace qwf {

/// Matrix-valued function sampled on an increasing time grid.
struct MatrixPath {
    std::vector<double> t;
    std::vector<RealMatrix> v;

    int steps() const { return static_cast<int>(t.size()) - 1; }
    /// piecewise-linear evaluation
    RealMatrix at(double time) const;
};

using MatrixRhs = std::function<RealMatrix(double, const RealMatrix&)>;

/// Classical RK4 on [0,T]. Backward integration runs from the terminal value
/// at t = T and the returned path is reordered to increasing time either way.
/// Throws NonFinite when the state stops being finite.
MatrixPath rk4_matrix_ode(const MatrixRhs& rhs, const RealMatrix& boundary_value, double T,
                          bool backward, int steps);

struct RiccatiOutcome {
    bool solved = false;
    MatrixPath path;            // only when solved
    double blowup_time = -1.0;  // only when not solved; bracketed within one step
    double blowup_lo = -1.0, blowup_hi = -1.0;
    double trace_integral = 0.0; // int_0^T tr R dt, when solved
};

/// Backward matrix Riccati equation
///   R' = -R^2 - sigma^T R - R sigma - sigma^T sigma,  R(T) = 0.
/// Blow-up is an outcome, not an error; its time is bracketed within one step.
RiccatiOutcome riccati_solve(const SigmaPath& sigma, int steps = 512);

/// Fundamental solutions of Phi'' - 2 sigma_A Phi' - sigma' Phi = 0 with
/// terminal data S(T)=I, S'(T)=sigma(T); U(T)=I, U'(T)=0; V(T)=0, V'(T)=I.
struct SecondOrderSuite {
    MatrixPath S, U, V;
    MatrixPath Sprime; // S' on the same grid
    std::vector<double> detS;
    bool nonsingular = false;
    RealMatrix Uprime0, Vprime0; // derivative states at t = 0 from the solver
    double trace_sigma_S = 0.0;  // int_0^T tr sigma_S dt
};

SecondOrderSuite second_order_suite(const SigmaPath& sigma, int steps = 512);

/// Same suite for the pair (phi, psi): the equation is
/// Phi'' - 2 phi_A Phi' + (psi_S - phi') Phi = 0, which equals the sigma form
/// with sigma(t) = phi(t) + int_t^T psi_S(s) ds.
SecondOrderSuite second_order_suite(const SigmaPath& phi, const SigmaPath& psi, int steps = 512);

/// Builds sigma(t) = phi(t) + int_t^T psi_S ds with an analytic derivative.
SigmaPath sigma_from_phi_psi(const SigmaPath& phi, const SigmaPath& psi);

/// v_t = int_0^t (S(t)S(s)^{-1})(S(t)S(s)^{-1})^T ds, the endpoint covariance.
/// Throws SingularS when det S vanishes on [0,t].
RealMatrix v_t_of_S(const MatrixPath& S, double t);

/// rows `t,i,j,value` with 1-based component indices
void write_matrix_path_csv(const MatrixPath& path, std::ostream& out);

} // namespace qwf

#endif
