#ifndef QWF_KERNEL_HPP
#define QWF_KERNEL_HPP

#include <string>
#include <vector>

#include "qwf/linalg.hpp"
#include "qwf/sigma.hpp"

namespace qwf {

/// Matrix-valued kernel kappa(t,s) sampled on the midpoint grid
/// t_i = (i + 1/2) T / n over [0,T]^2. A symmetric kernel satisfies
/// values[i][j] = values[j][i]^T entrywise.
struct GridKernel {
    int d = 1, n = 0;
    double T = 1.0;
    bool symmetric = false;
    std::vector<double> v; // ((i*n + j)*d + a)*d + b

    GridKernel() = default;
    GridKernel(int d_, int n_, double T_, bool symmetric_ = false)
        : d(d_), n(n_), T(T_), symmetric(symmetric_),
          v(static_cast<size_t>(n_) * n_ * d_ * d_, 0.0) {}

    double t(int i) const { return (i + 0.5) * T / n; }
    double dt() const { return T / n; }

    double& at(int i, int j, int a, int b) {
        return v[((static_cast<size_t>(i) * n + j) * d + a) * d + b];
    }
    double at(int i, int j, int a, int b) const {
        return v[((static_cast<size_t>(i) * n + j) * d + a) * d + b];
    }
    RealMatrix block(int i, int j) const;
    void set_block(int i, int j, const RealMatrix& M);

    /// max entrywise violation of values[i][j] == values[j][i]^T
    double symmetry_defect() const;
    bool finite() const;
};

GridKernel operator*(double c, const GridKernel& k);
GridKernel operator+(const GridKernel& a, const GridKernel& b);

/// Dense discretization of the induced operator on sampled derivatives:
/// block (i,j) equals kappa(t_i,t_j) * dt.
struct DiscreteOperator {
    int d = 1, n = 0;
    double T = 1.0;
    bool symmetric = false;
    RealMatrix m; // (n d) x (n d)

    int dim() const { return n * d; }
    double dt() const { return T / n; }
};

DiscreteOperator to_operator(const GridKernel& k);

/// Sampled derivative h'(t_i) of a Cameron-Martin element;
/// <h,g> = dt * sum_i <h'(t_i), g'(t_i)>.
struct CMVector {
    int d = 1, n = 0;
    double T = 1.0;
    std::vector<double> hp;

    double dt() const { return T / n; }
    static CMVector from_function(int d, int n, double T,
                                  const std::function<std::vector<double>(double)>& f);
    static CMVector zero(int d, int n, double T);
};

double inner(const CMVector& h, const CMVector& g);
double norm(const CMVector& h);

// ---- builtin families ----

GridKernel zero_kernel(int d, int n, double T);
/// d=1 Volterra base kappa(t,s) = 1_{[0,t)}(s)
GridKernel indicator_base_kernel(int n, double T);
/// d=1 symmetric c(kappa)(t,s) = T - max(t,s) for the base above
GridKernel kac_kernel(int n, double T);
/// d=2 stochastic-area kernel (1/2){1_{[0,t)}(s) - 1_{(t,T]}(s)} J
GridKernel levy_area_kernel(int n, double T);
/// rho_sigma(t,s) = 1_{[0,t)}(s) sigma(t) + 1_{(t,T]}(s) sigma(s)^T
GridKernel rho_sigma_kernel(const SigmaPath& sigma, int n);
/// symmetric (min(t,s) - t s / T) D
GridKernel sample_variance_kernel(const RealMatrix& D, int n, double T);
/// Volterra kernel kappa_A(rho)(t,s) = -1_{[0,t)}(s) rho(t,s)
GridKernel volterra_of(const GridKernel& rho);
/// rank-one a * (h tensor h)
GridKernel rank_one_kernel(const CMVector& h, double a);
/// CSV rows `t,s,i,j,value` + key=value sidecar declaring T and d; values are
/// carried piecewise-constant (nearest sample) onto the midpoint grid.
GridKernel custom_csv_kernel(const std::string& csv_path, const std::string& sidecar_path, int n);

struct KernelParams {
    int d = 1;
    int n = 128;
    double T = 1.0;
    RealMatrix mat;            // D / constant sigma, as the family requires
    std::string base;          // base kernel name for `harmonic`
    std::string csv, sidecar;  // custom_csv
};

GridKernel builtin_kernel(const std::string& name, const KernelParams& p);

// ---- kernel algebra ----

/// eta(kappa)(t,s) = -{kappa(t,s) + kappa(s,t)^T + int kappa(u,t)^T kappa(u,s) du},
/// discretized so that I - op(eta(kappa)) = (I + op(kappa))^T (I + op(kappa)) exactly.
GridKernel eta_of_kappa(const GridKernel& kappa);

/// c(kappa)(t,s) = int kappa(u,t)^T kappa(u,s) du; op equals op(kappa)^T op(kappa).
GridKernel harmonic_kernel(const GridKernel& kappa);
/// c(kappa;x)(t,s) = int (kappa(u,t)^T x)(kappa(u,s)^T x)^T du
GridKernel harmonic_kernel_x(const GridKernel& kappa, const std::vector<double>& x);

// ---- operator functionals ----

double lambda_max(const DiscreteOperator& op);
double lambda_min(const DiscreteOperator& op);
/// ||B||_op, largest singular value
double operator_norm(const DiscreteOperator& op);

struct Det2 {
    double log_abs = 0.0;
    int sign = 1; // 0 when a factor vanishes
    double value() const;
};

/// prod_i (1 + shift*lambda_i) e^{-shift*lambda_i}
Det2 det2_spectrum(const std::vector<double>& eigenvalues, double shift);
/// regularized determinant det2(I + shift*B) of a symmetric operator
Det2 det2(const DiscreteOperator& op, double shift);
/// det(I+B) e^{-tr B} for a general matrix; exact on strictly triangular B
Det2 det2_nonsym(const RealMatrix& B);

/// B_{kappa_S(eta)} = C - I with C symmetric PSD, C^2 = I - B_eta.
/// Throws NotIntegrable when lambda_max(eta) >= 1.
DiscreteOperator sqrt_shift(const GridKernel& eta);
/// B_{kappa-hat} = (I + B_kappa)^{-1} - I. Throws SingularOperator.
DiscreteOperator resolvent_shift(const GridKernel& kappa);

double hs_norm(const DiscreteOperator& op);
double trace(const DiscreteOperator& op);

} // namespace qwf

#endif
