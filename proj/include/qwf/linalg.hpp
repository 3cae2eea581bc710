#ifndef QWF_LINALG_HPP
#define QWF_LINALG_HPP

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "qwf/errors.hpp"

namespace qwf {

using cplx = std::complex<double>;

/// Dense real matrix, row-major storage.
struct RealMatrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    RealMatrix() = default;
    RealMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    bool square() const { return rows == cols; }

    static RealMatrix identity(int n);
    static RealMatrix diagonal(const std::vector<double>& d);

    RealMatrix transposed() const;
    double frobenius() const;
    double trace() const;
    bool finite() const;
};

RealMatrix operator+(const RealMatrix& A, const RealMatrix& B);
RealMatrix operator-(const RealMatrix& A, const RealMatrix& B);
RealMatrix operator*(const RealMatrix& A, const RealMatrix& B);
RealMatrix operator*(double s, const RealMatrix& A);
std::vector<double> operator*(const RealMatrix& A, const std::vector<double>& x);

/// Dense complex matrix, row-major storage.
struct ComplexMatrix {
    int rows = 0, cols = 0;
    std::vector<cplx> a;

    ComplexMatrix() = default;
    ComplexMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, cplx(0.0)) {}

    cplx& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    cplx operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    bool square() const { return rows == cols; }

    static ComplexMatrix identity(int n);
    static ComplexMatrix from_real(const RealMatrix& A);

    RealMatrix real_part() const;
    double frobenius() const;
    double max_imag() const;
};

ComplexMatrix operator+(const ComplexMatrix& A, const ComplexMatrix& B);
ComplexMatrix operator-(const ComplexMatrix& A, const ComplexMatrix& B);
ComplexMatrix operator*(const ComplexMatrix& A, const ComplexMatrix& B);
ComplexMatrix operator*(cplx s, const ComplexMatrix& A);

// -------- factorizations and solves --------

/// LU with partial pivoting; throws SingularOperator when a pivot underflows.
struct LU {
    RealMatrix lu;
    std::vector<int> perm;
    int sign = 1;

    explicit LU(RealMatrix A, double pivot_tol = 0.0);
    std::vector<double> solve(std::vector<double> b) const;
    double det() const;
    double log_abs_det(int* sign_out = nullptr) const;
};

RealMatrix solve(const RealMatrix& A, const RealMatrix& B);
RealMatrix inverse(const RealMatrix& A);
double det(const RealMatrix& A);

ComplexMatrix inverse(const ComplexMatrix& A);
cplx det(const ComplexMatrix& A);

/// Cholesky of an SPD matrix; throws NotSPD.
RealMatrix cholesky(const RealMatrix& A);
double log_det_spd(const RealMatrix& A);

// -------- symmetric eigenproblem --------

struct EigenDecomposition {
    std::vector<double> eigenvalues; // descending
    RealMatrix eigenvectors;         // orthonormal columns, A v_i = lambda_i v_i
};

/// Cyclic Jacobi for symmetric matrices. Off-diagonal threshold 1e-12*||A||_F,
/// 100-sweep cap. Throws NonSymmetric / NoConvergence.
EigenDecomposition sym_eigen(const RealMatrix& A, double tol = 1e-12);

/// Eigenvalues only (same algorithm, no accumulation of rotations).
std::vector<double> sym_eigenvalues(const RealMatrix& A, double tol = 1e-12);

// -------- general real eigenvalues --------

/// Eigenvalues of a general real matrix: Hessenberg reduction followed by
/// shifted QR; falls back to characteristic-polynomial root finding for
/// dimension <= 8 when QR stalls. Throws EigenFailure.
std::vector<cplx> general_eigenvalues(const RealMatrix& A);

// -------- matrix functions --------

/// Entire matrix functions evaluated by their power series with argument
/// scaling by powers of two:
///   e[M]   = sum M^n / n!
///   ch[M]  = sum M^{2n} / (2n)!
///   snh[M] = sum M^{2n+1} / (2n+1)!
///   sh[M]  = sum M^{2n} / (2n+1)!
///   tnh[M] = sh[M] (ch[M])^{-1}   (only when det ch[M] is nonsingular)
struct MatrixFunctions {
    ComplexMatrix e, ch, sh, snh;
    std::optional<ComplexMatrix> tnh;
};

MatrixFunctions matrix_functions(const ComplexMatrix& M, bool want_tnh = true);

ComplexMatrix expm(const ComplexMatrix& M);
RealMatrix expm(const RealMatrix& M);

/// e^{tM} assembled as sum_j r_j(t) P_j from the given spectrum.
ComplexMatrix putzer_exp(const RealMatrix& M, double t, const std::vector<cplx>& eigenvalues);

// -------- kth-order linear matrix ODE with constant coefficients --------
//
// U^{(k)} = C_{k-1} U^{(k-1)} + ... + C_1 U' + C_0 U,  U^{(i)}(0) = U0[i].

/// Solution on a time grid via the triangular Putzer functions r_j and the
/// coefficient recursion; eigenvalues of the block companion matrix are
/// computed internally when not supplied.
std::vector<RealMatrix> kth_order_ode_constant(const std::vector<RealMatrix>& C,
                                               const std::vector<RealMatrix>& U0,
                                               const std::vector<double>& tgrid,
                                               const std::vector<cplx>* eigenvalues = nullptr);

/// Same solution at a single time from pairwise distinct eigenvalues via the
/// Vandermonde formula. Throws RepeatedEigenvalue / IllConditionedVandermonde.
ComplexMatrix kth_order_ode_distinct(const std::vector<RealMatrix>& C,
                                     const std::vector<RealMatrix>& U0,
                                     const std::vector<cplx>& nu, double t);

// -------- classical determinant identities --------

/// Product-formula value of det[(1/(alpha_i+beta_j))]. Throws SingularEntry.
double cauchy_det(const std::vector<double>& alpha, const std::vector<double>& beta);

/// Left-hand side of the interpolation identity
///   sum_k prod_j (a_k+b_j) prod_{i!=k} (a_i-z) / prod_{i!=k} (a_i-a_k),
/// which equals prod_k (z+b_k). Throws RepeatedNode.
double lagrange_sum(const std::vector<double>& a, const std::vector<double>& b, double z);

} // namespace qwf

#endif
