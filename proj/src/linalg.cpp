#include "qwf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qwf {

// ---------------------------------------------------------------- RealMatrix

RealMatrix RealMatrix::identity(int n) {
    RealMatrix I(n, n);
    for (int i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
}

RealMatrix RealMatrix::diagonal(const std::vector<double>& d) {
    RealMatrix D(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) D(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return D;
}

RealMatrix RealMatrix::transposed() const {
    RealMatrix T(cols, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) T(j, i) = (*this)(i, j);
    return T;
}

double RealMatrix::frobenius() const {
    double s = 0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

double RealMatrix::trace() const {
    double s = 0;
    for (int i = 0; i < std::min(rows, cols); ++i) s += (*this)(i, i);
    return s;
}

bool RealMatrix::finite() const {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

RealMatrix operator+(const RealMatrix& A, const RealMatrix& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw DimensionMismatch();
    RealMatrix C = A;
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
    return C;
}

RealMatrix operator-(const RealMatrix& A, const RealMatrix& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw DimensionMismatch();
    RealMatrix C = A;
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
    return C;
}

RealMatrix operator*(const RealMatrix& A, const RealMatrix& B) {
    if (A.cols != B.rows) throw DimensionMismatch();
    RealMatrix C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        for (int k = 0; k < A.cols; ++k) {
            double aik = A(i, k);
            if (aik == 0.0) continue;
            const double* brow = &B.a[static_cast<size_t>(k) * B.cols];
            double* crow = &C.a[static_cast<size_t>(i) * C.cols];
            for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return C;
}

RealMatrix operator*(double s, const RealMatrix& A) {
    RealMatrix C = A;
    for (double& x : C.a) x *= s;
    return C;
}

std::vector<double> operator*(const RealMatrix& A, const std::vector<double>& x) {
    if (A.cols != static_cast<int>(x.size())) throw DimensionMismatch();
    std::vector<double> y(A.rows, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        const double* row = &A.a[static_cast<size_t>(i) * A.cols];
        double s = 0;
        for (int j = 0; j < A.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

// ------------------------------------------------------------- ComplexMatrix

ComplexMatrix ComplexMatrix::identity(int n) {
    ComplexMatrix I(n, n);
    for (int i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
}

ComplexMatrix ComplexMatrix::from_real(const RealMatrix& A) {
    ComplexMatrix C(A.rows, A.cols);
    for (size_t i = 0; i < A.a.size(); ++i) C.a[i] = A.a[i];
    return C;
}

RealMatrix ComplexMatrix::real_part() const {
    RealMatrix R(rows, cols);
    for (size_t i = 0; i < a.size(); ++i) R.a[i] = a[i].real();
    return R;
}

double ComplexMatrix::frobenius() const {
    double s = 0;
    for (const cplx& x : a) s += std::norm(x);
    return std::sqrt(s);
}

double ComplexMatrix::max_imag() const {
    double s = 0;
    for (const cplx& x : a) s = std::max(s, std::abs(x.imag()));
    return s;
}

ComplexMatrix operator+(const ComplexMatrix& A, const ComplexMatrix& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw DimensionMismatch();
    ComplexMatrix C = A;
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
    return C;
}

ComplexMatrix operator-(const ComplexMatrix& A, const ComplexMatrix& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw DimensionMismatch();
    ComplexMatrix C = A;
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
    return C;
}

ComplexMatrix operator*(const ComplexMatrix& A, const ComplexMatrix& B) {
    if (A.cols != B.rows) throw DimensionMismatch();
    ComplexMatrix C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
        for (int k = 0; k < A.cols; ++k) {
            cplx aik = A(i, k);
            if (aik == cplx(0.0)) continue;
            const cplx* brow = &B.a[static_cast<size_t>(k) * B.cols];
            cplx* crow = &C.a[static_cast<size_t>(i) * C.cols];
            for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return C;
}

ComplexMatrix operator*(cplx s, const ComplexMatrix& A) {
    ComplexMatrix C = A;
    for (cplx& x : C.a) x *= s;
    return C;
}

// ------------------------------------------------------------------------ LU

LU::LU(RealMatrix A, double pivot_tol) : lu(std::move(A)) {
    if (!lu.square()) throw DimensionMismatch("LU of non-square matrix");
    int n = lu.rows;
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(lu(k, k));
        if (pivot_tol > 0.0) {
            // Threshold pivoting: keep the diagonal unless it is negligible
            // next to the column; leaves triangular inputs untouched.
            double colmax = best;
            int argmax = k;
            for (int i = k + 1; i < n; ++i) {
                double v = std::abs(lu(i, k));
                if (v > colmax) { colmax = v; argmax = i; }
            }
            if (best < pivot_tol * colmax) { piv = argmax; best = colmax; }
        } else {
            for (int i = k + 1; i < n; ++i) {
                double v = std::abs(lu(i, k));
                if (v > best) { best = v; piv = i; }
            }
        }
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            std::swap(perm[k], perm[piv]);
            sign = -sign;
        }
        double pivot = lu(k, k);
        if (pivot == 0.0) continue; // singular; det() will report 0
        for (int i = k + 1; i < n; ++i) {
            double f = lu(i, k) / pivot;
            lu(i, k) = f;
            if (f == 0.0) continue;
            for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
}

std::vector<double> LU::solve(std::vector<double> b) const {
    int n = lu.rows;
    if (static_cast<int>(b.size()) != n) throw DimensionMismatch();
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
    for (int i = n - 1; i >= 0; --i) {
        for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
        double p = lu(i, i);
        if (p == 0.0) throw SingularOperator("singular matrix in LU solve");
        x[i] /= p;
    }
    return x;
}

double LU::det() const {
    double d = sign;
    for (int i = 0; i < lu.rows; ++i) d *= lu(i, i);
    return d;
}

double LU::log_abs_det(int* sign_out) const {
    double ld = 0;
    int s = sign;
    for (int i = 0; i < lu.rows; ++i) {
        double p = lu(i, i);
        if (p == 0.0) {
            if (sign_out) *sign_out = 0;
            return -std::numeric_limits<double>::infinity();
        }
        if (p < 0) s = -s;
        ld += std::log(std::abs(p));
    }
    if (sign_out) *sign_out = s;
    return ld;
}

RealMatrix solve(const RealMatrix& A, const RealMatrix& B) {
    LU f(A);
    RealMatrix X(A.rows, B.cols);
    std::vector<double> col(A.rows);
    for (int j = 0; j < B.cols; ++j) {
        for (int i = 0; i < A.rows; ++i) col[i] = B(i, j);
        std::vector<double> x = f.solve(col);
        for (int i = 0; i < A.rows; ++i) X(i, j) = x[i];
    }
    return X;
}

RealMatrix inverse(const RealMatrix& A) { return solve(A, RealMatrix::identity(A.rows)); }

double det(const RealMatrix& A) { return LU(A).det(); }

// complex LU, used internally and for the complex inverse/determinant
namespace {

struct CLU {
    ComplexMatrix lu;
    std::vector<int> perm;
    int sign = 1;

    explicit CLU(ComplexMatrix A) : lu(std::move(A)) {
        int n = lu.rows;
        perm.resize(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (int k = 0; k < n; ++k) {
            int piv = k;
            double best = std::abs(lu(k, k));
            for (int i = k + 1; i < n; ++i) {
                double v = std::abs(lu(i, k));
                if (v > best) { best = v; piv = i; }
            }
            if (piv != k) {
                for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
                std::swap(perm[k], perm[piv]);
                sign = -sign;
            }
            cplx pivot = lu(k, k);
            if (pivot == cplx(0.0)) continue;
            for (int i = k + 1; i < n; ++i) {
                cplx f = lu(i, k) / pivot;
                lu(i, k) = f;
                if (f == cplx(0.0)) continue;
                for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            }
        }
    }

    std::vector<cplx> solve(const std::vector<cplx>& b) const {
        int n = lu.rows;
        std::vector<cplx> x(n);
        for (int i = 0; i < n; ++i) x[i] = b[perm[i]];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
            cplx p = lu(i, i);
            if (p == cplx(0.0)) throw SingularOperator("singular complex matrix");
            x[i] /= p;
        }
        return x;
    }

    cplx det() const {
        cplx d = static_cast<double>(sign);
        for (int i = 0; i < lu.rows; ++i) d *= lu(i, i);
        return d;
    }

    double pivot_spread() const {
        double lo = std::numeric_limits<double>::infinity(), hi = 0;
        for (int i = 0; i < lu.rows; ++i) {
            double p = std::abs(lu(i, i));
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        return hi > 0 ? lo / hi : 0.0;
    }
};

} // namespace

ComplexMatrix inverse(const ComplexMatrix& A) {
    CLU f(A);
    int n = A.rows;
    ComplexMatrix X(n, n);
    std::vector<cplx> e(n);
    for (int j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), cplx(0.0));
        e[j] = 1.0;
        std::vector<cplx> x = f.solve(e);
        for (int i = 0; i < n; ++i) X(i, j) = x[i];
    }
    return X;
}

cplx det(const ComplexMatrix& A) { return CLU(A).det(); }

RealMatrix cholesky(const RealMatrix& A) {
    if (!A.square()) throw DimensionMismatch();
    int n = A.rows;
    RealMatrix L(n, n);
    for (int j = 0; j < n; ++j) {
        double diag = A(j, j);
        for (int k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
        if (diag <= 0.0 || !std::isfinite(diag)) throw NotSPD();
        L(j, j) = std::sqrt(diag);
        for (int i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return L;
}

double log_det_spd(const RealMatrix& A) {
    RealMatrix L = cholesky(A);
    double ld = 0;
    for (int i = 0; i < A.rows; ++i) ld += std::log(L(i, i));
    return 2.0 * ld;
}

// ---------------------------------------------------------------- sym_eigen

namespace {

// One Jacobi rotation zeroing B(p,q). B stays symmetric; rows p and q are
// rotated in place and mirrored back into the columns. Vt holds eigenvector
// candidates as rows.
inline void jacobi_rotate(RealMatrix& B, RealMatrix* Vt, int p, int q) {
    double bpq = B(p, q);
    if (bpq == 0.0) return;
    double bpp = B(p, p), bqq = B(q, q);
    double theta = (bqq - bpp) / (2.0 * bpq);
    double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    double c = 1.0 / std::sqrt(t * t + 1.0);
    double s = t * c;
    int n = B.rows;
    double* rp = &B.a[static_cast<size_t>(p) * n];
    double* rq = &B.a[static_cast<size_t>(q) * n];
    for (int i = 0; i < n; ++i) {
        double bip = rp[i], biq = rq[i];
        rp[i] = c * bip - s * biq;
        rq[i] = s * bip + c * biq;
    }
    rp[p] = bpp - t * bpq;
    rq[q] = bqq + t * bpq;
    rp[q] = 0.0;
    rq[p] = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == p || i == q) continue;
        B(i, p) = rp[i];
        B(i, q) = rq[i];
    }
    if (Vt) {
        double* vp = &Vt->a[static_cast<size_t>(p) * n];
        double* vq = &Vt->a[static_cast<size_t>(q) * n];
        for (int i = 0; i < n; ++i) {
            double vip = vp[i], viq = vq[i];
            vp[i] = c * vip - s * viq;
            vq[i] = s * vip + c * viq;
        }
    }
}

double offdiag_norm(const RealMatrix& B) {
    double s = 0;
    for (int p = 0; p < B.rows; ++p)
        for (int q = p + 1; q < B.cols; ++q) s += B(p, q) * B(p, q);
    return std::sqrt(2.0 * s);
}

EigenDecomposition jacobi_core(const RealMatrix& A, double tol, bool want_vectors) {
    if (!A.square()) throw DimensionMismatch("sym_eigen of non-square matrix");
    int n = A.rows;
    double normA = A.frobenius();
    double asym = (A - A.transposed()).frobenius();
    if (asym > tol * std::max(normA, 1e-300) && asym > 1e-300)
        throw NonSymmetric("matrix asymmetry " + std::to_string(asym));

    RealMatrix B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = 0.5 * (A(i, j) + A(j, i));
    RealMatrix Vt = RealMatrix::identity(n); // eigenvectors as rows while iterating
    RealMatrix* Vp = want_vectors ? &Vt : nullptr;

    double stop = 1e-12 * std::max(normA, 1e-300);
    const int max_sweeps = 100;
    bool converged = (n <= 1) || offdiag_norm(B) <= stop;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = offdiag_norm(B);
        if (off <= stop) { converged = true; break; }
        // small entries are skipped; they cannot move the residual past `stop`
        double skip = off / (static_cast<double>(n) * n) * 1e-2;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q)
                if (std::abs(B(p, q)) > skip) jacobi_rotate(B, Vp, p, q);
        if (offdiag_norm(B) <= stop) converged = true;
    }
    if (!converged) throw NoConvergence("Jacobi sweep cap reached");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return B(i, i) > B(j, j); });

    EigenDecomposition ed;
    ed.eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) ed.eigenvalues[i] = B(order[i], order[i]);
    if (want_vectors) {
        ed.eigenvectors = RealMatrix(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) ed.eigenvectors(i, j) = Vt(order[j], i);
    }
    return ed;
}

} // namespace

EigenDecomposition sym_eigen(const RealMatrix& A, double tol) { return jacobi_core(A, tol, true); }

std::vector<double> sym_eigenvalues(const RealMatrix& A, double tol) {
    return jacobi_core(A, tol, false).eigenvalues;
}

// ------------------------------------------------------ general eigenvalues

namespace {

void hessenberg_reduce(RealMatrix& A) {
    int n = A.rows;
    for (int k = 0; k < n - 2; ++k) {
        double scale = 0;
        for (int i = k + 1; i < n; ++i) scale += std::abs(A(i, k));
        if (scale == 0.0) continue;
        std::vector<double> v(n, 0.0);
        double h = 0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = A(i, k) / scale;
            h += v[i] * v[i];
        }
        double g = (v[k + 1] >= 0 ? -std::sqrt(h) : std::sqrt(h));
        h -= v[k + 1] * g;
        if (h == 0.0) continue;
        v[k + 1] -= g;
        // A <- P A P with P = I - v v^T / h
        for (int j = 0; j < n; ++j) {
            double f = 0;
            for (int i = k + 1; i < n; ++i) f += v[i] * A(i, j);
            f /= h;
            for (int i = k + 1; i < n; ++i) A(i, j) -= f * v[i];
        }
        for (int i = 0; i < n; ++i) {
            double f = 0;
            for (int j = k + 1; j < n; ++j) f += A(i, j) * v[j];
            f /= h;
            for (int j = k + 1; j < n; ++j) A(i, j) -= f * v[j];
        }
        A(k + 1, k) = scale * g;
        for (int i = k + 2; i < n; ++i) A(i, k) = 0.0;
    }
}

// Durand-Kerner on the characteristic polynomial, via Faddeev-LeVerrier.
std::vector<cplx> charpoly_roots(const RealMatrix& A) {
    int n = A.rows;
    std::vector<double> c(n + 1, 0.0);
    c[0] = 1.0;
    RealMatrix Mk = A;
    for (int k = 1; k <= n; ++k) {
        c[k] = -Mk.trace() / k;
        if (k < n) {
            RealMatrix shifted = Mk;
            for (int i = 0; i < n; ++i) shifted(i, i) += c[k];
            Mk = A * shifted;
        }
    }
    double radius = 0;
    for (int k = 1; k <= n; ++k) radius = std::max(radius, std::pow(std::abs(c[k]), 1.0 / k));
    radius = std::max(radius, 1e-30) * 1.2;
    std::vector<cplx> z(n);
    cplx seed(0.4, 0.9);
    cplx w = radius;
    for (int j = 0; j < n; ++j) { w *= seed; z[j] = w; }
    auto eval = [&](cplx x) {
        cplx p = c[0];
        for (int k = 1; k <= n; ++k) p = p * x + c[k];
        return p;
    };
    for (int iter = 0; iter < 500; ++iter) {
        double move = 0;
        for (int j = 0; j < n; ++j) {
            cplx denom = 1.0;
            for (int k = 0; k < n; ++k)
                if (k != j) denom *= (z[j] - z[k]);
            if (denom == cplx(0.0)) denom = 1e-30;
            cplx dz = eval(z[j]) / denom;
            z[j] -= dz;
            move = std::max(move, std::abs(dz));
        }
        if (move < 1e-14 * (radius + 1.0)) break;
    }
    return z;
}

// Complex single-shift QR on an upper Hessenberg matrix; the first couple of
// iterations per eigenvalue run unshifted, then Wilkinson shifts take over.
std::vector<cplx> hessenberg_qr_eigenvalues(const RealMatrix& Areal) {
    int n = Areal.rows;
    ComplexMatrix H = ComplexMatrix::from_real(Areal);
    std::vector<cplx> eig;
    eig.reserve(n);
    double anorm = Areal.frobenius() + 1e-300;
    const double eps = 1e-15;

    int hi = n - 1;
    int total_iters = 0;
    const int iter_cap = 60 * n + 200;
    while (hi >= 0) {
        if (hi == 0) {
            eig.push_back(H(0, 0));
            break;
        }
        int its = 0;
        for (;;) {
            if (++total_iters > iter_cap) throw NoConvergence("QR iteration stalled");
            int lo = hi;
            while (lo > 0) {
                double s = std::abs(H(lo - 1, lo - 1)) + std::abs(H(lo, lo));
                if (s == 0.0) s = anorm;
                if (std::abs(H(lo, lo - 1)) <= eps * s) {
                    H(lo, lo - 1) = 0.0;
                    break;
                }
                --lo;
            }
            if (lo == hi) {
                eig.push_back(H(hi, hi));
                --hi;
                break;
            }
            cplx shift = 0.0;
            if (its >= 2) {
                // Wilkinson: trailing 2x2 eigenvalue nearest H(hi,hi)
                cplx a = H(hi - 1, hi - 1), b = H(hi - 1, hi);
                cplx c = H(hi, hi - 1), d = H(hi, hi);
                cplx tr2 = 0.5 * (a + d);
                cplx disc = std::sqrt(tr2 * tr2 - (a * d - b * c));
                cplx l1 = tr2 + disc, l2 = tr2 - disc;
                shift = (std::abs(l1 - d) < std::abs(l2 - d)) ? l1 : l2;
            }
            if (its > 0 && its % 12 == 0) {
                // exceptional shift to break symmetry-induced cycling
                shift = cplx(std::abs(H(hi, hi - 1).real()) + std::abs(H(hi, hi).real()),
                             0.3 * anorm / n);
            }
            ++its;
            for (int i = lo; i <= hi; ++i) H(i, i) -= shift;
            // QR by Givens rotations, then RQ
            std::vector<cplx> cs(hi), sn(hi);
            for (int k = lo; k < hi; ++k) {
                cplx x = H(k, k), y = H(k + 1, k);
                double r = std::hypot(std::abs(x), std::abs(y));
                if (r == 0.0) { cs[k] = 1.0; sn[k] = 0.0; continue; }
                cs[k] = x / r;
                sn[k] = y / r;
                for (int j = k; j <= hi; ++j) {
                    cplx t1 = H(k, j), t2 = H(k + 1, j);
                    H(k, j) = std::conj(cs[k]) * t1 + std::conj(sn[k]) * t2;
                    H(k + 1, j) = -sn[k] * t1 + cs[k] * t2;
                }
            }
            for (int k = lo; k < hi; ++k) {
                // rows below k+1 hold zeros in columns k and k+1 of R
                for (int i = lo; i <= std::min(k + 1, hi); ++i) {
                    cplx t1 = H(i, k), t2 = H(i, k + 1);
                    H(i, k) = t1 * cs[k] + t2 * sn[k];
                    H(i, k + 1) = -t1 * std::conj(sn[k]) + t2 * std::conj(cs[k]);
                }
            }
            for (int i = lo; i <= hi; ++i) H(i, i) += shift;
        }
    }
    return eig;
}

} // namespace

std::vector<cplx> general_eigenvalues(const RealMatrix& A) {
    if (!A.square()) throw DimensionMismatch();
    int n = A.rows;
    if (n == 0) return {};
    if (n == 1) return {cplx(A(0, 0))};
    RealMatrix H = A;
    hessenberg_reduce(H);
    try {
        return hessenberg_qr_eigenvalues(H);
    } catch (const NoConvergence&) {
        if (n <= 8) return charpoly_roots(A);
        throw EigenFailure("QR failed and matrix too large for the polynomial fallback");
    }
}

// ----------------------------------------------------------- matrix functions

namespace {

// series for ch (even, /(2n)!) and sh (even, /(2n+1)!) of the scaled argument
void even_series(const ComplexMatrix& M, ComplexMatrix& ch, ComplexMatrix& sh) {
    int n = M.rows;
    ComplexMatrix M2 = M * M;
    ch = ComplexMatrix::identity(n);
    sh = ComplexMatrix::identity(n);
    ComplexMatrix cterm = ComplexMatrix::identity(n);
    ComplexMatrix sterm = ComplexMatrix::identity(n);
    for (int k = 1; k <= 200; ++k) {
        double c2 = static_cast<double>(2 * k - 1) * (2 * k);
        double s2 = static_cast<double>(2 * k) * (2 * k + 1);
        cterm = (cplx(1.0 / c2)) * (cterm * M2);
        sterm = (cplx(1.0 / s2)) * (sterm * M2);
        ch = ch + cterm;
        sh = sh + sterm;
        double rel = std::max(cterm.frobenius() / (ch.frobenius() + 1e-300),
                              sterm.frobenius() / (sh.frobenius() + 1e-300));
        if (rel < 1e-16) break;
    }
}

} // namespace

MatrixFunctions matrix_functions(const ComplexMatrix& M, bool want_tnh) {
    if (!M.square()) throw DimensionMismatch("matrix_functions of non-square matrix");
    int n = M.rows;
    double normM = M.frobenius();
    int s = 0;
    if (normM > 1.0) s = static_cast<int>(std::ceil(std::log2(normM)));
    cplx scale = std::pow(2.0, -s);
    ComplexMatrix Ms = scale * M;

    MatrixFunctions out;
    even_series(Ms, out.ch, out.sh);
    for (int k = 0; k < s; ++k) {
        ComplexMatrix ch_old = out.ch;
        out.ch = cplx(2.0) * (ch_old * ch_old) - ComplexMatrix::identity(n);
        out.sh = out.sh * ch_old; // sh(2X) = sh(X) ch(X)
    }
    out.snh = M * out.sh;
    out.e = out.ch + out.snh;

    if (want_tnh) {
        cplx dch = det(out.ch);
        double threshold = 1e-12 * std::pow(1.0 + normM, n);
        if (std::abs(dch) < threshold)
            throw SingularCh("det ch[M] = " + std::to_string(std::abs(dch)));
        out.tnh = out.sh * inverse(out.ch);
    }
    return out;
}

ComplexMatrix expm(const ComplexMatrix& M) {
    MatrixFunctions f = matrix_functions(M, false);
    return f.e;
}

RealMatrix expm(const RealMatrix& M) { return expm(ComplexMatrix::from_real(M)).real_part(); }

ComplexMatrix putzer_exp(const RealMatrix& M, double t, const std::vector<cplx>& eigenvalues) {
    if (!M.square()) throw DimensionMismatch();
    int n = M.rows;
    if (static_cast<int>(eigenvalues.size()) != n)
        throw DimensionMismatch("eigenvalue count does not match dimension");
    if (n == 0) return ComplexMatrix();

    // r' = Lambda r with lower-bidiagonal Lambda, r(0) = e_1
    ComplexMatrix L(n, n);
    for (int j = 0; j < n; ++j) {
        L(j, j) = eigenvalues[j];
        if (j > 0) L(j, j - 1) = 1.0;
    }
    ComplexMatrix Et = expm(cplx(t) * L);
    std::vector<cplx> r(n);
    for (int j = 0; j < n; ++j) r[j] = Et(j, 0);

    ComplexMatrix Mc = ComplexMatrix::from_real(M);
    ComplexMatrix P = ComplexMatrix::identity(n);
    ComplexMatrix sum(n, n);
    for (int j = 0; j < n; ++j) {
        if (j > 0) {
            ComplexMatrix shifted = Mc;
            for (int i = 0; i < n; ++i) shifted(i, i) -= eigenvalues[j - 1];
            P = shifted * P;
        }
        sum = sum + r[j] * P;
    }
    return sum;
}

// ------------------------------------------- kth order constant-coefficient ODE

namespace {

RealMatrix block_companion(const std::vector<RealMatrix>& C) {
    int k = static_cast<int>(C.size());
    int d = C[0].rows;
    RealMatrix M(k * d, k * d);
    for (int b = 0; b + 1 < k; ++b)
        for (int i = 0; i < d; ++i) M(b * d + i, (b + 1) * d + i) = 1.0;
    for (int b = 0; b < k; ++b)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) M((k - 1) * d + i, b * d + j) = C[b](i, j);
    return M;
}

void check_coefficients(const std::vector<RealMatrix>& C, const std::vector<RealMatrix>& U0) {
    if (C.empty() || C.size() != U0.size()) throw DimensionMismatch("need k coefficients and k initial values");
    int d = C[0].rows;
    for (const auto& M : C)
        if (M.rows != d || M.cols != d) throw DimensionMismatch();
    for (const auto& M : U0)
        if (M.rows != d || M.cols != d) throw DimensionMismatch();
}

} // namespace

std::vector<RealMatrix> kth_order_ode_constant(const std::vector<RealMatrix>& C,
                                               const std::vector<RealMatrix>& U0,
                                               const std::vector<double>& tgrid,
                                               const std::vector<cplx>* eigenvalues) {
    check_coefficients(C, U0);
    int k = static_cast<int>(C.size());
    int d = C[0].rows;
    int kd = k * d;

    RealMatrix M = block_companion(C);
    std::vector<cplx> lam = eigenvalues ? *eigenvalues : general_eigenvalues(M);
    if (static_cast<int>(lam.size()) != kd) throw EigenFailure("wrong eigenvalue count");

    // r_j^{(m)}(0) from the bidiagonal recursion
    std::vector<std::vector<cplx>> rder(kd + 1, std::vector<cplx>(kd, cplx(0.0)));
    rder[0][0] = 1.0;
    for (int m = 1; m <= kd; ++m)
        for (int j = 0; j < kd; ++j)
            rder[m][j] = lam[j] * rder[m - 1][j] + (j > 0 ? rder[m - 1][j - 1] : cplx(0.0));

    // Q recursion
    std::vector<ComplexMatrix> Q(kd, ComplexMatrix(d, d));
    Q[0] = ComplexMatrix::from_real(U0[0]);
    for (int m = 1; m <= k - 1; ++m) {
        ComplexMatrix acc = ComplexMatrix::from_real(U0[m]);
        for (int j = 0; j < m; ++j) acc = acc - rder[m][j] * Q[j];
        Q[m] = acc;
    }
    std::vector<ComplexMatrix> Cc(k, ComplexMatrix(d, d));
    for (int i = 0; i < k; ++i) Cc[i] = ComplexMatrix::from_real(C[i]);
    for (int n = 0; n <= k * (d - 1) - 1; ++n) {
        ComplexMatrix acc(d, d);
        for (int i = 0; i < k; ++i) {
            ComplexMatrix inner(d, d);
            for (int j = 0; j <= i + n && j < kd; ++j) inner = inner + rder[i + n][j] * Q[j];
            acc = acc + Cc[i] * inner;
        }
        for (int j = 0; j <= k + n - 1 && j < kd; ++j) acc = acc - rder[k + n][j] * Q[j];
        Q[k + n] = acc;
    }

    ComplexMatrix L(kd, kd);
    for (int j = 0; j < kd; ++j) {
        L(j, j) = lam[j];
        if (j > 0) L(j, j - 1) = 1.0;
    }
    std::vector<RealMatrix> out;
    out.reserve(tgrid.size());
    for (double t : tgrid) {
        ComplexMatrix Et = expm(cplx(t) * L);
        ComplexMatrix U(d, d);
        for (int j = 0; j < kd; ++j) U = U + Et(j, 0) * Q[j];
        out.push_back(U.real_part());
    }
    return out;
}

ComplexMatrix kth_order_ode_distinct(const std::vector<RealMatrix>& C,
                                     const std::vector<RealMatrix>& U0,
                                     const std::vector<cplx>& nu, double t) {
    check_coefficients(C, U0);
    int k = static_cast<int>(C.size());
    int d = C[0].rows;
    int kd = k * d;
    if (static_cast<int>(nu.size()) != kd) throw DimensionMismatch("need kd eigenvalues");

    double scale = 0;
    for (const cplx& v : nu) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < kd; ++i)
        for (int j = i + 1; j < kd; ++j)
            if (std::abs(nu[i] - nu[j]) <= 1e-10 * std::max(scale, 1.0))
                throw RepeatedEigenvalue();

    // hat-U recursion, then the Vandermonde solve, entrywise over (p,q)
    std::vector<ComplexMatrix> Uhat(kd, ComplexMatrix(d, d));
    for (int n = 0; n < k; ++n) Uhat[n] = ComplexMatrix::from_real(U0[n]);
    for (int n = k; n < kd; ++n) {
        ComplexMatrix acc(d, d);
        for (int i = 0; i < k; ++i) acc = acc + ComplexMatrix::from_real(C[i]) * Uhat[n - k + i];
        Uhat[n] = acc;
    }
    ComplexMatrix V(kd, kd);
    for (int i = 0; i < kd; ++i)
        for (int j = 0; j < kd; ++j) V(i, j) = std::pow(nu[j], i);
    CLU vf(V);
    if (vf.pivot_spread() < 1e-14) throw IllConditionedVandermonde();

    std::vector<ComplexMatrix> Q(kd, ComplexMatrix(d, d));
    std::vector<cplx> rhs(kd), sol(kd);
    for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) {
            for (int n = 0; n < kd; ++n) rhs[n] = Uhat[n](p, q);
            sol = vf.solve(rhs);
            for (int j = 0; j < kd; ++j) Q[j](p, q) = sol[j];
        }

    ComplexMatrix U(d, d);
    for (int j = 0; j < kd; ++j) U = U + std::exp(nu[j] * t) * Q[j];
    return U;
}

// ------------------------------------------------- Cauchy / Lagrange identities

double cauchy_det(const std::vector<double>& alpha, const std::vector<double>& beta) {
    size_t n = alpha.size();
    if (beta.size() != n) throw DimensionMismatch();
    double scale = 0;
    for (size_t i = 0; i < n; ++i) scale = std::max({scale, std::abs(alpha[i]), std::abs(beta[i])});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if (std::abs(alpha[i] + beta[j]) <= 1e-14 * std::max(scale, 1.0))
                throw SingularEntry();
    double num = 1.0, den = 1.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) num *= (alpha[i] - alpha[j]) * (beta[i] - beta[j]);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) den *= (alpha[i] + beta[j]);
    return num / den;
}

double lagrange_sum(const std::vector<double>& a, const std::vector<double>& b, double z) {
    size_t n = a.size();
    if (b.size() + 1 != n && !(n == 1 && b.empty()))
        throw DimensionMismatch("need n nodes and n-1 offsets");
    double scale = 0;
    for (double x : a) scale = std::max(scale, std::abs(x));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (std::abs(a[i] - a[j]) <= 1e-14 * std::max(scale, 1.0)) throw RepeatedNode();
    double total = 0;
    for (size_t k = 0; k < n; ++k) {
        double num = 1.0, den = 1.0;
        for (size_t j = 0; j < b.size(); ++j) num *= (a[k] + b[j]);
        for (size_t i = 0; i < n; ++i) {
            if (i == k) continue;
            num *= (a[i] - z);
            den *= (a[i] - a[k]);
        }
        total += num / den;
    }
    return total;
}

} // namespace qwf
