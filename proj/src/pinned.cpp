#include "qwf/pinned.hpp"

#include <algorithm>
#include <cmath>

namespace qwf {

namespace {

// composite Simpson over a uniformly sampled path (even step count assumed;
// falls back to trapezoid on the last cell otherwise)
double simpson_path(const std::vector<double>& t, const std::vector<double>& f) {
    size_t m = t.size() - 1;
    double h = t[1] - t[0], acc = 0;
    size_t k = 0;
    for (; k + 2 <= m; k += 2) acc += (h / 3.0) * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
    if (k < m) acc += 0.5 * h * (f[k] + f[k + 1]);
    return acc;
}

struct SecondOrderForward {
    MatrixPath U, Uprime;
};

// U'' = 2 sigma_A U' + sigma' U, U(0) = U0, U'(0) = U1, integrated forward
SecondOrderForward forward_second_order(const SigmaPath& sigma, const RealMatrix& U0,
                                        const RealMatrix& U1, int steps) {
    int d = sigma.d;
    double T = sigma.T, h = T / steps;
    SecondOrderForward out;
    out.U.t.resize(steps + 1);
    out.U.v.resize(steps + 1);
    out.Uprime.t.resize(steps + 1);
    out.Uprime.v.resize(steps + 1);
    RealMatrix U = U0, V = U1;
    out.U.v[0] = U;
    out.Uprime.v[0] = V;
    auto acc = [&](double t, const RealMatrix& u, const RealMatrix& v) {
        return 2.0 * (skew_part(sigma(t)) * v) + sigma.deriv(t) * u;
    };
    for (int k = 0; k < steps; ++k) {
        double t = k * h;
        RealMatrix k1u = V, k1v = acc(t, U, V);
        RealMatrix k2u = V + (0.5 * h) * k1v, k2v = acc(t + 0.5 * h, U + (0.5 * h) * k1u, k2u);
        RealMatrix k3u = V + (0.5 * h) * k2v, k3v = acc(t + 0.5 * h, U + (0.5 * h) * k2u, k3u);
        RealMatrix k4u = V + h * k3v, k4v = acc(t + h, U + h * k3u, k4u);
        U = U + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        V = V + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if (!U.finite() || !V.finite()) throw NonFinite();
        out.U.v[k + 1] = U;
        out.Uprime.v[k + 1] = V;
    }
    for (int k = 0; k <= steps; ++k) out.U.t[k] = out.Uprime.t[k] = k * h;
    return out;
}

double log_or_throw(double det, int N, const char* what) {
    if (!(det > 0))
        throw DegenerateJN(std::string(what) + " determinant " + std::to_string(det) +
                           " at N = " + std::to_string(N));
    return std::log(det);
}

} // namespace

RealMatrix PluckerFrame::JN(int N) const {
    if (N < 0 || N > M) throw BadParams("need 0 <= N <= M");
    RealMatrix out(M, M);
    for (int j = 0; j < M; ++j)
        for (int c = 0; c < M; ++c) out(j, c) = (j < N) ? JM(j, c) : J0(j, c);
    return out;
}

PinnedValue plucker_pinned(const PluckerFrame& frame, int N) {
    RealMatrix JNmat = frame.JN(N);
    double detJ = det(JNmat);
    double scale = std::max(1.0, JNmat.frobenius());
    if (std::abs(detJ) < 1e-10 * std::pow(scale, frame.M))
        throw DegenerateJN("det J_N below threshold");
    PinnedValue out;
    out.N = N;
    out.det_JN = detJ;
    out.log_detC_N = frame.log_detC[N];
    out.log_detC_M = frame.log_detC[frame.M];
    out.log_det2_AI = frame.log_det2_AI;
    out.trace_AF = frame.trace_AF;
    double logJ = log_or_throw(detJ, N, "J_N");
    double logv = 0.5 * (out.log_detC_M - N * std::log(2.0 * M_PI) - out.log_detC_N - logJ) -
                  0.5 * frame.log_det2_AI - 0.5 * frame.trace_AF;
    out.value = std::exp(logv);
    return out;
}

// ----------------------------------------------------------- rho_sigma family

PluckerFrame plucker_frame_rho_sigma(const SigmaPath& sigma, int steps) {
    int d = sigma.d;
    double T = sigma.T;
    SecondOrderForward sol =
        forward_second_order(sigma, RealMatrix(d, d), RealMatrix::identity(d), steps);

    // Sigma = int_0^T sigma(s)^T U'(s) ds, entrywise Simpson over the path
    RealMatrix Sig(d, d);
    {
        std::vector<double> f(sol.U.t.size());
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                for (size_t k = 0; k < sol.U.t.size(); ++k) {
                    RealMatrix integrand = sigma(sol.U.t[k]).transposed() * sol.Uprime.v[k];
                    f[k] = integrand(a, b);
                }
                Sig(a, b) = simpson_path(sol.U.t, f);
            }
    }

    PluckerFrame frame;
    frame.M = d;
    frame.JM = sol.U.v.back(); // U(T)
    frame.J0 = T * (RealMatrix::identity(d) - Sig);
    frame.log_detC.resize(d + 1);
    for (int N = 0; N <= d; ++N) frame.log_detC[N] = N * std::log(T);
    frame.log_det2_AI = 0.0; // Volterra splitting
    std::vector<double> tr(sol.U.t.size());
    for (size_t k = 0; k < sol.U.t.size(); ++k) tr[k] = sigma(sol.U.t[k]).trace();
    frame.trace_AF = simpson_path(sol.U.t, tr);
    frame.constant_log = 0.0;
    return frame;
}

// ------------------------------------------------------ sample-variance family

PluckerFrame plucker_frame_sample_variance(const RealMatrix& D, double T, int steps) {
    if ((D - D.transposed()).frobenius() > 1e-12 * std::max(1.0, D.frobenius()))
        throw BadParams("need symmetric D");
    int d = D.rows;
    std::vector<double> grid(steps + 1);
    for (int k = 0; k <= steps; ++k) grid[k] = T * k / steps;

    // third-order solver J''' = D J'; J and J' both solve it, with shifted data
    RealMatrix Z(d, d), I = RealMatrix::identity(d);
    std::vector<RealMatrix> C{Z, D, Z};
    auto solve_pair = [&](const RealMatrix& j0, const RealMatrix& j1, const RealMatrix& j2) {
        std::vector<RealMatrix> J = kth_order_ode_constant(C, {j0, j1, j2}, grid);
        std::vector<RealMatrix> Jp = kth_order_ode_constant(C, {j1, j2, D * j1}, grid);
        return std::make_pair(std::move(J), std::move(Jp));
    };
    auto [J1, J1p] = solve_pair(Z, I, Z);                 // p-block 1: J'(0) = I
    auto [J2, J2p] = solve_pair(Z, (-0.5 * T) * I, I);    // p-block 2: J'(0) = -T/2, J''(0) = I

    // row functionals over a path and its derivative
    auto row_JT = [&](const std::vector<RealMatrix>& J) { return J.back(); };
    auto weighted = [&](const std::vector<RealMatrix>& Jp,
                        const std::function<RealMatrix(double)>& w) {
        RealMatrix acc(d, d);
        std::vector<double> f(grid.size());
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                for (size_t k = 0; k < grid.size(); ++k) {
                    RealMatrix x = w(grid[k]) * Jp[k];
                    f[k] = x(a, b);
                }
                acc(a, b) = simpson_path(grid, f);
            }
        return acc;
    };
    auto tw = [&](double t) { return t * I; };
    auto bpoly1 = [&](double t) { return (t * (T - t) / 2.0) * D; };
    auto bpoly2 = [&](double t) {
        return t * I - (t * t * t / 6.0 - T * t * t / 4.0 + T * T * t / 12.0) * D;
    };

    PluckerFrame frame;
    frame.M = 2 * d;
    frame.JM = RealMatrix(2 * d, 2 * d);
    frame.J0 = RealMatrix(2 * d, 2 * d);
    auto put = [&](RealMatrix& dst, int brow, int bcol, const RealMatrix& blk) {
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) dst(brow * d + a, bcol * d + b) = blk(a, b);
    };
    // <J_p, k_i> rows and <J_p, k_{d+i}> rows for both p-blocks
    put(frame.JM, 0, 0, row_JT(J1));
    put(frame.JM, 0, 1, row_JT(J2));
    put(frame.JM, 1, 0, (-0.5 * T) * row_JT(J1) + weighted(J1p, tw));
    put(frame.JM, 1, 1, (-0.5 * T) * row_JT(J2) + weighted(J2p, tw));
    put(frame.J0, 0, 0, row_JT(J1) + weighted(J1p, bpoly1));
    put(frame.J0, 0, 1, row_JT(J2) + weighted(J2p, bpoly1));
    put(frame.J0, 1, 0, (-0.5 * T) * row_JT(J1) + weighted(J1p, bpoly2));
    put(frame.J0, 1, 1, (-0.5 * T) * row_JT(J2) + weighted(J2p, bpoly2));

    frame.log_detC.resize(2 * d + 1);
    for (int N = 0; N <= 2 * d; ++N) {
        double ld = std::min(N, d) * std::log(T);
        if (N > d) ld += (N - d) * std::log(T * T * T / 12.0);
        frame.log_detC[N] = ld;
    }
    frame.log_det2_AI = 0.0;
    frame.trace_AF = -T * T / 6.0 * D.trace(); // int tr[-(t/T)(T-t) D] dt
    frame.constant_log = -T * T / 12.0 * D.trace(); // e^{-v_D} = e^{q_{-eta}} * this
    return frame;
}

// ---------------------------------------------------- iterated-integral family

namespace {

// matrix-coefficient polynomials in t
using MatPoly = std::vector<RealMatrix>;

MatPoly mp_zero(int d) { return {RealMatrix(d, d)}; }

MatPoly mp_add(const MatPoly& a, const MatPoly& b) {
    MatPoly out(std::max(a.size(), b.size()), RealMatrix(a[0].rows, a[0].cols));
    for (size_t i = 0; i < a.size(); ++i) out[i] = out[i] + a[i];
    for (size_t i = 0; i < b.size(); ++i) out[i] = out[i] + b[i];
    return out;
}

MatPoly mp_scale(double c, const MatPoly& a) {
    MatPoly out = a;
    for (auto& M : out) M = c * M;
    return out;
}

// multiply by the scalar monomial t^k
MatPoly mp_shift(const MatPoly& a, int k) {
    MatPoly out(a.size() + k, RealMatrix(a[0].rows, a[0].cols));
    for (size_t i = 0; i < a.size(); ++i) out[i + k] = a[i];
    return out;
}

RealMatrix mp_eval(const MatPoly& a, double t) {
    RealMatrix acc(a[0].rows, a[0].cols);
    double tk = 1.0;
    for (const auto& M : a) {
        acc = acc + tk * M;
        tk *= t;
    }
    return acc;
}

// antiderivative with value zero at the origin
MatPoly mp_integrate(const MatPoly& a) {
    MatPoly out(a.size() + 1, RealMatrix(a[0].rows, a[0].cols));
    for (size_t i = 0; i < a.size(); ++i) out[i + 1] = (1.0 / (i + 1.0)) * a[i];
    return out;
}

// int_t^T (u-t)^q / q! M(u) du as a polynomial in t
MatPoly mp_volterra_tail(const MatPoly& M, int q, double T) {
    int d = M[0].rows;
    MatPoly total = mp_zero(d);
    for (int a = 0; a <= q; ++a) {
        double afact = 1.0, bfact = 1.0;
        for (int j = 2; j <= a; ++j) afact *= j;
        for (int j = 2; j <= q - a; ++j) bfact *= j;
        // coefficient of u^a (-t)^{q-a} / (a! (q-a)!)
        MatPoly Qa = mp_integrate(mp_shift(M, a)); // antiderivative of u^a M(u)
        RealMatrix QaT = mp_eval(Qa, T);
        // (Qa(T) - Qa(t)) * (-t)^{q-a} / (a!(q-a)!)
        double sign = ((q - a) % 2 == 0) ? 1.0 : -1.0;
        MatPoly term = mp_scale(-1.0, Qa);
        term[0] = term[0] + QaT;
        term = mp_shift(term, q - a);
        total = mp_add(total, mp_scale(sign / (afact * bfact), term));
    }
    return total;
}

double factorial(int n) {
    double f = 1;
    for (int j = 2; j <= n; ++j) f *= j;
    return f;
}

// monic orthogonal polynomials on [0,T] up to degree 2 (as used by the pins)
std::vector<std::vector<double>> pin_polys(double T, int count) {
    std::vector<std::vector<double>> f;
    f.push_back({1.0});
    if (count > 1) f.push_back({-T / 2.0, 1.0});
    if (count > 2) f.push_back({T * T / 6.0, -T, 1.0});
    return f;
}

double poly_eval(const std::vector<double>& c, double t) {
    double acc = 0, tk = 1;
    for (double x : c) {
        acc += x * tk;
        tk *= t;
    }
    return acc;
}

// squared L2 norms of the pin polynomials on [0,T]
double pin_norm2(int n, double T) {
    if (n == 0) return T;
    if (n == 1) return T * T * T / 12.0;
    return T * T * T * T * T / 180.0;
}

} // namespace

PluckerFrame plucker_frame_iterated(const RealMatrix& C, const RealMatrix& D, double T,
                                    int n_iter, int steps) {
    if (n_iter != 1 && n_iter != 2)
        throw BadParams("iterated family is built for one or two time integrations");
    if ((D - D.transposed()).frobenius() > 1e-12 * std::max(1.0, D.frobenius()))
        throw BadParams("need symmetric D");
    int d = C.rows;
    int Nit = n_iter;
    int k_order = 2 * Nit + 2;
    RealMatrix A = 2.0 * skew_part(C); // C - C^T
    double sgn = (Nit % 2 == 0) ? 1.0 : -1.0;

    // J^{(2N+2)} = (-1)^N A J' - (-1)^N D J
    std::vector<RealMatrix> coeff(k_order, RealMatrix(d, d));
    coeff[0] = (-sgn) * D;
    coeff[1] = sgn * A;

    std::vector<double> grid(steps + 1);
    for (int k = 0; k <= steps; ++k) grid[k] = T * k / steps;
    std::vector<std::vector<double>> f = pin_polys(T, Nit + 1);

    // block solutions: pin block b has J^{(i)}(0) = f_b^{(i-1)}(0) I
    std::vector<std::vector<RealMatrix>> Jpath(Nit + 1), Jppath(Nit + 1);
    for (int b = 0; b <= Nit; ++b) {
        std::vector<RealMatrix> init(k_order, RealMatrix(d, d));
        std::vector<RealMatrix> init_d(k_order, RealMatrix(d, d));
        for (int i = 1; i < k_order; ++i) {
            int der = i - 1;
            double c = (der < static_cast<int>(f[b].size()))
                           ? f[b][der] * factorial(der)
                           : 0.0; // f_b^{(der)}(0)
            for (int a = 0; a < d; ++a) init[i](a, a) = c;
        }
        // derivative path solves the same equation with shifted data:
        // (J')^{(i)}(0) = J^{(i+1)}(0), closing with the ODE at the top order
        for (int i = 0; i + 1 < k_order; ++i) init_d[i] = init[i + 1];
        init_d[k_order - 1] = coeff[0] * init[0] + coeff[1] * init[1];
        Jpath[b] = kth_order_ode_constant(coeff, init, grid);
        Jppath[b] = kth_order_ode_constant(coeff, init_d, grid);
    }

    // sigma(u) = C/2 + (T-u) D as a matrix polynomial
    MatPoly sigma_poly{0.5 * C + T * D, -1.0 * D};
    MatPoly sigma_polyT{0.5 * C.transposed() + T * D, -1.0 * D};

    // (B_eta k_{b,i})'(t) = P_b(t) e_i with
    // P_b = int_t^T gamma_{N-1}(u,t) sigma(u) F_{N,b}(u) du
    //     + int_t^T gamma_N(u,t) sigma(u)^T F_{N-1,b}(u) du,
    // F_{q,b}(u) = int_0^u (u-s)^q/q! f_b(s) ds (iterated integrals of the pin)
    std::vector<MatPoly> P(Nit + 1, mp_zero(d));
    for (int b = 0; b <= Nit; ++b) {
        MatPoly fb(f[b].size(), RealMatrix(d, d));
        for (size_t i = 0; i < f[b].size(); ++i) fb[i] = f[b][i] * RealMatrix::identity(d);
        MatPoly FN = fb;
        for (int j = 0; j <= Nit; ++j) FN = mp_integrate(FN); // (N+1)-fold
        MatPoly FNm1 = fb;
        for (int j = 0; j < Nit; ++j) FNm1 = mp_integrate(FNm1); // N-fold
        MatPoly t1(FN.size() + 1, RealMatrix(d, d)), t2(FNm1.size() + 1, RealMatrix(d, d));
        // sigma(u) F_{N,b}(u) and sigma(u)^T F_{N-1,b}(u), polynomial products
        auto mp_mul = [&](const MatPoly& L, const MatPoly& R) {
            MatPoly out(L.size() + R.size() - 1, RealMatrix(d, d));
            for (size_t i = 0; i < L.size(); ++i)
                for (size_t j = 0; j < R.size(); ++j) out[i + j] = out[i + j] + L[i] * R[j];
            return out;
        };
        t1 = mp_mul(sigma_poly, FN);
        t2 = mp_mul(sigma_polyT, FNm1);
        P[b] = mp_add(mp_volterra_tail(t1, Nit - 1, T), mp_volterra_tail(t2, Nit, T));
    }

    int M = (Nit + 1) * d;
    PluckerFrame frame;
    frame.M = M;
    frame.JM = RealMatrix(M, M);
    frame.J0 = RealMatrix(M, M);
    std::vector<double> fval(grid.size());
    for (int brow = 0; brow <= Nit; ++brow)
        for (int bcol = 0; bcol <= Nit; ++bcol) {
            RealMatrix blkM(d, d), blk0(d, d);
            for (int a = 0; a < d; ++a)
                for (int bb = 0; bb < d; ++bb) {
                    for (size_t k = 0; k < grid.size(); ++k)
                        fval[k] = poly_eval(f[brow], grid[k]) * Jppath[bcol][k](a, bb);
                    blkM(a, bb) = simpson_path(grid, fval);
                    for (size_t k = 0; k < grid.size(); ++k) {
                        RealMatrix w = mp_eval(P[brow], grid[k]).transposed() * Jppath[bcol][k];
                        fval[k] = w(a, bb);
                    }
                    blk0(a, bb) = blkM(a, bb) - simpson_path(grid, fval);
                }
            for (int a = 0; a < d; ++a)
                for (int bb = 0; bb < d; ++bb) {
                    frame.JM(brow * d + a, bcol * d + bb) = blkM(a, bb);
                    frame.J0(brow * d + a, bcol * d + bb) = blk0(a, bb);
                }
        }

    frame.log_detC.resize(M + 1);
    for (int N = 0; N <= M; ++N) {
        double ld = 0;
        for (int j = 0; j < N; ++j) ld += std::log(pin_norm2(j / d, T));
        frame.log_detC[N] = ld;
    }
    frame.log_det2_AI = 0.0;
    // tr A_F = (1/(N!)^2) int_0^T u^{2N} tr sigma(u) du
    {
        double trC = C.trace(), trD = D.trace();
        double p1 = std::pow(T, 2 * Nit + 1) / (2 * Nit + 1);
        double p2 = T * std::pow(T, 2 * Nit + 1) / (2 * Nit + 1) -
                    std::pow(T, 2 * Nit + 2) / (2 * Nit + 2);
        frame.trace_AF = (0.5 * trC * p1 + trD * p2) / std::pow(factorial(Nit), 2);
    }
    frame.constant_log = 0.5 * frame.trace_AF;
    return frame;
}

// ------------------------------------------------------ condition-A splittings

namespace {

double max_abs_entry(const RealMatrix& M) {
    double m = 0;
    for (double x : M.a) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

ConditionADecomposition decompose_condition_A_rho_sigma(const SigmaPath& sigma, int n) {
    int d = sigma.d;
    double T = sigma.T;
    GridKernel eta = rho_sigma_kernel(sigma, n);
    // kappa_I(t,s) = 1_{[0,t)}(s){sigma(t) - sigma(s)^T}: the diagonal cell
    // takes the averaged one-sided limits, sigma_A(t), so the split stays exact
    GridKernel kI(d, n, T, false), kF(d, n, T, false);
    for (int i = 0; i < n; ++i) {
        RealMatrix si = sigma(kI.t(i));
        for (int j = 0; j < n; ++j) {
            RealMatrix sjT = sigma(kI.t(j)).transposed();
            if (j < i) kI.set_block(i, j, si - sjT);
            else if (j == i) kI.set_block(i, i, skew_part(si));
            kF.set_block(i, j, sjT);
        }
    }
    ConditionADecomposition out;
    out.A_I = to_operator(kI).m;
    out.A_F = to_operator(kF).m;
    out.rank_bound = d;
    for (int j = 0; j < d; ++j)
        out.factors.push_back(CMVector::from_function(d, n, T, [j, d](double) {
            std::vector<double> e(d, 0.0);
            e[j] = 1.0;
            return e;
        }));
    out.log_det2_AI = det2_nonsym(out.A_I).log_abs;
    out.split_defect = max_abs_entry(out.A_I + out.A_F - to_operator(eta).m);
    return out;
}

ConditionADecomposition decompose_condition_A_sample_variance(const RealMatrix& D, double T,
                                                              int n) {
    int d = D.rows;
    GridKernel eta = (-1.0) * sample_variance_kernel(D, n, T);
    GridKernel kI(d, n, T, false), kF(d, n, T, false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double t = kI.t(i), s = kI.t(j);
            if (j < i) kI.set_block(i, j, (t - s) * D);
            kF.set_block(i, j, (-(t / T) * (T - s)) * D);
        }
    ConditionADecomposition out;
    out.A_I = to_operator(kI).m;
    out.A_F = to_operator(kF).m;
    out.rank_bound = 2 * d;
    for (int j = 0; j < d; ++j) {
        out.factors.push_back(CMVector::from_function(d, n, T, [j, d](double) {
            std::vector<double> e(d, 0.0);
            e[j] = 1.0;
            return e;
        }));
        out.factors.push_back(CMVector::from_function(d, n, T, [j, d, T](double t) {
            std::vector<double> e(d, 0.0);
            e[j] = t - T / 2;
            return e;
        }));
    }
    out.log_det2_AI = det2_nonsym(out.A_I).log_abs;
    out.split_defect = max_abs_entry(out.A_I + out.A_F - to_operator(eta).m);
    return out;
}

// -------------------------------------------------------------- trivial split

namespace {

RealMatrix pin_matrix(const std::vector<CMVector>& pins) {
    int N = static_cast<int>(pins.size());
    int dim = pins[0].n * pins[0].d;
    RealMatrix K(dim, N);
    for (int j = 0; j < N; ++j) {
        if (pins[j].n != pins[0].n || pins[j].d != pins[0].d) throw ShapeMismatch();
        for (int i = 0; i < dim; ++i) K(i, j) = pins[j].hp[i];
    }
    return K;
}

} // namespace

PluckerFrame plucker_frame_trivial(const GridKernel& eta, const std::vector<CMVector>& pins) {
    int M = static_cast<int>(pins.size());
    if (M == 0) throw BadParams("need at least one pin");
    double dt = pins[0].dt();
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j)
            if (std::abs(inner(pins[i], pins[j])) >
                1e-10 * std::max(1.0, norm(pins[i]) * norm(pins[j])))
                throw BadParams("trivial split needs orthogonal pins");

    DiscreteOperator op = to_operator(eta);
    int dim = op.dim();
    RealMatrix K = pin_matrix(pins);
    RealMatrix Ct = dt * (K.transposed() * K); // C(k), diagonal by orthogonality
    RealMatrix proj = K * solve(Ct, (dt * K.transposed())); // pi in the grid metric

    RealMatrix AI = op.m - proj;
    RealMatrix ImAI = RealMatrix::identity(dim) - AI;
    std::vector<double> ai_eigs = sym_eigenvalues(AI);
    double log_det2 = 0;
    for (double l : ai_eigs) log_det2 += std::log1p(-l) + l;

    // J_{e_c} = (I - A_I)^{-1} k_c and the two row families
    LU f(ImAI);
    PluckerFrame frame;
    frame.M = M;
    frame.JM = RealMatrix(M, M);
    frame.J0 = RealMatrix(M, M);
    for (int c = 0; c < M; ++c) {
        std::vector<double> rhs(dim);
        for (int i = 0; i < dim; ++i) rhs[i] = K(i, c);
        std::vector<double> J = f.solve(rhs);
        std::vector<double> BJ = op.m * J;
        for (int j = 0; j < M; ++j) {
            double a = 0, b = 0;
            for (int i = 0; i < dim; ++i) {
                a += J[i] * K(i, j);
                b += (J[i] - BJ[i]) * K(i, j);
            }
            frame.JM(j, c) = dt * a;
            frame.J0(j, c) = dt * b;
        }
    }
    frame.log_detC.resize(M + 1);
    frame.log_detC[0] = 0;
    for (int N = 1; N <= M; ++N)
        frame.log_detC[N] = frame.log_detC[N - 1] + std::log(Ct(N - 1, N - 1));
    frame.log_det2_AI = log_det2;
    frame.trace_AF = static_cast<double>(M);
    return frame;
}

ConditionADecomposition decompose_condition_A_trivial(const GridKernel& eta,
                                                      const std::vector<CMVector>& pins) {
    if (pins.empty()) throw BadParams("need at least one pin");
    DiscreteOperator op = to_operator(eta);
    double dt = pins[0].dt();
    RealMatrix K = pin_matrix(pins);
    RealMatrix Ct = dt * (K.transposed() * K);
    RealMatrix proj = K * solve(Ct, (dt * K.transposed()));
    ConditionADecomposition out;
    out.A_F = proj;
    out.A_I = op.m - proj;
    out.factors = pins;
    out.rank_bound = static_cast<int>(pins.size());
    std::vector<double> ev = sym_eigenvalues(sym_part(out.A_I));
    double l2 = 0;
    for (double l : ev) l2 += std::log1p(-l) + l;
    out.log_det2_AI = l2;
    out.split_defect = max_abs_entry(out.A_I + out.A_F - op.m);
    return out;
}

RealMatrix plucker_JN_direct(const GridKernel& eta, const std::vector<CMVector>& pins, int N) {
    int M = static_cast<int>(pins.size());
    if (N < 0 || N > M) throw BadParams();
    double dt = pins[0].dt();
    DiscreteOperator op = to_operator(eta);
    int dim = op.dim();
    RealMatrix K = pin_matrix(pins);

    // projections onto the first N and all M pins (orthogonal pins assumed)
    auto projector = [&](int count) {
        RealMatrix P(dim, dim);
        for (int j = 0; j < count; ++j) {
            double n2 = 0;
            for (int i = 0; i < dim; ++i) n2 += K(i, j) * K(i, j);
            for (int i = 0; i < dim; ++i)
                for (int l = 0; l < dim; ++l) P(i, l) += K(i, j) * K(l, j) / n2;
        }
        return P;
    };
    RealMatrix piN = projector(N), piM = projector(M);
    RealMatrix I = RealMatrix::identity(dim);
    RealMatrix BN = (I - piN) * op.m, BM = (I - piM) * op.m;
    RealMatrix AI = op.m - piM;
    LU f(I - AI);

    RealMatrix JN(M, M);
    for (int c = 0; c < M; ++c) {
        std::vector<double> rhs(dim);
        for (int i = 0; i < dim; ++i) rhs[i] = K(i, c);
        std::vector<double> J = f.solve(rhs);
        std::vector<double> w = J;
        std::vector<double> corr = (BN - BM) * J;
        for (int i = 0; i < dim; ++i) w[i] -= corr[i];
        for (int j = 0; j < M; ++j) {
            double a = 0;
            for (int i = 0; i < dim; ++i) a += w[i] * K(i, j);
            JN(j, c) = dt * a;
        }
    }
    return JN;
}

// ------------------------------------------------------------- pinned_general

PinnedValue pinned_general(const GridKernel& eta, const std::vector<CMVector>& pins,
                           const CMVector* h) {
    int N = static_cast<int>(pins.size());
    if (N == 0) throw BadParams("need at least one pin");
    DiscreteOperator op = to_operator(eta);
    int dim = op.dim();
    double dt = pins[0].dt();
    RealMatrix K = pin_matrix(pins);
    RealMatrix Ct = dt * (K.transposed() * K);
    double detC = det(Ct);
    double scale = 1.0;
    for (const CMVector& k : pins) scale *= std::max(inner(k, k), 1e-300);
    if (detC < 1e-10 * scale) throw DependentPins();

    std::vector<double> ev_eta = sym_eigenvalues(op.m);
    if (ev_eta.front() >= 1.0) throw NotIntegrable();

    RealMatrix proj = K * solve(Ct, (dt * K.transposed()));
    RealMatrix pperp = RealMatrix::identity(dim) - proj;
    RealMatrix Bk = pperp * op.m * pperp;
    Bk = sym_part(Bk);
    std::vector<double> ev = sym_eigenvalues(Bk);
    double log_det2 = 0;
    for (double l : ev) log_det2 += std::log1p(-l) + l;
    double trace_proj = (op.m * proj).trace();

    double shift = 0;
    if (h) {
        std::vector<double> hp = pperp * h->hp;
        RealMatrix ImBk = RealMatrix::identity(dim) - Bk;
        std::vector<double> u = LU(ImBk).solve(hp);
        double dot = 0;
        for (int i = 0; i < dim; ++i) dot += u[i] * hp[i];
        shift = 0.5 * dot * dt;
    }

    PinnedValue out;
    out.N = N;
    out.log_det2_AI = log_det2;
    out.trace_AF = trace_proj;
    out.log_detC_N = std::log(detC);
    out.value = std::exp(-0.5 * (N * std::log(2.0 * M_PI) + log_det2 + std::log(detC)) -
                         0.5 * trace_proj + shift);
    return out;
}

} // namespace qwf
