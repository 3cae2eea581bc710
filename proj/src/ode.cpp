#include "qwf/ode.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "qwf/kernel.hpp" // sym_part / skew_part

namespace qwf {

RealMatrix MatrixPath::at(double time) const {
    if (t.empty()) throw ShapeMismatch("empty path");
    if (time <= t.front()) return v.front();
    if (time >= t.back()) return v.back();
    size_t hi = std::upper_bound(t.begin(), t.end(), time) - t.begin();
    size_t lo = hi - 1;
    double w = (time - t[lo]) / (t[hi] - t[lo]);
    return (1.0 - w) * v[lo] + w * v[hi];
}

namespace {

bool sane(const RealMatrix& Y, double cap = 1e150) {
    for (double x : Y.a)
        if (!std::isfinite(x) || std::abs(x) > cap) return false;
    return true;
}

RealMatrix rk4_step(const MatrixRhs& rhs, double t, const RealMatrix& Y, double h) {
    RealMatrix k1 = rhs(t, Y);
    RealMatrix k2 = rhs(t + 0.5 * h, Y + (0.5 * h) * k1);
    RealMatrix k3 = rhs(t + 0.5 * h, Y + (0.5 * h) * k2);
    RealMatrix k4 = rhs(t + h, Y + h * k3);
    return Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

MatrixPath rk4_matrix_ode(const MatrixRhs& rhs, const RealMatrix& boundary_value, double T,
                          bool backward, int steps) {
    if (steps < 16) throw BadParams("need at least 16 steps");
    MatrixRhs f = rhs;
    if (backward) f = [&rhs, T](double tau, const RealMatrix& Y) { return -1.0 * rhs(T - tau, Y); };

    double h = T / steps;
    MatrixPath path;
    path.t.resize(steps + 1);
    path.v.resize(steps + 1);
    RealMatrix Y = boundary_value;
    path.t[0] = 0.0;
    path.v[0] = Y;
    for (int k = 0; k < steps; ++k) {
        Y = rk4_step(f, k * h, Y, h);
        if (!sane(Y)) throw NonFinite("state overflow at step " + std::to_string(k + 1));
        path.t[k + 1] = (k + 1) * h;
        path.v[k + 1] = Y;
    }
    if (backward) { // reported in increasing physical time
        std::reverse(path.v.begin(), path.v.end());
        for (int k = 0; k <= steps; ++k) path.t[k] = k * h;
    }
    return path;
}

// ------------------------------------------------------------------- Riccati

namespace {

RealMatrix riccati_rhs(const SigmaPath& sigma, double t, const RealMatrix& R) {
    RealMatrix s = sigma(t);
    RealMatrix st = s.transposed();
    return -1.0 * (R * R) - st * R - R * s - st * s;
}

// one backward step with a step-doubling error probe; false marks blow-up
bool riccati_step(const SigmaPath& sigma, double t_hi, double h, const RealMatrix& R_hi,
                  RealMatrix& R_lo) {
    MatrixRhs f = [&sigma](double t, const RealMatrix& R) { return riccati_rhs(sigma, t, R); };
    RealMatrix full = rk4_step(f, t_hi, R_hi, -h);
    RealMatrix half = rk4_step(f, t_hi, R_hi, -0.5 * h);
    half = rk4_step(f, t_hi - 0.5 * h, half, -0.5 * h);
    if (!sane(full, 1e12) || !sane(half, 1e12)) return false;
    double disagree = (full - half).frobenius();
    if (disagree > 1e-2 * (1.0 + half.frobenius())) return false;
    R_lo = half;
    return true;
}

} // namespace

RiccatiOutcome riccati_solve(const SigmaPath& sigma, int steps) {
    if (steps < 16) throw BadParams("need at least 16 steps");
    int d = sigma.d;
    double T = sigma.T;
    double h = T / steps;

    RiccatiOutcome out;
    std::vector<RealMatrix> values(steps + 1);
    values[steps] = RealMatrix(d, d); // R(T) = 0
    for (int k = steps; k > 0; --k) {
        double t_hi = k * h;
        RealMatrix next;
        if (!riccati_step(sigma, t_hi, h, values[k], next)) {
            // bisect inside the failing step: integration succeeds down to tau
            // exactly when tau is above the blow-up time
            double lo = t_hi - h, hi = t_hi;
            for (int iter = 0; iter < 12; ++iter) {
                double mid = 0.5 * (lo + hi);
                RealMatrix probe = values[k];
                bool ok = true;
                int sub = 16;
                double hh = (t_hi - mid) / sub;
                for (int j = 0; j < sub && ok; ++j)
                    ok = riccati_step(sigma, t_hi - j * hh, hh, probe, probe);
                if (ok) hi = mid;
                else lo = mid;
            }
            out.solved = false;
            out.blowup_lo = lo;
            out.blowup_hi = hi;
            out.blowup_time = 0.5 * (lo + hi);
            return out;
        }
        values[k - 1] = next;
    }

    out.solved = true;
    out.path.t.resize(steps + 1);
    out.path.v = std::move(values);
    for (int k = 0; k <= steps; ++k) out.path.t[k] = k * h;
    double acc = 0;
    if (steps % 2 == 0) {
        for (int k = 0; k + 2 <= steps; k += 2)
            acc += (h / 3.0) * (out.path.v[k].trace() + 4.0 * out.path.v[k + 1].trace() +
                                out.path.v[k + 2].trace());
    } else {
        for (int k = 0; k < steps; ++k)
            acc += 0.5 * h * (out.path.v[k].trace() + out.path.v[k + 1].trace());
    }
    out.trace_integral = acc;
    return out;
}

// ------------------------------------------------------------- second order

namespace {

struct PhiState {
    RealMatrix phi, dphi;
};

// integrates Phi'' = 2 sigma_A Phi' + sigma' Phi backward from terminal data
void integrate_second_order(const SigmaPath& sigma, int steps, const RealMatrix& phiT,
                            const RealMatrix& dphiT, MatrixPath& phi, MatrixPath& dphi) {
    int d = sigma.d;
    double T = sigma.T;
    double h = T / steps;
    std::vector<RealMatrix> pv(steps + 1), dv(steps + 1);
    pv[steps] = phiT;
    dv[steps] = dphiT;

    auto rhs = [&sigma, d](double t, const PhiState& y) {
        RealMatrix s = sigma(t);
        RealMatrix sa = skew_part(s);
        return PhiState{y.dphi, 2.0 * (sa * y.dphi) + sigma.deriv(t) * y.phi};
    };
    auto add = [](const PhiState& a, double c, const PhiState& b) {
        return PhiState{a.phi + c * b.phi, a.dphi + c * b.dphi};
    };

    PhiState y{phiT, dphiT};
    for (int k = steps; k > 0; --k) {
        double t = k * h;
        PhiState k1 = rhs(t, y);
        PhiState k2 = rhs(t - 0.5 * h, add(y, -0.5 * h, k1));
        PhiState k3 = rhs(t - 0.5 * h, add(y, -0.5 * h, k2));
        PhiState k4 = rhs(t - h, add(y, -h, k3));
        y.phi = y.phi + (-h / 6.0) * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
        y.dphi = y.dphi + (-h / 6.0) * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi);
        if (!sane(y.phi) || !sane(y.dphi)) throw NonFinite("second-order state overflow");
        pv[k - 1] = y.phi;
        dv[k - 1] = y.dphi;
    }
    phi.t.resize(steps + 1);
    dphi.t.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) phi.t[k] = dphi.t[k] = k * h;
    phi.v = std::move(pv);
    dphi.v = std::move(dv);
}

double simpson_trace_sym(const SigmaPath& sigma, int panels = 1024) {
    double T = sigma.T, h = T / panels;
    double acc = 0;
    for (int k = 0; k < panels; ++k) {
        double a = k * h, m = a + 0.5 * h, b = a + h;
        acc += (h / 6.0) * (sym_part(sigma(a)).trace() + 4.0 * sym_part(sigma(m)).trace() +
                            sym_part(sigma(b)).trace());
    }
    return acc;
}

} // namespace

SecondOrderSuite second_order_suite(const SigmaPath& sigma, int steps) {
    if (steps < 16) throw BadParams("need at least 16 steps");
    int d = sigma.d;
    SecondOrderSuite out;
    RealMatrix I = RealMatrix::identity(d), Z(d, d);
    MatrixPath dU, dV;
    integrate_second_order(sigma, steps, I, sigma(sigma.T), out.S, out.Sprime);
    integrate_second_order(sigma, steps, I, Z, out.U, dU);
    integrate_second_order(sigma, steps, Z, I, out.V, dV);
    out.Uprime0 = dU.v.front();
    out.Vprime0 = dV.v.front();

    out.detS.resize(out.S.v.size());
    double dmax = 0, dmin = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < out.S.v.size(); ++k) {
        out.detS[k] = det(out.S.v[k]);
        dmax = std::max(dmax, std::abs(out.detS[k]));
        dmin = std::min(dmin, std::abs(out.detS[k]));
    }
    bool ok = dmin > 1e-8 * dmax;
    // zeros between nodes: sign changes, and even-order dips resolved by the
    // parabola through three neighboring samples
    for (size_t k = 0; ok && k + 1 < out.detS.size(); ++k)
        if (out.detS[k] * out.detS[k + 1] <= 0.0) ok = false;
    for (size_t k = 1; ok && k + 1 < out.detS.size(); ++k) {
        double dl = out.detS[k - 1], dm = out.detS[k], dr = out.detS[k + 1];
        if (std::abs(dm) < std::abs(dl) && std::abs(dm) < std::abs(dr)) {
            double a = 0.5 * (dr + dl) - dm, b = 0.5 * (dr - dl);
            double vertex = (a > 0 || a < 0) ? dm - b * b / (4.0 * a) : dm;
            if (std::abs(vertex) <= 1e-8 * dmax) ok = false;
        }
    }
    out.nonsingular = ok;
    out.trace_sigma_S = simpson_trace_sym(sigma);
    return out;
}

SigmaPath sigma_from_phi_psi(const SigmaPath& phi, const SigmaPath& psi) {
    if (phi.d != psi.d || phi.T != psi.T) throw ShapeMismatch();
    int d = phi.d;
    double T = phi.T;
    // cumulative integral of psi_S on a fine grid, Simpson per cell
    const int m = 2048;
    auto table = std::make_shared<std::vector<RealMatrix>>(m + 1, RealMatrix(d, d));
    double h = T / m;
    for (int k = m - 1; k >= 0; --k) {
        double a = k * h, mid = a + 0.5 * h, b = a + h;
        (*table)[k] = (*table)[k + 1] + (h / 6.0) * (sym_part(psi(a)) + 4.0 * sym_part(psi(mid)) +
                                                     sym_part(psi(b)));
    }
    auto tail = [table, T, m, h](double t) {
        double x = std::clamp(t / T, 0.0, 1.0) * m;
        int i = std::min(static_cast<int>(x), m - 1);
        double w = x - i;
        return (1.0 - w) * (*table)[i] + w * (*table)[i + 1];
    };
    SigmaPath s;
    s.d = d;
    s.T = T;
    s.value = [phi, tail](double t) { return phi(t) + tail(t); };
    s.derivative = [phi, psi](double t) { return phi.deriv(t) - sym_part(psi(t)); };
    s.c1 = phi.c1;
    return s;
}

SecondOrderSuite second_order_suite(const SigmaPath& phi, const SigmaPath& psi, int steps) {
    return second_order_suite(sigma_from_phi_psi(phi, psi), steps);
}

void write_matrix_path_csv(const MatrixPath& path, std::ostream& out) {
    out << "t,i,j,value\n";
    for (size_t k = 0; k < path.t.size(); ++k) {
        const RealMatrix& M = path.v[k];
        for (int i = 0; i < M.rows; ++i)
            for (int j = 0; j < M.cols; ++j)
                out << path.t[k] << "," << i + 1 << "," << j + 1 << "," << M(i, j) << "\n";
    }
}

RealMatrix v_t_of_S(const MatrixPath& S, double t) {
    if (S.t.empty()) throw ShapeMismatch("empty path");
    int d = S.v.front().rows;
    size_t m = 0;
    while (m + 1 < S.t.size() && S.t[m + 1] <= t + 1e-12) ++m;
    if (m == 0) throw BadParams("t below the first path node");

    double dmax = 0;
    for (size_t k = 0; k <= m; ++k) dmax = std::max(dmax, std::abs(det(S.v[k])));
    std::vector<RealMatrix> integrand(m + 1);
    RealMatrix St = S.v[m];
    for (size_t k = 0; k <= m; ++k) {
        if (std::abs(det(S.v[k])) < 1e-12 * dmax) throw SingularS();
        RealMatrix G = St * inverse(S.v[k]);
        integrand[k] = G * G.transposed();
    }
    RealMatrix acc(d, d);
    for (size_t k = 0; k < m; ++k)
        acc = acc + (0.5 * (S.t[k + 1] - S.t[k])) * (integrand[k] + integrand[k + 1]);
    return acc;
}

} // namespace qwf
