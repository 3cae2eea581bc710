#include "qwf/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace qwf {

// ------------------------------------------------------------------ SigmaPath

RealMatrix sym_part(const RealMatrix& M) {
    RealMatrix S(M.rows, M.cols);
    for (int i = 0; i < M.rows; ++i)
        for (int j = 0; j < M.cols; ++j) S(i, j) = 0.5 * (M(i, j) + M(j, i));
    return S;
}

RealMatrix skew_part(const RealMatrix& M) {
    RealMatrix A(M.rows, M.cols);
    for (int i = 0; i < M.rows; ++i)
        for (int j = 0; j < M.cols; ++j) A(i, j) = 0.5 * (M(i, j) - M(j, i));
    return A;
}

RealMatrix SigmaPath::deriv(double t) const {
    if (derivative) return derivative(t);
    double h = std::max(1e-6 * T, 1e-12);
    double lo = std::max(0.0, t - h), hi = std::min(T, t + h);
    return (1.0 / (hi - lo)) * (value(hi) - value(lo));
}

double SigmaPath::sup_norm(int probes) const {
    double m = 0;
    for (int i = 0; i < probes; ++i) m = std::max(m, value(T * i / (probes - 1)).frobenius());
    return m;
}

SigmaPath SigmaPath::constant(const RealMatrix& A, double T) {
    SigmaPath s;
    s.d = A.rows;
    s.T = T;
    s.value = [A](double) { return A; };
    s.derivative = [d = A.rows](double) { return RealMatrix(d, d); };
    s.c1 = true;
    return s;
}

SigmaPath SigmaPath::linear(const RealMatrix& A, const RealMatrix& B, double T) {
    SigmaPath s;
    s.d = A.rows;
    s.T = T;
    s.value = [A, B, T](double t) { return A + (T - t) * B; };
    s.derivative = [B](double) { return -1.0 * B; };
    s.c1 = true;
    return s;
}

SigmaPath SigmaPath::from_function(int d, double T, std::function<RealMatrix(double)> f,
                                   std::function<RealMatrix(double)> df) {
    SigmaPath s;
    s.d = d;
    s.T = T;
    s.value = std::move(f);
    s.derivative = std::move(df);
    s.c1 = static_cast<bool>(s.derivative);
    return s;
}

SigmaPath SigmaPath::from_grid(std::vector<RealMatrix> nodes, double T) {
    if (nodes.size() < 2) throw BadParams("need at least two nodes");
    SigmaPath s;
    s.d = nodes[0].rows;
    s.T = T;
    int m = static_cast<int>(nodes.size()) - 1;
    s.value = [nodes, T, m](double t) {
        double x = std::clamp(t / T, 0.0, 1.0) * m;
        int i = std::min(static_cast<int>(x), m - 1);
        double w = x - i;
        return (1.0 - w) * nodes[i] + w * nodes[i + 1];
    };
    s.c1 = false;
    return s;
}

// ------------------------------------------------------------------ GridKernel

RealMatrix GridKernel::block(int i, int j) const {
    RealMatrix M(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) M(a, b) = at(i, j, a, b);
    return M;
}

void GridKernel::set_block(int i, int j, const RealMatrix& M) {
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) at(i, j, a, b) = M(a, b);
}

double GridKernel::symmetry_defect() const {
    double m = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    m = std::max(m, std::abs(at(i, j, a, b) - at(j, i, b, a)));
    return m;
}

bool GridKernel::finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

GridKernel operator*(double c, const GridKernel& k) {
    GridKernel out = k;
    for (double& x : out.v) x *= c;
    return out;
}

GridKernel operator+(const GridKernel& a, const GridKernel& b) {
    if (a.d != b.d || a.n != b.n || a.T != b.T) throw ShapeMismatch();
    GridKernel out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
    out.symmetric = a.symmetric && b.symmetric;
    return out;
}

DiscreteOperator to_operator(const GridKernel& k) {
    DiscreteOperator op;
    op.d = k.d;
    op.n = k.n;
    op.T = k.T;
    op.symmetric = k.symmetric;
    int N = k.n * k.d;
    op.m = RealMatrix(N, N);
    double w = k.dt();
    for (int i = 0; i < k.n; ++i)
        for (int j = 0; j < k.n; ++j)
            for (int a = 0; a < k.d; ++a)
                for (int b = 0; b < k.d; ++b) op.m(i * k.d + a, j * k.d + b) = w * k.at(i, j, a, b);
    return op;
}

// -------------------------------------------------------------------- CMVector

CMVector CMVector::from_function(int d, int n, double T,
                                 const std::function<std::vector<double>(double)>& f) {
    CMVector h;
    h.d = d;
    h.n = n;
    h.T = T;
    h.hp.resize(static_cast<size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
        std::vector<double> val = f((i + 0.5) * T / n);
        if (static_cast<int>(val.size()) != d) throw ShapeMismatch();
        for (int a = 0; a < d; ++a) h.hp[static_cast<size_t>(i) * d + a] = val[a];
    }
    return h;
}

CMVector CMVector::zero(int d, int n, double T) {
    CMVector h;
    h.d = d;
    h.n = n;
    h.T = T;
    h.hp.assign(static_cast<size_t>(n) * d, 0.0);
    return h;
}

double inner(const CMVector& h, const CMVector& g) {
    if (h.d != g.d || h.n != g.n) throw ShapeMismatch();
    double s = 0;
    for (size_t i = 0; i < h.hp.size(); ++i) s += h.hp[i] * g.hp[i];
    return s * h.dt();
}

double norm(const CMVector& h) { return std::sqrt(inner(h, h)); }

// ------------------------------------------------------------ builtin families

GridKernel zero_kernel(int d, int n, double T) { return GridKernel(d, n, T, true); }

GridKernel indicator_base_kernel(int n, double T) {
    GridKernel k(1, n, T, false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) k.at(i, j, 0, 0) = 1.0;
    return k;
}

GridKernel kac_kernel(int n, double T) {
    GridKernel k(1, n, T, true);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) k.at(i, j, 0, 0) = T - std::max(k.t(i), k.t(j));
    return k;
}

GridKernel levy_area_kernel(int n, double T) {
    GridKernel k(2, n, T, true);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue; // averaged one-sided limits cancel
            double c = (j < i) ? 0.5 : -0.5;
            k.at(i, j, 0, 1) = -c;
            k.at(i, j, 1, 0) = c;
        }
    return k;
}

GridKernel rho_sigma_kernel(const SigmaPath& sigma, int n) {
    GridKernel k(sigma.d, n, sigma.T, true);
    std::vector<RealMatrix> sv(n);
    for (int i = 0; i < n; ++i) sv[i] = sigma(k.t(i));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j < i) k.set_block(i, j, sv[i]);
            else if (j > i) k.set_block(i, j, sv[j].transposed());
            else k.set_block(i, i, sym_part(sv[i]));
        }
    return k;
}

GridKernel sample_variance_kernel(const RealMatrix& D, int n, double T) {
    if ((D - D.transposed()).frobenius() > 1e-12 * std::max(1.0, D.frobenius()))
        throw BadParams("sample_variance needs a symmetric D");
    GridKernel k(D.rows, n, T, true);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double w = std::min(k.t(i), k.t(j)) - k.t(i) * k.t(j) / T;
            k.set_block(i, j, w * D);
        }
    return k;
}

GridKernel volterra_of(const GridKernel& rho) {
    GridKernel k(rho.d, rho.n, rho.T, false);
    for (int i = 0; i < rho.n; ++i)
        for (int j = 0; j < i; ++j) k.set_block(i, j, -1.0 * rho.block(i, j));
    return k;
}

GridKernel rank_one_kernel(const CMVector& h, double a) {
    GridKernel k(h.d, h.n, h.T, true);
    for (int i = 0; i < h.n; ++i)
        for (int j = 0; j < h.n; ++j)
            for (int p = 0; p < h.d; ++p)
                for (int q = 0; q < h.d; ++q)
                    k.at(i, j, p, q) = a * h.hp[static_cast<size_t>(i) * h.d + p] *
                                       h.hp[static_cast<size_t>(j) * h.d + q];
    return k;
}

GridKernel custom_csv_kernel(const std::string& csv_path, const std::string& sidecar_path, int n) {
    double T = -1;
    int d = -1;
    {
        std::ifstream side(sidecar_path);
        if (!side) throw BadParams("cannot open sidecar " + sidecar_path);
        std::string line;
        while (std::getline(side, line)) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq), val = line.substr(eq + 1);
            if (key == "T") T = std::stod(val);
            else if (key == "d") d = std::stoi(val);
            else throw BadParams("unknown sidecar key: " + key);
        }
    }
    if (T <= 0 || d <= 0) throw BadParams("sidecar must declare T>0 and d>0");

    struct Sample {
        double t, s, value;
        int a, b;
    };
    std::vector<Sample> samples;
    {
        std::ifstream csv(csv_path);
        if (!csv) throw BadParams("cannot open csv " + csv_path);
        std::string line;
        bool header = true;
        while (std::getline(csv, line)) {
            if (line.empty()) continue;
            if (header) { header = false; continue; }
            std::istringstream ss(line);
            Sample smp{};
            char c1, c2, c3, c4;
            if (!(ss >> smp.t >> c1 >> smp.s >> c2 >> smp.a >> c3 >> smp.b >> c4 >> smp.value))
                throw BadParams("malformed csv row: " + line);
            if (smp.a < 1 || smp.a > d || smp.b < 1 || smp.b > d)
                throw BadParams("component index out of range");
            samples.push_back(smp);
        }
    }
    if (samples.empty()) throw BadParams("csv holds no samples");

    GridKernel k(d, n, T, false);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    double best = std::numeric_limits<double>::infinity();
                    double val = 0;
                    for (const Sample& smp : samples) {
                        if (smp.a - 1 != a || smp.b - 1 != b) continue;
                        double dist = (smp.t - k.t(i)) * (smp.t - k.t(i)) +
                                      (smp.s - k.t(j)) * (smp.s - k.t(j));
                        if (dist < best) {
                            best = dist;
                            val = smp.value;
                        }
                    }
                    k.at(i, j, a, b) = val;
                }
    k.symmetric = k.symmetry_defect() < 1e-12;
    return k;
}

GridKernel builtin_kernel(const std::string& name, const KernelParams& p) {
    if (p.n <= 0 || p.T <= 0) throw BadParams("need n>0 and T>0");
    if (name == "zero") return zero_kernel(p.d, p.n, p.T);
    if (name == "kac") return kac_kernel(p.n, p.T);
    if (name == "indicator") return indicator_base_kernel(p.n, p.T);
    if (name == "levy_area" || name == "levy-area") return levy_area_kernel(p.n, p.T);
    if (name == "rho_sigma" || name == "const-sigma") {
        if (p.mat.rows == 0) throw BadParams("rho_sigma needs a matrix parameter");
        return rho_sigma_kernel(SigmaPath::constant(p.mat, p.T), p.n);
    }
    if (name == "sample_variance" || name == "sample-variance") {
        if (p.mat.rows == 0) throw BadParams("sample_variance needs a matrix parameter");
        return sample_variance_kernel(p.mat, p.n, p.T);
    }
    if (name == "harmonic") {
        if (p.base.empty()) throw BadParams("harmonic needs a base kernel name");
        return harmonic_kernel(builtin_kernel(p.base, p));
    }
    if (name == "custom_csv" || name == "custom-csv")
        return custom_csv_kernel(p.csv, p.sidecar, p.n);
    throw UnknownFamily("unknown kernel family: " + name);
}

// -------------------------------------------------------------- kernel algebra

namespace {

// sample matrix K with block (i,j) = kappa(t_i,t_j), no quadrature weight
RealMatrix sample_matrix(const GridKernel& k) {
    int N = k.n * k.d;
    RealMatrix K(N, N);
    for (int i = 0; i < k.n; ++i)
        for (int j = 0; j < k.n; ++j)
            for (int a = 0; a < k.d; ++a)
                for (int b = 0; b < k.d; ++b) K(i * k.d + a, j * k.d + b) = k.at(i, j, a, b);
    return K;
}

GridKernel from_sample_matrix(const RealMatrix& K, int d, int n, double T, bool symmetric) {
    GridKernel k(d, n, T, symmetric);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) k.at(i, j, a, b) = K(i * d + a, j * d + b);
    return k;
}

void require_symmetric(const DiscreteOperator& op) {
    double defect = (op.m - op.m.transposed()).frobenius();
    if (!op.symmetric || defect > 1e-10 * std::max(1.0, op.m.frobenius()))
        throw NonSymmetric("operator is not symmetric");
}

} // namespace

GridKernel eta_of_kappa(const GridKernel& kappa) {
    RealMatrix K = sample_matrix(kappa);
    RealMatrix G = kappa.dt() * (K.transposed() * K); // midpoint quadrature of the product term
    RealMatrix Kt = K.transposed();
    RealMatrix E(K.rows, K.cols);
    for (size_t i = 0; i < E.a.size(); ++i) E.a[i] = -(K.a[i] + Kt.a[i] + G.a[i]);
    return from_sample_matrix(E, kappa.d, kappa.n, kappa.T, true);
}

GridKernel harmonic_kernel(const GridKernel& kappa) {
    RealMatrix K = sample_matrix(kappa);
    RealMatrix G = kappa.dt() * (K.transposed() * K);
    return from_sample_matrix(G, kappa.d, kappa.n, kappa.T, true);
}

GridKernel harmonic_kernel_x(const GridKernel& kappa, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != kappa.d) throw ShapeMismatch();
    int n = kappa.n, d = kappa.d;
    // w[u][i*d+a] = (kappa(t_u, t_i)^T x)_a
    std::vector<std::vector<double>> w(n, std::vector<double>(static_cast<size_t>(n) * d, 0.0));
    for (int u = 0; u < n; ++u)
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < d; ++a) {
                double s = 0;
                for (int b = 0; b < d; ++b) s += kappa.at(u, i, b, a) * x[b];
                w[u][static_cast<size_t>(i) * d + a] = s;
            }
    GridKernel c(d, n, kappa.T, true);
    double dt = kappa.dt();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    double s = 0;
                    for (int u = 0; u < n; ++u)
                        s += w[u][static_cast<size_t>(i) * d + a] *
                             w[u][static_cast<size_t>(j) * d + b];
                    c.at(i, j, a, b) = s * dt;
                }
    return c;
}

// ---------------------------------------------------------- operator functionals

double lambda_max(const DiscreteOperator& op) {
    require_symmetric(op);
    return sym_eigenvalues(op.m).front();
}

double lambda_min(const DiscreteOperator& op) {
    require_symmetric(op);
    return sym_eigenvalues(op.m).back();
}

double operator_norm(const DiscreteOperator& op) {
    if (op.symmetric) {
        std::vector<double> ev = sym_eigenvalues(op.m);
        return std::max(std::abs(ev.front()), std::abs(ev.back()));
    }
    std::vector<double> ev = sym_eigenvalues(op.m.transposed() * op.m);
    return std::sqrt(std::max(ev.front(), 0.0));
}

double Det2::value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

Det2 det2_spectrum(const std::vector<double>& eigenvalues, double shift) {
    Det2 out;
    for (double l : eigenvalues) {
        double f = 1.0 + shift * l;
        if (std::abs(f) < 1e-300) {
            out.sign = 0;
            out.log_abs = -std::numeric_limits<double>::infinity();
            return out;
        }
        if (f < 0) out.sign = -out.sign;
        out.log_abs += std::log(std::abs(f)) - shift * l;
    }
    return out;
}

Det2 det2(const DiscreteOperator& op, double shift) {
    require_symmetric(op);
    return det2_spectrum(sym_eigenvalues(op.m), shift);
}

Det2 det2_nonsym(const RealMatrix& B) {
    if (!B.square()) throw DimensionMismatch();
    RealMatrix IB = B;
    for (int i = 0; i < B.rows; ++i) IB(i, i) += 1.0;
    // threshold pivoting leaves triangular inputs pivot-free, so the Volterra
    // determinant comes out exactly one
    LU f(IB, 1e-8);
    Det2 out;
    int sign = 1;
    out.log_abs = f.log_abs_det(&sign) - B.trace();
    out.sign = sign;
    return out;
}

DiscreteOperator sqrt_shift(const GridKernel& eta) {
    DiscreteOperator op = to_operator(eta);
    require_symmetric(op);
    EigenDecomposition ed = sym_eigen(op.m);
    if (ed.eigenvalues.front() >= 1.0)
        throw NotIntegrable("lambda_max = " + std::to_string(ed.eigenvalues.front()));
    int N = op.dim();
    std::vector<double> shifted(N);
    for (int i = 0; i < N; ++i) shifted[i] = std::sqrt(1.0 - ed.eigenvalues[i]) - 1.0;
    DiscreteOperator out = op;
    out.m = ed.eigenvectors * RealMatrix::diagonal(shifted) * ed.eigenvectors.transposed();
    out.symmetric = true;
    return out;
}

DiscreteOperator resolvent_shift(const GridKernel& kappa) {
    DiscreteOperator op = to_operator(kappa);
    int N = op.dim();
    RealMatrix IB = op.m;
    for (int i = 0; i < N; ++i) IB(i, i) += 1.0;
    // smallest singular value by inverse iteration on the LU factors; the
    // squared Gram route cannot resolve sigma below sqrt(eps)
    LU f(IB), ft(IB.transposed());
    std::vector<double> x(N);
    for (int i = 0; i < N; ++i) x[i] = 1.0 / std::sqrt(static_cast<double>(N));
    double growth = 1.0;
    for (int it = 0; it < 15; ++it) {
        std::vector<double> y = f.solve(ft.solve(x));
        double nrm = 0;
        for (double v : y) nrm += v * v;
        nrm = std::sqrt(nrm);
        if (!std::isfinite(nrm) || nrm > 1e60) { growth = 1e60; break; }
        growth = nrm;
        for (int i = 0; i < N; ++i) x[i] = y[i] / nrm;
    }
    double smin = 1.0 / std::sqrt(growth);
    if (smin < 1e-10 * (1.0 + op.m.frobenius()))
        throw SingularOperator("I + B has smallest singular value " + std::to_string(smin));
    DiscreteOperator out = op;
    out.m = inverse(IB) - RealMatrix::identity(N);
    out.symmetric = kappa.symmetric;
    return out;
}

double hs_norm(const DiscreteOperator& op) { return op.m.frobenius(); }

double trace(const DiscreteOperator& op) { return op.m.trace(); }

} // namespace qwf
