#include "qwf/montecarlo.hpp"

#include <algorithm>
#include <cmath>

namespace qwf {

namespace {

// SplitMix64 (Steele-Lea-Flood constants)
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (int i = 0; i < 4; ++i) s[i] = splitmix64(sm);
}

uint64_t Rng::next() {
    // xoshiro256++ (Blackman-Vigna)
    uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double Rng::uniform() {
    // 53 significant bits mapped into (0,1)
    return ((next() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, q;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

Rng PathBatch::stream(int path) const {
    return Rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(path + 1)));
}

MCEstimate reduce(const std::vector<double>& values, uint64_t seed) {
    MCEstimate est;
    est.n_paths = static_cast<int>(values.size());
    est.seed = seed;
    if (values.empty()) return est;
    // pairwise summation keeps the reduction order-independent
    std::vector<double> acc = values;
    while (acc.size() > 1) {
        size_t half = (acc.size() + 1) / 2;
        for (size_t i = 0; i + half < acc.size(); ++i) acc[i] += acc[i + half];
        acc.resize(half);
    }
    est.mean = acc[0] / values.size();
    double var = 0;
    for (double v : values) var += (v - est.mean) * (v - est.mean);
    var /= std::max<size_t>(values.size() - 1, 1);
    est.stderr_ = std::sqrt(var / values.size());
    return est;
}

std::vector<double> sample_q_eta(const GridKernel& eta, const PathBatch& batch) {
    if (eta.n != batch.n_steps || eta.d != batch.d)
        throw ShapeMismatch("kernel grid must match the path grid");
    int n = batch.n_steps, d = batch.d;
    double sq = std::sqrt(batch.dt());
    std::vector<double> out(batch.n_paths);
    std::vector<double> dw(static_cast<size_t>(n) * d);
    std::vector<double> acc(d);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        for (double& x : dw) x = sq * rng.normal();
        double q = 0;
        for (int i = 1; i < n; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int j = 0; j < i; ++j) {
                const double* w = &dw[static_cast<size_t>(j) * d];
                for (int a = 0; a < d; ++a) {
                    double s = 0;
                    for (int b = 0; b < d; ++b) s += eta.at(i, j, a, b) * w[b];
                    acc[a] += s;
                }
            }
            const double* wi = &dw[static_cast<size_t>(i) * d];
            for (int a = 0; a < d; ++a) q += acc[a] * wi[a];
        }
        out[p] = q;
    }
    return out;
}

std::vector<double> sample_p_sigma(const SigmaPath& sigma, const PathBatch& batch) {
    if (sigma.d != batch.d) throw ShapeMismatch();
    int n = batch.n_steps, d = batch.d;
    double sq = std::sqrt(batch.dt());
    std::vector<RealMatrix> sv(n);
    for (int i = 0; i < n; ++i) sv[i] = sigma(batch.T * (i) / n); // left endpoint
    std::vector<double> out(batch.n_paths);
    std::vector<double> theta(d), dw(d);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        std::fill(theta.begin(), theta.end(), 0.0);
        double q = 0;
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < d; ++a) dw[a] = sq * rng.normal();
            for (int a = 0; a < d; ++a) {
                double s = 0;
                for (int b = 0; b < d; ++b) s += sv[i](a, b) * theta[b];
                q += s * dw[a];
            }
            for (int a = 0; a < d; ++a) theta[a] += dw[a];
        }
        out[p] = q;
    }
    return out;
}

std::vector<double> sample_theta_l2(const PathBatch& batch) {
    int n = batch.n_steps, d = batch.d;
    double sq = std::sqrt(batch.dt()), dt = batch.dt();
    std::vector<double> out(batch.n_paths);
    std::vector<double> theta(d);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        std::fill(theta.begin(), theta.end(), 0.0);
        double acc = 0;
        for (int i = 0; i < n; ++i) {
            double r2 = 0;
            for (int a = 0; a < d; ++a) r2 += theta[a] * theta[a];
            acc += r2 * dt;
            for (int a = 0; a < d; ++a) theta[a] += sq * rng.normal();
        }
        out[p] = acc;
    }
    return out;
}

MCEstimate estimate_exp(const GridKernel& eta, const CMVector* h, const PathBatch& batch) {
    std::vector<double> q = sample_q_eta(eta, batch);
    bool warn = false;
    {
        DiscreteOperator op = to_operator(eta);
        if (eta.symmetric && lambda_max(op) > 0.5) warn = true;
    }
    if (h) {
        if (h->n != batch.n_steps || h->d != batch.d) throw ShapeMismatch();
        int n = batch.n_steps, d = batch.d;
        double sq = std::sqrt(batch.dt());
        for (int p = 0; p < batch.n_paths; ++p) {
            Rng rng = batch.stream(p);
            double drift = 0;
            for (int i = 0; i < n; ++i)
                for (int a = 0; a < d; ++a)
                    drift += h->hp[static_cast<size_t>(i) * d + a] * (sq * rng.normal());
            q[p] += drift;
        }
    }
    for (double& v : q) v = std::exp(v);
    MCEstimate est = reduce(q, batch.seed);
    est.variance_warning = warn;
    return est;
}

MCEstimate estimate_area_fourier(double beta, const PathBatch& batch) {
    if (batch.d != 2) throw ShapeMismatch("stochastic area needs d = 2");
    int n = batch.n_steps;
    double sq = std::sqrt(batch.dt());
    std::vector<double> re(batch.n_paths), im(batch.n_paths);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        double t0 = 0, t1 = 0, s = 0;
        for (int i = 0; i < n; ++i) {
            double d0 = sq * rng.normal(), d1 = sq * rng.normal();
            s += 0.5 * (t0 * d1 - t1 * d0);
            t0 += d0;
            t1 += d1;
        }
        re[p] = std::cos(beta * s);
        im[p] = std::sin(beta * s);
    }
    MCEstimate est = reduce(re, batch.seed);
    MCEstimate imag = reduce(im, batch.seed);
    est.stderr_ = std::hypot(est.stderr_, std::abs(imag.mean));
    return est;
}

std::vector<std::vector<double>> ou_paths(const SigmaPath& chi, const PathBatch& batch) {
    if (chi.d != batch.d) throw ShapeMismatch();
    int n = batch.n_steps, d = batch.d;
    double dt = batch.dt(), sq = std::sqrt(dt);
    std::vector<RealMatrix> cv(n);
    for (int i = 0; i < n; ++i) cv[i] = chi(batch.T * i / n);
    std::vector<std::vector<double>> out(batch.n_paths);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        std::vector<double>& traj = out[p];
        traj.assign(static_cast<size_t>(n + 1) * d, 0.0);
        std::vector<double> xi(d, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < d; ++a) {
                double drift = 0;
                for (int b = 0; b < d; ++b) drift += cv[i](a, b) * xi[b];
                traj[static_cast<size_t>(i + 1) * d + a] =
                    xi[a] + sq * rng.normal() + drift * dt;
            }
            for (int a = 0; a < d; ++a) xi[a] = traj[static_cast<size_t>(i + 1) * d + a];
        }
    }
    return out;
}

MCEstimate estimate_ou_quadratic_exp(const SigmaPath& chi, const std::vector<double>& c,
                                     const PathBatch& batch) {
    if (chi.d != batch.d || static_cast<int>(c.size()) != batch.d) throw ShapeMismatch();
    int n = batch.n_steps, d = batch.d;
    double dt = batch.dt(), sq = std::sqrt(dt);
    std::vector<RealMatrix> cv(n);
    for (int i = 0; i < n; ++i) cv[i] = chi(batch.T * i / n);
    std::vector<double> vals(batch.n_paths);
    std::vector<double> xi(d), xi_next(d);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        std::fill(xi.begin(), xi.end(), 0.0);
        double acc = 0, prev = 0;
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < d; ++a) {
                double drift = 0;
                for (int b = 0; b < d; ++b) drift += cv[i](a, b) * xi[b];
                xi_next[a] = xi[a] + sq * rng.normal() + drift * dt;
            }
            double dotc = 0;
            for (int a = 0; a < d; ++a) dotc += c[a] * xi_next[a];
            // trapezoid in time on <c, xi>^2
            acc += 0.5 * dt * (prev + dotc * dotc);
            prev = dotc * dotc;
            xi.swap(xi_next);
        }
        vals[p] = std::exp(-0.5 * acc);
    }
    return reduce(vals, batch.seed);
}

PinnedEstimate pinned_estimate(const PinnedSpec& spec, int N, double eps, const PathBatch& batch) {
    if (N < 1 || N > batch.d) throw BadParams("need 1 <= N <= d");
    if (eps <= 0) throw BadParams("need eps > 0");
    int n = batch.n_steps, d = batch.d;
    double sq = std::sqrt(batch.dt());

    std::vector<RealMatrix> sv;
    if (spec.kind == PinnedSpec::Kind::sigma_vol) {
        if (!spec.sigma || spec.sigma->d != d) throw ShapeMismatch();
        sv.resize(n);
        for (int i = 0; i < n; ++i) sv[i] = (*spec.sigma)(batch.T * i / n);
    }
    if (spec.kind == PinnedSpec::Kind::eta_kernel &&
        (!spec.eta || spec.eta->n != n || spec.eta->d != d))
        throw ShapeMismatch();
    if (spec.kind == PinnedSpec::Kind::area_fourier && d != 2)
        throw ShapeMismatch("area pin needs d = 2");

    double e1 = eps, e2 = 0.5 * eps;
    auto kernel_weight = [N](const std::vector<double>& endpoint, double e) {
        double r2 = 0;
        for (int a = 0; a < N; ++a) r2 += endpoint[a] * endpoint[a];
        return std::exp(-0.5 * r2 / (e * e)) / std::pow(2.0 * M_PI * e * e, 0.5 * N);
    };

    std::vector<double> w1(batch.n_paths), w2(batch.n_paths), extrap(batch.n_paths);
    std::vector<double> qvals;
    if (spec.kind == PinnedSpec::Kind::eta_kernel) qvals = sample_q_eta(*spec.eta, batch);

    std::vector<double> theta(d), dw(d);
    for (int p = 0; p < batch.n_paths; ++p) {
        Rng rng = batch.stream(p);
        std::fill(theta.begin(), theta.end(), 0.0);
        double expo_re = 0, area = 0;
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < d; ++a) dw[a] = sq * rng.normal();
            if (spec.kind == PinnedSpec::Kind::sigma_vol) {
                for (int a = 0; a < d; ++a) {
                    double s = 0;
                    for (int b = 0; b < d; ++b) s += sv[i](a, b) * theta[b];
                    expo_re += s * dw[a];
                }
            } else if (spec.kind == PinnedSpec::Kind::area_fourier) {
                area += 0.5 * (theta[0] * dw[1] - theta[1] * dw[0]);
            }
            for (int a = 0; a < d; ++a) theta[a] += dw[a];
        }
        double payoff;
        if (spec.kind == PinnedSpec::Kind::eta_kernel) payoff = std::exp(qvals[p]);
        else if (spec.kind == PinnedSpec::Kind::sigma_vol) payoff = std::exp(expo_re);
        else payoff = std::cos(spec.beta * area);
        double k1 = kernel_weight(theta, e1), k2 = kernel_weight(theta, e2);
        w1[p] = payoff * k1;
        w2[p] = payoff * k2;
        extrap[p] = payoff * (4.0 * k2 - k1) / 3.0;
    }

    MCEstimate m1 = reduce(w1, batch.seed);
    MCEstimate m2 = reduce(w2, batch.seed);
    MCEstimate mx = reduce(extrap, batch.seed);

    double wsum = 0, wsq = 0;
    for (double v : w2) {
        wsum += std::abs(v);
        wsq += v * v;
    }
    double ess = wsq > 0 ? wsum * wsum / wsq : 0.0;
    if (ess < 100.0) throw BandwidthTooSmall("effective sample size " + std::to_string(ess));

    PinnedEstimate out;
    out.value = mx.mean;
    out.stderr_ = mx.stderr_;
    out.bias_band = std::abs(m2.mean - m1.mean) / 3.0;
    out.ess = ess;
    out.eps = eps;
    out.n_paths = batch.n_paths;
    return out;
}

} // namespace qwf
