#ifndef QWF_MONTECARLO_HPP
#define QWF_MONTECARLO_HPP

#include <cstdint>
#include <vector>

#include "qwf/kernel.hpp"
#include "qwf/sigma.hpp"

namespace qwf {

/// xoshiro256++ seeded through SplitMix64; normals by the polar Box-Muller
/// rule. Both algorithms and all constants are documented in the README so
/// any implementation reproduces the streams bit for bit.
struct Rng {
    uint64_t s[4];

    explicit Rng(uint64_t seed);
    uint64_t next();
    double uniform(); // in (0,1)
    double normal();

private:
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Brownian increment batch: path p draws its own substream derived from
/// (seed, p), so estimates are reproducible from (seed, shape) alone.
struct PathBatch {
    int n_paths = 10000;
    int n_steps = 256;
    int d = 1;
    double T = 1.0;
    uint64_t seed = 1;

    double dt() const { return T / n_steps; }
    Rng stream(int path) const;
};

struct MCEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    int n_paths = 0;
    uint64_t seed = 0;
    bool variance_warning = false;
};

MCEstimate reduce(const std::vector<double>& values, uint64_t seed);

/// Discrete double Ito sum  q = sum_{i>j} <eta(t_i,t_j) dW_j, dW_i>
/// (strict left-point rule; the diagonal compensation lives on the
/// analytic side). Throws ShapeMismatch unless the grids agree.
std::vector<double> sample_q_eta(const GridKernel& eta, const PathBatch& batch);

/// p_sigma = sum_i <sigma(t_i) W(t_i), dW_i>, the fast path for adapted
/// kernels (stochastic area, constant sigma, ...).
std::vector<double> sample_p_sigma(const SigmaPath& sigma, const PathBatch& batch);

/// int_0^T |W(t)|^2 dt by the left-point rule, per path.
std::vector<double> sample_theta_l2(const PathBatch& batch);

/// E[e^{q_eta + D*h}]; flags the variance warning when lambda_max > 1/2.
MCEstimate estimate_exp(const GridKernel& eta, const CMVector* h, const PathBatch& batch);

/// E[e^{i beta s}] for the stochastic area s (d = 2); returns the real part
/// (the imaginary part vanishes by symmetry and is folded into the stderr).
MCEstimate estimate_area_fourier(double beta, const PathBatch& batch);

/// Euler-Maruyama trajectories of d xi = d theta + chi xi dt, xi(0) = 0.
/// Returns n_paths trajectories of (n_steps+1) stacked d-vectors.
std::vector<std::vector<double>> ou_paths(const SigmaPath& chi, const PathBatch& batch);

/// E[exp(-1/2 int_0^T <c, xi(t)>^2 dt)] along Euler-Maruyama OU paths.
MCEstimate estimate_ou_quadratic_exp(const SigmaPath& chi, const std::vector<double>& c,
                                     const PathBatch& batch);

// ---- pinned estimates ----

struct PinnedSpec {
    enum class Kind { eta_kernel, sigma_vol, area_fourier };
    Kind kind = Kind::sigma_vol;
    const GridKernel* eta = nullptr;  // eta_kernel
    const SigmaPath* sigma = nullptr; // sigma_vol
    double beta = 0.0;                // area_fourier exponent i beta s
};

struct PinnedEstimate {
    double value = 0.0;   // Richardson-extrapolated over (eps, eps/2)
    double stderr_ = 0.0; // of the extrapolated per-path weights
    double bias_band = 0.0;
    double ess = 0.0;
    double eps = 0.0;
    int n_paths = 0;
};

/// E[e^{q} K_eps(theta^{(N)}(T))] with a Gaussian kernel K_eps, evaluated at
/// eps and eps/2 and Richardson-extrapolated (bias O(eps^2)). Throws
/// BandwidthTooSmall when the effective sample size drops under 100.
PinnedEstimate pinned_estimate(const PinnedSpec& spec, int N, double eps, const PathBatch& batch);

} // namespace qwf

#endif
