#ifndef QWF_PINNED_HPP
#define QWF_PINNED_HPP

#include <optional>
#include <vector>

#include "qwf/kernel.hpp"
#include "qwf/ode.hpp"

namespace qwf {

/// Stacked frame [J_M; J_0] whose maximal minors carry the pinned transforms:
/// the N-pin minor selects rows 1..N and M+N+1..2M.
struct PluckerFrame {
    int M = 0;
    RealMatrix JM, J0;               // M x M blocks of the frame
    std::vector<double> log_detC;    // log det C(k^{(N)}), N = 0..M
    double log_det2_AI = 0.0;        // log det2(I - A_I)
    double trace_AF = 0.0;
    double constant_log = 0.0;       // family constant relating q_eta to its functional

    RealMatrix JN(int N) const;
};

struct PinnedValue {
    double value = 0.0; // int e^{q_eta} delta_0(...) d mu
    double det_JN = 0.0;
    double log_detC_N = 0.0, log_detC_M = 0.0;
    double log_det2_AI = 0.0;
    double trace_AF = 0.0;
    int N = 0;
};

/// Evaluates the projected-determinant formula on an assembled frame.
/// Throws DegenerateJN when det J_N degenerates or flips sign.
PinnedValue plucker_pinned(const PluckerFrame& frame, int N);

// ---- builtin families (Volterra + finite-rank splittings) ----

/// q_eta = p_sigma with endpoint pins k_j' = e_j; J_p from the second-order
/// initial-value problem J'' = 2 sigma_A J' + sigma' J, J(0)=0, J'(0)=p.
PluckerFrame plucker_frame_rho_sigma(const SigmaPath& sigma, int steps = 512);

/// q_{-eta} for the centered sample-variance form (1/2) int <D(theta - mean),
/// theta - mean>; pins e_j and (t - T/2) e_j; J_p from the third-order solver.
PluckerFrame plucker_frame_sample_variance(const RealMatrix& D, double T, int steps = 512);

/// Iterated-integral family: sigma(t) = C/2 + (T-t) D acting on the N-fold
/// time integral of the path; order 2N+2 solver, polynomial pins f_0..f_N.
/// Supported for n_iter in {1, 2}.
PluckerFrame plucker_frame_iterated(const RealMatrix& C, const RealMatrix& D, double T,
                                    int n_iter, int steps = 512);

/// Trivial splitting A_I = B_eta - pi, A_F = pi for pins spanning a subspace;
/// pins must be orthogonal for the row-selection rule.
PluckerFrame plucker_frame_trivial(const GridKernel& eta, const std::vector<CMVector>& pins);

/// Volterra + finite-rank splitting B_eta = A_I + A_F realized on the grid.
struct ConditionADecomposition {
    RealMatrix A_I, A_F;           // grid operator blocks
    std::vector<CMVector> factors; // k_1..k_M spanning the range of A_F
    int rank_bound = 0;
    double log_det2_AI = 0.0;
    double split_defect = 0.0; // max | (A_I + A_F) - op(eta) | entry
};

ConditionADecomposition decompose_condition_A_rho_sigma(const SigmaPath& sigma, int n);
ConditionADecomposition decompose_condition_A_sample_variance(const RealMatrix& D, double T,
                                                              int n);
/// generic fallback: A_F projects onto the pin span, A_I is the remainder
ConditionADecomposition decompose_condition_A_trivial(const GridKernel& eta,
                                                      const std::vector<CMVector>& pins);

/// J_N computed straight from its definition on the grid (the row-selection
/// identity oracle).
RealMatrix plucker_JN_direct(const GridKernel& eta, const std::vector<CMVector>& pins, int N);

// ---- projected-determinant route on a raw kernel ----

/// ((2 pi)^N det2(I - B_{eta;k}) det C(k))^{-1/2} e^{-tr(pi B pi)/2} times the
/// drift factor from the projected resolvent. Throws DependentPins /
/// NotIntegrable.
PinnedValue pinned_general(const GridKernel& eta, const std::vector<CMVector>& pins,
                           const CMVector* h = nullptr);

} // namespace qwf

#endif
