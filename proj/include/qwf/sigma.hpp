#ifndef QWF_SIGMA_HPP
#define QWF_SIGMA_HPP

#include <functional>
#include <vector>

#include "qwf/linalg.hpp"

namespace qwf {

RealMatrix sym_part(const RealMatrix& M);
RealMatrix skew_part(const RealMatrix& M);

/// Matrix-valued coefficient function of t on [0, T]. Builtin families carry
/// an analytic derivative; grid data falls back to centered differences with
/// one-sided ends.
struct SigmaPath {
    int d = 1;
    double T = 1.0;
    std::function<RealMatrix(double)> value;
    std::function<RealMatrix(double)> derivative; // may be empty
    bool c1 = false;                              // derivative is analytic

    RealMatrix operator()(double t) const { return value(t); }
    RealMatrix deriv(double t) const;
    double sup_norm(int probes = 257) const; // max Frobenius norm over [0,T]

    static SigmaPath constant(const RealMatrix& A, double T);
    /// t -> A + (T - t) B
    static SigmaPath linear(const RealMatrix& A, const RealMatrix& B, double T);
    static SigmaPath from_function(int d, double T, std::function<RealMatrix(double)> f,
                                   std::function<RealMatrix(double)> df = nullptr);
    /// piecewise-linear interpolation of uniformly spaced nodes (including both endpoints)
    static SigmaPath from_grid(std::vector<RealMatrix> nodes, double T);
};

} // namespace qwf

#endif
