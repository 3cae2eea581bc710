#ifndef QWF_QUADRATURE_HPP
#define QWF_QUADRATURE_HPP

#include <cmath>
#include <functional>
#include <vector>

namespace qwf {

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
struct GaussLegendre {
    std::vector<double> x, w;

    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (z * p0 - p1) / (z * z - 1.0);
                double dz = p0 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-15) break;
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
    }

    double integrate(double a, double b, const std::function<double(double)>& f) const {
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double s = 0;
        for (size_t i = 0; i < x.size(); ++i) s += w[i] * f(mid + half * x[i]);
        return s * half;
    }
};

/// Composite Gauss-Legendre over uniform panels.
inline double integrate_panels(double a, double b, int panels, const GaussLegendre& gl,
                               const std::function<double(double)>& f) {
    double s = 0, h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) s += gl.integrate(a + k * h, a + (k + 1) * h, f);
    return s;
}

} // namespace qwf

#endif
