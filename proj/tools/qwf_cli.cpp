// Command-line front end: transform evaluation with route cross-validation,
// density/surface exports, and Monte Carlo checks. Emits a JSON envelope
// {schema, command, inputs, results, diagnostics, pass}; exit codes are
// 0 success, 2 spec error, 3 route disagreement, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "qwf/feynmankac.hpp"
#include "qwf/laplace.hpp"
#include "qwf/montecarlo.hpp"
#include "qwf/pinned.hpp"
#include "qwf/quadrature.hpp"
#include "qwf/special.hpp"

using json = nlohmann::ordered_json;
using namespace qwf;

namespace {

struct Tolerances {
    double route = 5e-3;        // pairwise route agreement, relative
    double poly = 1e-8;         // polynomial route delta
    double kdv_residual = 1e-3; // interior-stencil PDE residual, max norm
    double pinned_agree = 1e-4; // plucker vs projected-determinant routes
    double fk_normalization = 1e-4;
    double mc_sigmas = 3.0;     // Monte Carlo belt width
};

json tolerance_table(const Tolerances& t) {
    return json{{"route", t.route},
                {"poly", t.poly},
                {"kdv_residual", t.kdv_residual},
                {"pinned_agree", t.pinned_agree},
                {"fk_normalization", t.fk_normalization},
                {"mc_sigmas", t.mc_sigmas}};
}

struct Options {
    std::string family = "zero";
    double T = 1.0;
    int d = 1;
    int grid_n = 256;
    int ode_steps = 512;
    uint64_t seed = 1;
    long paths = 0; // 0: skip Monte Carlo
    int steps = 512;
    std::string out;
    double tol_route = 5e-3;
    bool want_json = true;

    double lambda = 0.5, beta = 1.0, gamma = 0.0, c = 0.5, Dval = 1.0;
    bool fourier = false;
    std::string csv, sidecar;
};

RealMatrix scalar(double x) {
    RealMatrix M(1, 1);
    M(0, 0) = x;
    return M;
}

void emit(const json& report, const std::string& out) {
    std::string text = report.dump(2);
    if (!out.empty()) {
        std::ofstream f(out);
        f << text << "\n";
    }
    std::cout << text << "\n";
}

json diag_of(const LaplaceResult& r) {
    json d = {{"lambda_max", r.diag.lambda_max}, {"det2_log", r.diag.det2_log}};
    if (r.diag.n_grid > 0) d["n_grid"] = r.diag.n_grid;
    if (r.diag.ode_steps > 0) d["ode_steps"] = r.diag.ode_steps;
    if (r.diag.blowup) d["blowup_time"] = r.diag.blowup_time;
    if (r.diag.shift_term != 0.0) d["shift_term"] = r.diag.shift_term;
    return d;
}

json envelope(const std::string& command, const Options& o) {
    json j;
    j["schema"] = 1;
    j["command"] = command;
    j["timestamp"] = std::time(nullptr);
    j["inputs"] = {{"family", o.family}, {"T", o.T},        {"d", o.d},
                   {"grid_n", o.grid_n}, {"ode_steps", o.ode_steps}, {"seed", o.seed},
                   {"paths", o.paths},   {"tol_route", o.tol_route}};
    return j;
}

// ------------------------------------------------------------------- laplace

int cmd_laplace(const Options& o) {
    json rep = envelope("laplace", o);
    json results = json::array();
    bool pass = true;
    double reference = 0;
    Tolerances tol;
    tol.route = o.tol_route;

    auto add_result = [&](const std::string& route, double value, json extra = json::object()) {
        json r = {{"route", route}, {"value", value}};
        for (auto& [k, v] : extra.items()) r[k] = v;
        results.push_back(r);
    };

    try {
        if (o.family == "zero") {
            GridKernel eta = zero_kernel(o.d, o.grid_n, o.T);
            add_result("spectral", laplace_spectral(eta).value);
            OdeLaplace ode = laplace_ode(SigmaPath::constant(RealMatrix(o.d, o.d), o.T), nullptr,
                                         o.ode_steps);
            add_result("riccati", ode.riccati.value);
            add_result("second_order", ode.second_order.value);
            reference = 1.0;
        } else if (o.family == "kac") {
            // E[exp(-lambda int_0^T theta^2 dt)]
            GridKernel c = kac_kernel(o.grid_n, o.T);
            double trace_term = trace(to_operator(c));
            LaplaceResult spec = laplace_spectral((-2.0 * o.lambda) * c);
            double v_spec = std::exp(-o.lambda * trace_term) * spec.value;
            add_result("spectral", v_spec, {{"diagnostics", diag_of(spec)}});
            LaplaceResult harm =
                harmonic_laplace(std::sqrt(2.0 * o.lambda) * indicator_base_kernel(o.grid_n, o.T));
            add_result("harmonic", harm.value);
            reference = v_spec;
            if (o.paths > 0) {
                PathBatch b;
                b.n_paths = static_cast<int>(o.paths);
                b.n_steps = o.steps;
                b.d = 1;
                b.T = o.T;
                b.seed = o.seed;
                std::vector<double> l2 = sample_theta_l2(b);
                for (double& v : l2) v = std::exp(-o.lambda * v);
                MCEstimate est = reduce(l2, b.seed);
                add_result("monte_carlo", est.mean, {{"stderr", est.stderr_}});
                if (std::abs(est.mean - v_spec) > tol.mc_sigmas * est.stderr_ + 2e-3) pass = false;
            }
        } else if (o.family == "levy-area" || o.family == "levy_area") {
            double closed = closed_form_levy_area(o.beta, o.gamma);
            add_result("closed_form", closed);
            reference = closed;
            if (o.fourier && o.gamma == 0.0) {
                RealMatrix J2(2, 2);
                J2(0, 1) = -0.5;
                J2(1, 0) = 0.5;
                cplx cf = charfn_ode(SigmaPath::constant(J2, o.T), o.beta, o.ode_steps);
                add_result("charfn_ode", std::abs(cf),
                           {{"real", cf.real()}, {"imag", cf.imag()}});
            }
            if (o.paths > 0) {
                PathBatch b;
                b.n_paths = static_cast<int>(o.paths);
                b.n_steps = o.steps;
                b.d = 2;
                b.T = o.T;
                b.seed = o.seed;
                MCEstimate est = estimate_area_fourier(o.beta, b);
                add_result("monte_carlo", est.mean, {{"stderr", est.stderr_}});
                if (std::abs(est.mean - closed) > tol.mc_sigmas * est.stderr_ + 2e-3) pass = false;
            }
        } else if (o.family == "const-sigma" || o.family == "rho_sigma") {
            SigmaPath s = SigmaPath::constant(scalar(o.c), o.T);
            GridKernel eta = rho_sigma_kernel(s, o.grid_n);
            LaplaceResult spec = laplace_spectral(eta);
            add_result("spectral", spec.value, {{"diagnostics", diag_of(spec)}});
            OdeLaplace ode = laplace_ode(s, nullptr, o.ode_steps);
            add_result("riccati", ode.riccati.value, {{"diagnostics", diag_of(ode.riccati)}});
            add_result("second_order", ode.second_order.value,
                       {{"diagnostics", diag_of(ode.second_order)}});
            reference = spec.value;
            if (o.paths > 0) {
                PathBatch b;
                b.n_paths = static_cast<int>(o.paths);
                b.n_steps = o.steps;
                b.d = 1;
                b.T = o.T;
                b.seed = o.seed;
                std::vector<double> p = sample_p_sigma(s, b);
                for (double& v : p) v = std::exp(v);
                MCEstimate est = reduce(p, b.seed);
                add_result("monte_carlo", est.mean, {{"stderr", est.stderr_}});
                if (std::abs(est.mean - reference) > tol.mc_sigmas * est.stderr_ + 2e-3)
                    pass = false;
            }
        } else if (o.family == "sample-variance" || o.family == "sample_variance") {
            GridKernel eta = (-1.0) * sample_variance_kernel(scalar(o.Dval), o.grid_n, o.T);
            LaplaceResult spec = laplace_spectral(eta);
            PluckerFrame frame = plucker_frame_sample_variance(scalar(o.Dval), o.T, o.ode_steps);
            double plucker0 = plucker_pinned(frame, 0).value;
            add_result("spectral", spec.value);
            add_result("plucker", plucker0);
            reference = spec.value;
        } else if (o.family == "custom-csv" || o.family == "custom_csv") {
            GridKernel kappa = custom_csv_kernel(o.csv, o.sidecar, o.grid_n);
            GridKernel eta = eta_of_kappa(kappa);
            LaplaceResult spec = laplace_spectral(eta);
            add_result("spectral", spec.value, {{"diagnostics", diag_of(spec)}});
            reference = spec.value;
        } else {
            throw BadParams("unknown laplace family: " + o.family);
        }
    } catch (const NotIntegrable& e) {
        rep["diagnostics"] = {{"error", "NotIntegrable"}, {"what", e.what()}};
        rep["pass"] = false;
        emit(rep, o.out);
        return 4;
    } catch (const Blowup& e) {
        rep["diagnostics"] = {{"error", "Blowup"}, {"what", e.what()}};
        rep["pass"] = false;
        emit(rep, o.out);
        return 4;
    }

    double worst = 0;
    for (const auto& r : results)
        if (r["route"] != "monte_carlo")
            worst = std::max(worst,
                             std::abs(r["value"].get<double>() - reference) /
                                 std::max(std::abs(reference), 1e-12));
    rep["results"] = results;
    rep["diagnostics"] = {{"worst_route_delta", worst}};
    bool route_ok = worst <= tol.route;
    rep["pass"] = pass && route_ok;
    emit(rep, o.out);
    if (!route_ok) return 3;
    return pass ? 0 : 3;
}

// ------------------------------------------------------------------------ fk

int cmd_fk(const Options& o, double phi_a, double psi_b, double x0) {
    json rep = envelope("fk", o);
    SigmaPath phi = SigmaPath::constant(scalar(phi_a), o.T);
    SigmaPath psi = SigmaPath::constant(scalar(psi_b), o.T);
    try {
        FKDensity fk = make_fk_density(phi, psi, o.ode_steps);
        if (!o.out.empty()) {
            std::ofstream f(o.out);
            f << "x,y,value\n";
            for (double x = -2.0; x <= 2.0 + 1e-9; x += 0.25)
                for (double y = -2.0; y <= 2.0 + 1e-9; y += 0.25)
                    f << x << "," << y << "," << fk.at({x}, {y}) << "\n";
        }
        NormalizationCheck nc = fk_normalization_check(phi, psi, {x0}, o.ode_steps);
        double delta = std::abs(nc.quadrature - nc.analytic) / std::max(1.0, nc.analytic);
        rep["results"] = {{{"route", "quadrature"}, {"value", nc.quadrature}},
                          {{"route", "laplace"}, {"value", nc.analytic}}};
        rep["diagnostics"] = {{"normalization_delta", delta}};
        bool ok = delta <= 1e-4;
        rep["pass"] = ok;
        emit(rep, o.out.empty() ? o.out : o.out + ".json");
        return ok ? 0 : 3;
    } catch (const Error& e) {
        rep["diagnostics"] = {{"error", e.what()}};
        rep["pass"] = false;
        emit(rep, "");
        return 4;
    }
}

// ------------------------------------------------------------------ heatkernel

int cmd_heatkernel(const Options& o, double xmax, double amax, int nx, int na) {
    json rep = envelope("heatkernel", o);
    try {
        if (!o.out.empty()) {
            std::ofstream f(o.out);
            f << "x1,x2,a,value\n";
            for (int i = 0; i <= nx; ++i) {
                double x = -xmax + 2.0 * xmax * i / nx;
                for (int j = 0; j <= na; ++j) {
                    double a = -amax + 2.0 * amax * j / na;
                    f << x << ",0," << a << "," << g2_heat_kernel({x, 0.0}, a, o.T) << "\n";
                }
            }
        }
        // marginal check at one abscissa
        GaussLegendre gl(16);
        std::array<double, 2> x{1.0, 0.0};
        double marginal = integrate_panels(-4.0 * o.T, 4.0 * o.T, 32, gl, [&](double a) {
            return g2_heat_kernel(x, a, o.T);
        });
        double expect = gaussian_density(RealMatrix::diagonal({o.T, o.T}), {x[0], x[1]});
        double delta = std::abs(marginal - expect);
        rep["results"] = {{{"route", "marginal_quadrature"}, {"value", marginal}},
                          {{"route", "plane_gaussian"}, {"value", expect}}};
        rep["diagnostics"] = {{"marginal_delta", delta}};
        rep["pass"] = delta <= 1e-4;
        emit(rep, o.out.empty() ? "" : o.out + ".json");
        return delta <= 1e-4 ? 0 : 3;
    } catch (const Error& e) {
        rep["diagnostics"] = {{"error", e.what()}};
        rep["pass"] = false;
        emit(rep, "");
        return 4;
    }
}

// ----------------------------------------------------------------------- kdv

int cmd_kdv(const Options& o, const std::vector<double>& eta, const std::vector<double>& m,
            double xmin, double xmax, int nx, double tmin, double tmax, int nt) {
    json rep = envelope("kdv", o);
    try {
        if (eta.size() != m.size() || eta.empty()) throw BadParams("need matching eta and m lists");
        ScatteringData s{eta, m};
        std::vector<double> xg(nx + 1), tg(nt + 1);
        for (int i = 0; i <= nx; ++i) xg[i] = xmin + (xmax - xmin) * i / nx;
        for (int j = 0; j <= nt; ++j) tg[j] = tmin + (tmax - tmin) * j / nt;
        SolitonSurface surf = soliton_surface(s, xg, tg);
        if (!o.out.empty()) {
            std::ofstream f(o.out);
            f << "x,t,value\n";
            for (int j = 0; j <= nt; ++j)
                for (int i = 0; i <= nx; ++i) f << xg[i] << "," << tg[j] << "," << surf.at(j, i) << "\n";
        }
        // interior-stencil residual
        double worst = 0;
        double hx = xg[1] - xg[0], ht = tg[1] - tg[0];
        for (int j = 1; j + 1 <= nt; ++j)
            for (int i = 2; i + 2 <= nx; ++i) {
                double vt = (surf.at(j + 1, i) - surf.at(j - 1, i)) / (2 * ht);
                double vx = (surf.at(j, i + 1) - surf.at(j, i - 1)) / (2 * hx);
                double vxxx = (-0.5 * surf.at(j, i - 2) + surf.at(j, i - 1) - surf.at(j, i + 1) +
                               0.5 * surf.at(j, i + 2)) /
                              (hx * hx * hx);
                worst = std::max(worst,
                                 std::abs(vt - 1.5 * surf.at(j, i) * vx - 0.25 * vxxx));
            }
        rep["results"] = {{{"route", "surface"}, {"value", surf.at(0, nx / 2)}}};
        rep["diagnostics"] = {{"kdv_residual", worst}};
        rep["pass"] = worst <= 1e-3;
        emit(rep, o.out.empty() ? "" : o.out + ".json");
        return worst <= 1e-3 ? 0 : 3;
    } catch (const Error& e) {
        rep["diagnostics"] = {{"error", e.what()}};
        rep["pass"] = false;
        emit(rep, "");
        return 4;
    }
}

// ---------------------------------------------------------------------- poly

int cmd_poly(const Options& o, const std::string& kind, int n, double xi) {
    json rep = envelope("poly", o);
    try {
        double stoch = 0, classical = 0;
        if (kind == "bernoulli") {
            stoch = bernoulli_poly(n, xi);
            classical = bernoulli_poly_classical(n, xi);
        } else if (kind == "euler") {
            stoch = euler_poly(n, xi);
            classical = euler_poly_classical(n, xi);
        } else if (kind == "eulerian-a") {
            stoch = eulerian_poly_A(n, xi);
            classical = eulerian_poly_A_series(n, xi);
        } else if (kind == "eulerian-b") {
            stoch = eulerian_poly_B(n, xi);
            classical = eulerian_poly_B_series(n, xi);
        } else {
            throw BadParams("unknown polynomial kind: " + kind);
        }
        double delta = std::abs(stoch - classical);
        rep["results"] = {{{"route", "stochastic"}, {"value", stoch}},
                          {{"route", "classical"}, {"value", classical}}};
        rep["diagnostics"] = {{"delta", delta}, {"kind", kind}, {"n", n}, {"xi", xi}};
        rep["pass"] = delta <= 1e-8;
        emit(rep, o.out);
        return delta <= 1e-8 ? 0 : 3;
    } catch (const Error& e) {
        rep["diagnostics"] = {{"error", e.what()}};
        rep["pass"] = false;
        emit(rep, "");
        return 4;
    }
}

// --------------------------------------------------------------------- pinned

int cmd_pinned(const Options& o, int N) {
    json rep = envelope("pinned", o);
    try {
        double analytic = 0, general = 0;
        if (o.family == "const-sigma" || o.family == "rho_sigma") {
            SigmaPath s = SigmaPath::constant(scalar(o.c), o.T);
            PluckerFrame frame = plucker_frame_rho_sigma(s, o.ode_steps);
            analytic = plucker_pinned(frame, N).value;
            GridKernel eta = rho_sigma_kernel(s, o.grid_n);
            if (N >= 1) {
                std::vector<CMVector> pins;
                for (int j = 0; j < N; ++j)
                    pins.push_back(CMVector::from_function(1, o.grid_n, o.T, [](double) {
                        return std::vector<double>{1.0};
                    }));
                general = pinned_general(eta, pins).value;
            } else {
                general = laplace_spectral(eta).value;
            }
        } else if (o.family == "sample-variance" || o.family == "sample_variance") {
            PluckerFrame frame = plucker_frame_sample_variance(scalar(o.Dval), o.T, o.ode_steps);
            analytic = plucker_pinned(frame, N).value;
            GridKernel eta = (-1.0) * sample_variance_kernel(scalar(o.Dval), o.grid_n, o.T);
            if (N >= 1) {
                std::vector<CMVector> pins;
                pins.push_back(CMVector::from_function(
                    1, o.grid_n, o.T, [](double) { return std::vector<double>{1.0}; }));
                if (N >= 2)
                    pins.push_back(CMVector::from_function(1, o.grid_n, o.T, [&](double t) {
                        return std::vector<double>{t - o.T / 2};
                    }));
                general = pinned_general(eta, pins).value;
            } else {
                general = laplace_spectral(eta).value;
            }
        } else {
            throw BadParams("unknown pinned family: " + o.family);
        }
        double delta = std::abs(analytic - general) / std::max(std::abs(general), 1e-12);
        json results = {{{"route", "plucker"}, {"value", analytic}},
                        {{"route", "projected_determinant"}, {"value", general}}};
        bool pass = delta <= 1e-4;
        if (o.paths > 0 && N >= 1 && (o.family == "const-sigma" || o.family == "rho_sigma")) {
            PathBatch b;
            b.n_paths = static_cast<int>(o.paths);
            b.n_steps = o.steps;
            b.d = 1;
            b.T = o.T;
            b.seed = o.seed;
            SigmaPath s = SigmaPath::constant(scalar(o.c), o.T);
            PinnedSpec spec;
            spec.kind = PinnedSpec::Kind::sigma_vol;
            spec.sigma = &s;
            PinnedEstimate mc = pinned_estimate(spec, 1, 0.25, b);
            results.push_back(
                {{"route", "monte_carlo"}, {"value", mc.value}, {"stderr", mc.stderr_},
                 {"bias_band", mc.bias_band}});
            if (std::abs(mc.value - analytic) > 3.0 * mc.stderr_ + mc.bias_band + 2e-3)
                pass = false;
        }
        rep["results"] = results;
        rep["diagnostics"] = {{"delta", delta}, {"N", N}};
        rep["pass"] = pass;
        emit(rep, o.out);
        return pass ? 0 : 3;
    } catch (const Error& e) {
        rep["diagnostics"] = {{"error", e.what()}};
        rep["pass"] = false;
        emit(rep, "");
        return 4;
    }
}

// ------------------------------------------------------------------------ mc

int cmd_mc(const Options& o) {
    json rep = envelope("mc", o);
    try {
        PathBatch b;
        b.n_paths = o.paths > 0 ? static_cast<int>(o.paths) : 100000;
        b.n_steps = o.steps;
        b.T = o.T;
        b.seed = o.seed;
        json results = json::array();
        bool pass = true;
        if (o.family == "levy-area" || o.family == "levy_area") {
            b.d = 2;
            MCEstimate est = estimate_area_fourier(o.beta, b);
            double expect = closed_form_levy_area(o.beta, 0.0);
            results.push_back({{"route", "monte_carlo"}, {"value", est.mean},
                               {"stderr", est.stderr_}});
            results.push_back({{"route", "closed_form"}, {"value", expect}});
            pass = std::abs(est.mean - expect) <= 3.0 * est.stderr_ + 2e-3;
        } else if (o.family == "const-sigma" || o.family == "rho_sigma") {
            b.d = 1;
            SigmaPath s = SigmaPath::constant(scalar(o.c), o.T);
            std::vector<double> p = sample_p_sigma(s, b);
            for (double& v : p) v = std::exp(v);
            MCEstimate est = reduce(p, b.seed);
            double expect = std::exp(-0.5 * o.c * o.T) / std::sqrt(1.0 - o.c * o.T);
            results.push_back({{"route", "monte_carlo"}, {"value", est.mean},
                               {"stderr", est.stderr_}});
            results.push_back({{"route", "closed_form"}, {"value", expect}});
            pass = std::abs(est.mean - expect) <= 3.0 * est.stderr_ + 2e-3;
        } else if (o.family == "kac") {
            b.d = 1;
            std::vector<double> l2 = sample_theta_l2(b);
            for (double& v : l2) v = std::exp(-o.lambda * v);
            MCEstimate est = reduce(l2, b.seed);
            GridKernel c = kac_kernel(256, o.T);
            double expect = std::exp(-o.lambda * trace(to_operator(c))) *
                            laplace_spectral((-2.0 * o.lambda) * c).value;
            results.push_back({{"route", "monte_carlo"}, {"value", est.mean},
                               {"stderr", est.stderr_}});
            results.push_back({{"route", "spectral"}, {"value", expect}});
            pass = std::abs(est.mean - expect) <= 3.0 * est.stderr_ + 2e-3;
        } else {
            throw BadParams("unknown mc family: " + o.family);
        }
        rep["results"] = results;
        rep["pass"] = pass;
        emit(rep, o.out);
        return pass ? 0 : 3;
    } catch (const Error& e) {
        rep["diagnostics"] = {{"error", e.what()}};
        rep["pass"] = false;
        emit(rep, "");
        return 4;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quadratic Wiener functional transforms, cross-validated"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // flat key=value config support; command-line flags win
    std::vector<std::string> args(argv + 1, argv + argc);
    for (size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] != "--config") continue;
        std::ifstream cfg(args[i + 1]);
        if (!cfg) {
            std::cerr << "spec error: cannot open config " << args[i + 1] << "\n";
            return 2;
        }
        args.erase(args.begin() + i, args.begin() + i + 2);
        std::vector<std::string> injected;
        for (std::string line; std::getline(cfg, line);) {
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                std::cerr << "spec error: malformed config line: " << line << "\n";
                return 2;
            }
            injected.push_back("--" + line.substr(0, eq));
            injected.push_back(line.substr(eq + 1));
        }
        args.insert(args.begin() + std::min<size_t>(1, args.size()), injected.begin(),
                    injected.end());
        break;
    }
    std::vector<const char*> argv2{argv[0]};
    for (const std::string& a : args) argv2.push_back(a.c_str());

    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--family", o.family);
        sub->add_option("--T", o.T);
        sub->add_option("--d", o.d);
        sub->add_option("--grid-n", o.grid_n);
        sub->add_option("--ode-steps", o.ode_steps);
        sub->add_option("--seed", o.seed);
        sub->add_option("--paths", o.paths);
        sub->add_option("--steps", o.steps);
        sub->add_option("--out", o.out);
        sub->add_option("--tol-route", o.tol_route);
        sub->add_flag("--json", o.want_json);
    };

    CLI::App* lap = app.add_subcommand("laplace", "transform values by every applicable route");
    add_common(lap);
    lap->add_option("--lambda", o.lambda);
    lap->add_option("--beta", o.beta);
    lap->add_option("--gamma", o.gamma);
    lap->add_option("--c", o.c);
    lap->add_option("--D", o.Dval);
    lap->add_flag("--fourier", o.fourier);
    lap->add_option("--csv", o.csv);
    lap->add_option("--sidecar", o.sidecar);

    double phi_a = 0.0, psi_b = -1.0, x0 = 0.0;
    CLI::App* fk = app.add_subcommand("fk", "transition density grid + normalization check");
    add_common(fk);
    fk->add_option("--phi", phi_a);
    fk->add_option("--psi", psi_b);
    fk->add_option("--x", x0);

    double hk_xmax = 2.0, hk_amax = 3.0;
    int hk_nx = 16, hk_na = 16;
    CLI::App* hk = app.add_subcommand("heatkernel", "plane-area heat kernel grid");
    add_common(hk);
    hk->add_option("--xmax", hk_xmax);
    hk->add_option("--amax", hk_amax);
    hk->add_option("--nx", hk_nx);
    hk->add_option("--na", hk_na);

    std::vector<double> kdv_eta{1.0}, kdv_m{2.0};
    double kdv_xmin = -6.0, kdv_xmax = 6.0, kdv_tmin = -0.01, kdv_tmax = 0.01;
    int kdv_nx = 1200, kdv_nt = 2;
    CLI::App* kdv = app.add_subcommand("kdv", "soliton surface CSV + PDE residual");
    add_common(kdv);
    kdv->add_option("--eta", kdv_eta);
    kdv->add_option("--m", kdv_m);
    kdv->add_option("--xmin", kdv_xmin);
    kdv->add_option("--xmax", kdv_xmax);
    kdv->add_option("--nx", kdv_nx);
    kdv->add_option("--tmin", kdv_tmin);
    kdv->add_option("--tmax", kdv_tmax);
    kdv->add_option("--nt", kdv_nt);

    std::string poly_kind = "bernoulli";
    int poly_n = 4;
    double poly_xi = 0.0;
    CLI::App* poly = app.add_subcommand("poly", "polynomial values from both routes");
    add_common(poly);
    poly->add_option("--kind", poly_kind);
    poly->add_option("--n", poly_n);
    poly->add_option("--xi", poly_xi);
    poly->add_flag_callback("--bernoulli", [&] { poly_kind = "bernoulli"; });
    poly->add_flag_callback("--euler", [&] { poly_kind = "euler"; });

    int pin_N = 1;
    CLI::App* pin = app.add_subcommand("pinned", "pinned transforms, analytic vs grid vs MC");
    add_common(pin);
    pin->add_option("--c", o.c);
    pin->add_option("--D", o.Dval);
    pin->add_option("--N", pin_N);

    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo estimates against analytic references");
    add_common(mc);
    mc->add_option("--lambda", o.lambda);
    mc->add_option("--beta", o.beta);
    mc->add_option("--c", o.c);

    CLI::App* st = app.add_subcommand("show-tolerances", "print the central tolerance table");

    try {
        app.parse(static_cast<int>(argv2.size()), argv2.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (lap->parsed()) return cmd_laplace(o);
        if (fk->parsed()) return cmd_fk(o, phi_a, psi_b, x0);
        if (hk->parsed()) return cmd_heatkernel(o, hk_xmax, hk_amax, hk_nx, hk_na);
        if (kdv->parsed())
            return cmd_kdv(o, kdv_eta, kdv_m, kdv_xmin, kdv_xmax, kdv_nx, kdv_tmin, kdv_tmax,
                           kdv_nt);
        if (poly->parsed()) return cmd_poly(o, poly_kind, poly_n, poly_xi);
        if (pin->parsed()) return cmd_pinned(o, pin_N);
        if (mc->parsed()) return cmd_mc(o);
        if (st->parsed()) {
            emit(json{{"schema", 1}, {"command", "show-tolerances"},
                      {"tolerances", tolerance_table(Tolerances{})}},
                 "");
            return 0;
        }
    } catch (const BadParams& e) {
        std::cerr << "spec error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
