#include "qtraj/stochastic.hpp"

#include <cmath>
#include <fstream>

namespace qtraj {

WienerPath wiener_path(size_t n_steps, double dt, RngStream& rng) {
    if (n_steps < 1) throw ArgumentError("wiener_path: n_steps must be >= 1");
    if (!(dt > 0.0)) throw ArgumentError("wiener_path: dt must be positive");
    WienerPath p;
    p.dt = dt;
    p.increments.resize(n_steps);
    p.cumulative.resize(n_steps);
    const double s = std::sqrt(dt);
    double acc = 0.0;
    for (size_t k = 0; k < n_steps; ++k) {
        p.increments[k] = s * rng.gaussian();
        acc += p.increments[k];
        p.cumulative[k] = acc;
    }
    return p;
}

double quadratic_variation(const WienerPath& path) {
    if (path.increments.empty()) throw ArgumentError("quadratic_variation: empty path");
    double qv = 0.0;
    for (double dw : path.increments) qv += dw * dw;
    return qv;
}

std::vector<cplx> ou_exact(cplx x0, cplx k, cplx g, const WienerPath& path) {
    const size_t n = path.steps();
    std::vector<cplx> x(n);
    // running sum of e^{-k t_j} dW_j with t_j the left endpoint of step j
    cplx acc = 0.0;
    for (size_t j = 0; j < n; ++j) {
        const double tj = static_cast<double>(j) * path.dt;
        acc += std::exp(-k * tj) * path.increments[j];
        const double t = static_cast<double>(j + 1) * path.dt;
        x[j] = std::exp(k * t) * (x0 + g * acc);
    }
    return x;
}

std::vector<cplx> multiplicative_exact(cplx x0, cplx f, cplx g, const WienerPath& path) {
    const size_t n = path.steps();
    std::vector<cplx> x(n);
    const cplx drift = f - 0.5 * g * g;
    for (size_t j = 0; j < n; ++j) {
        const double t = static_cast<double>(j + 1) * path.dt;
        x[j] = std::exp(drift * t + g * path.cumulative[j]) * x0;
    }
    return x;
}

std::vector<cplx> multiplicative_euler(cplx x0, cplx f, cplx g, const WienerPath& path) {
    const size_t n = path.steps();
    std::vector<cplx> x(n);
    cplx cur = x0;
    for (size_t j = 0; j < n; ++j) {
        cur += (f * path.dt + g * path.increments[j]) * cur;
        x[j] = cur;
    }
    return x;
}

double PoissonPath::Y() const {
    double y = 0.0;
    for (double t : event_times) y += t;
    return y;
}

size_t PoissonPath::N_at(double t) const {
    size_t n = 0;
    while (n < event_times.size() && event_times[n] <= t) ++n;
    return n;
}

double PoissonPath::Y_at(double t) const {
    double y = 0.0;
    for (double tk : event_times) {
        if (tk > t) break;
        y += tk;
    }
    return y;
}

PoissonPath poisson_path(double lambda, size_t n_steps, double dt, RngStream& rng) {
    if (lambda < 0.0) throw ArgumentError("poisson_path: negative rate");
    if (!(dt > 0.0)) throw ArgumentError("poisson_path: dt must be positive");
    if (lambda * dt >= 0.1)
        throw ConfigError("poisson_path: lambda*dt >= 0.1, Bernoulli discretization invalid");
    PoissonPath p;
    p.rate = lambda;
    p.dt = dt;
    p.event_flags.resize(n_steps, 0);
    const double prob = lambda * dt;
    for (size_t k = 0; k < n_steps; ++k) {
        if (lambda > 0.0 && rng.bernoulli(prob)) {
            p.event_flags[k] = 1;
            p.event_times.push_back(static_cast<double>(k + 1) * dt);
        }
    }
    return p;
}

PoissonPath poisson_path_exact(double lambda, double t_final, RngStream& rng) {
    if (lambda < 0.0) throw ArgumentError("poisson_path_exact: negative rate");
    if (!(t_final > 0.0)) throw ArgumentError("poisson_path_exact: t_final must be positive");
    PoissonPath p;
    p.rate = lambda;
    p.dt = 0.0;
    if (lambda > 0.0) {
        double t = rng.exponential() / lambda;
        while (t <= t_final) {
            p.event_times.push_back(t);
            t += rng.exponential() / lambda;
        }
    }
    return p;
}

void write_csv(const WienerPath& path, const std::string& filename) {
    std::ofstream f(filename);
    f << "# units: t [s], dW [sqrt(s)]\n";
    f << "t,dW\n";
    for (size_t k = 0; k < path.steps(); ++k)
        f << static_cast<double>(k + 1) * path.dt << "," << path.increments[k] << "\n";
}

void write_csv(const PoissonPath& path, const std::string& filename) {
    std::ofstream f(filename);
    f << "# units: t [s], dN [count]\n";
    f << "t,dN\n";
    for (size_t k = 0; k < path.steps(); ++k)
        f << static_cast<double>(k + 1) * path.dt << "," << int(path.event_flags[k]) << "\n";
}

} // namespace qtraj
