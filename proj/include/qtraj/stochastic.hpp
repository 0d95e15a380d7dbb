#ifndef QTRAJ_STOCHASTIC_HPP
#define QTRAJ_STOCHASTIC_HPP

#include <string>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

// Fixed-step Wiener path: increments dW_k ~ N(0, dt) and the running sum
// W(t_k). Value-like and immutable once built.
struct WienerPath {
    double dt = 0.0;
    std::vector<double> increments;
    std::vector<double> cumulative; // W(t_k), k = 1..n

    size_t steps() const { return increments.size(); }
    double t_final() const { return dt * static_cast<double>(steps()); }
    // W at the end of step k (1-based); W(0) = 0
    double W(size_t k) const { return k == 0 ? 0.0 : cumulative[k - 1]; }
};

WienerPath wiener_path(size_t n_steps, double dt, RngStream& rng);

// sum of squared increments; converges to t as dt -> 0
double quadratic_variation(const WienerPath& path);

// Exact Ornstein-Uhlenbeck solution on a realized path:
//   x(t_k) = e^{k t} x0 + g e^{k t} sum_j e^{-k t_j} dW_j,  t_j = (j-1) dt.
// Returns the trajectory at t_1..t_n.
std::vector<cplx> ou_exact(cplx x0, cplx k, cplx g, const WienerPath& path);

// Exact solution of dx = f x dt + g x dW:
//   x(t) = exp[(f - g^2/2) t + g W(t)] x0.
std::vector<cplx> multiplicative_exact(cplx x0, cplx f, cplx g, const WienerPath& path);

// Euler-Maruyama integration of dx = f x dt + g x dW on the same path
// (self-convergence reference for the exact solution).
std::vector<cplx> multiplicative_euler(cplx x0, cplx f, cplx g, const WienerPath& path);

// Fixed-step Poisson path: Bernoulli(lambda*dt) event per step. N(t) is the
// running count, Y(t) the running sum of event times.
struct PoissonPath {
    double rate = 0.0;
    double dt = 0.0;
    std::vector<uint8_t> event_flags;
    std::vector<double> event_times;

    size_t steps() const { return event_flags.size(); }
    double t_final() const { return dt * static_cast<double>(steps()); }
    size_t N() const { return event_times.size(); }
    double Y() const;           // sum of event times
    size_t N_at(double t) const; // count of events with t_k <= t
    double Y_at(double t) const;
};

// requires lambda*dt < 0.1, else the Bernoulli discretization is invalid
PoissonPath poisson_path(double lambda, size_t n_steps, double dt, RngStream& rng);

// Validation variant: exact exponential waiting times on [0, t_final]
// (event_flags left empty; dt stored as 0).
PoissonPath poisson_path_exact(double lambda, double t_final, RngStream& rng);

// Debug serialization, one row per step: t, dW (or dN).
void write_csv(const WienerPath& path, const std::string& filename);
void write_csv(const PoissonPath& path, const std::string& filename);

} // namespace qtraj

#endif
