#ifndef QTRAJ_EVOLUTION_OPS_HPP
#define QTRAJ_EVOLUTION_OPS_HPP

#include <utility>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/hilbert.hpp"
#include "qtraj/rng.hpp"
#include "qtraj/stochastic.hpp"

namespace qtraj {

// --- linear-equation splitting -------------------------------------------

// A = Atilde - B^2/2, so that e^{A dt} e^{B dW} reproduces
// (1 + Atilde dt + B dW) to first order under dW^2 = dt.
Mat lqse_split(const Mat& Atilde, const Mat& B);

// --- QND photon-number measurement ---------------------------------------

// V(t) for d|psi> = (A dt + B dW)|psi>, A = -i w (n + 1/2) - 2k n^2,
// B = sqrt(2k) n. Diagonal; |V_n|^2 = exp(-4 k t n^2 + 2 sqrt(2k) n W).
Mat qnd_number_evolution(double omega, double k, double t, double W, long dim);

// diagonal of V V† as a function of tau = k t and standardized noise w
double qnd_vv_diag(double tau, double w_std, long n);

// Average conditional photon-number uncertainty <sigma_n(tau)> for a
// diagonal initial state, by Gauss-Hermite quadrature (129 nodes, doubled
// adaptively until the relative change is < 1e-6).
double qnd_average_uncertainty(const std::vector<double>& rho_diag, double tau);

// --- momentum measurement in a linear potential --------------------------

// Sample (W(t), Y(t)), Y = int t' dW, Cov = [[t, t^2/2],[t^2/2, t^3/3]].
std::pair<double, double> momentum_joint_noise(double t, RngStream& rng);

// sigma_p^2(t) = sigma_p^2(0) / (1 + 8 k sigma_p^2(0) t)
double momentum_conditional_variance(double sigma_p0_sq, double k, double t);

// --- general quadratic generator ------------------------------------------

// A = alpha P^2 + gamma Q^2 + xi Q P + eta P + zeta Q,  B = k Q + kappa P.
struct QuadraticGenerator {
    cplx alpha{0.0}, gamma{0.0}, xi{0.0}, eta{0.0}, zeta{0.0};
    cplx k{0.0}, kappa{0.0};

    cplx lambda() const; // sqrt(xi^2 - 4 alpha gamma), Re >= 0 branch
};

struct FFunctions {
    cplx f1, f2, f3;
};

// e^{-eps A} (k Q + kappa P) e^{eps A} = f1(eps) Q + f2(eps) P + f3(eps).
// The lambda -> 0 limit switches to a series branch at |hbar lambda eps| < 1e-4.
FFunctions quad_f_functions(const QuadraticGenerator& gen, double eps, double hbar = 1.0);

// Realized stochastic integrals driving the closed-form evolution operator
// e^{At} e^{X1 Q + X2 P} e^{X3 + i hbar Z}. Z is accumulated numerically
// alongside the path and only moves norm/phase.
struct GaussianNoiseSummary {
    double t = 0.0;
    double W = 0.0;
    cplx X1{0.0}, X2{0.0}, X3{0.0};
    cplx Z{0.0};
};

GaussianNoiseSummary accumulate_noise_summary(const QuadraticGenerator& gen,
                                              const WienerPath& path, double hbar = 1.0);

// analytic <X_i X_j>(t) = int_0^t f_i f_j dt' by fine trapezoid (test oracle)
Eigen::Matrix3cd noise_summary_covariance(const QuadraticGenerator& gen, double t,
                                          double hbar = 1.0, long n_grid = 4096);

// Apply e^{At} e^{X1 Q + X2 P} e^{X3} to a state on the truncated basis
// defined by (mass, omega, hbar); Z is exposed through log_weight_extra.
struct QuadEvolutionResult {
    StateVector state_unnormalized;
    cplx log_z_phase; // i hbar Z
};

QuadEvolutionResult quad_evolution(const QuadraticGenerator& gen, double t,
                                   const GaussianNoiseSummary& noise, const StateVector& psi0,
                                   double mass, double omega, double hbar = 1.0,
                                   double tail_tolerance = 1e-6);

// --- conditional position variance (measured harmonic oscillator) ---------

// s'^2(t) = s^2 iz (iz tanh(z w t) - 1)/(tanh(z w t) - iz), z = sqrt(2i/r - 1).
cplx position_meas_s_prime(double s_sq, double r, double omega, double t);

// sigma_x^2(t) = 1/(4 Re[s'^2])
double position_meas_sigma_x2(double s_sq, double r, double omega, double t);

// --- operator identities (exponentials of a, a†) --------------------------

struct DisentangledQuadratic {
    cplx u, v, w;
    cplx l, chi, m, f;
    cplx prefactor; // scalar in front of the ordered product
};

// e^{u a^2 + v a†^2 + w a†a} = prefactor e^{l a†^2} e^{chi a†a} e^{m a^2}
DisentangledQuadratic disentangle_quadratic(cplx u, cplx v, cplx w);

struct LinearExpOnCoherent {
    cplx alpha_out; // alpha + phi
    cplx factor;    // scalar in front of the coherent state
    cplx theta, phi;
};

// e^{nu P + mu Q} |alpha> = factor |alpha + phi> on the oscillator basis
// defined by (mass, omega, hbar)
LinearExpOnCoherent linear_exp_on_coherent(cplx nu, cplx mu, cplx alpha, double mass,
                                           double omega, double hbar = 1.0);

// --- Poisson-process evolution operators ----------------------------------

// e^{[-(i w + g/2) a†a + g/2] t} a^N (the Y-independent form; Y only moves
// norm and global phase for this generator)
Mat poisson_damped_evolution(double omega, double gamma, double t, long N, long dim);

// P(N,t) weight for a record with N jumps: norm^2(psi_hat) P~(N,t) q^N with
// q = (1 - e^{-gamma t})/(gamma t) and P~ the Poissonian at rate gamma.
double poisson_record_probability(double psi_hat_norm2, double gamma, double t, long N);

// closed-form P(N,t) for an initial even cat (sum of two Poissonians)
double cat_jump_count_probability(double alpha_abs, double gamma, double t, long N);

// normalized cat after N jumps: (|a'> + (-1)^N |-a'>)/sqrt(2(1+(-1)^N e^{-2|a'|^2})),
// a' = alpha e^{-(i w + g/2) t}
StateVector cat_trajectory_state(cplx alpha, double omega, double gamma, double t, long N,
                                 long dim);

// driven cavity: coherent in -> coherent out, (a0 - as) e^{-g t/2} + as,
// independent of the jump record
cplx driven_cavity_coherent(cplx alpha0, cplx alpha_s, double gamma, double t);

// general input: evaluate e^{At} prod_k [(a - as) e^{-g t_k/2} + as] on the
// truncated basis (jump record required)
StateVector driven_cavity_evolution(const StateVector& psi0, cplx alpha_s, double gamma,
                                    double t, const std::vector<double>& jump_times);

// Kerr cavity at chi t = pi: two-component cat. Requires chi*t = pi.
StateVector kerr_cat_evolution(cplx alpha, double omega, double gamma, double chi_kerr,
                               double t, long N, double Y, long dim);

// --- quadrature rule -------------------------------------------------------

// Gauss-Hermite nodes/weights for int e^{-x^2} f(x) dx (Golub-Welsch)
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace qtraj

#endif
