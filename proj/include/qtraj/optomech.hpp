#ifndef QTRAJ_OPTOMECH_HPP
#define QTRAJ_OPTOMECH_HPP

#include <functional>
#include <string>
#include <vector>

#include "qtraj/common.hpp"

namespace qtraj {

// Classical laser noise spectral function of omega; default identically 0
// (quantum-limited laser).
using SpectralFunction = std::function<double(double)>;

// Cavity-with-moving-mirror model parameters, SI units. Derived quantities
// are methods and never stored, so they cannot go stale. Printed-vs-computed
// conflicts from the source material are kept in `provenance`.
struct OptomechParams {
    // fundamental constants (CODATA defaults, overridable)
    double hbar = 1.054571817e-34; // J s
    double kB = 1.380649e-23;      // J/K
    double c_light = 2.99792458e8; // m/s

    double omega0 = 0.0;  // cavity resonance (rad/s)
    double L = 0.0;       // cavity length (m)
    double mass = 0.0;    // mirror mass (kg)
    double nu = 0.0;      // mirror resonance (rad/s)
    double Gamma = 0.0;   // mechanical damping (1/s)
    double Q_quoted = 0.0; // mechanical quality factor as quoted (may disagree with nu/(2 Gamma))
    double gamma = 0.0;   // front-mirror decay (1/s)
    double mu = 0.0;      // internal loss (1/s)
    double eps = 0.0;     // modulation depth
    double alpha_sq = 0.0; // steady-state intracavity photon number (stored directly)
    double T = 0.0;        // temperature (K)
    double F_ext = 0.0;    // optional constant force (N)

    SpectralFunction G_x; // amplitude noise spectrum (empty = 0)
    SpectralFunction G_y; // phase noise spectrum (empty = 0)

    std::vector<std::string> provenance;

    // derived, always recomputed
    double T_s() const { return kB * T / (hbar * nu); }
    double alpha() const { return std::sqrt(alpha_sq); }
    double E_drive() const { return 0.5 * (gamma + mu) * alpha(); } // alpha = 2E/(gamma+mu)
    double beta_in() const { return E_drive() / std::sqrt(gamma); } // E = sqrt(gamma) beta
    double P_laser() const;                                         // E = sqrt(P gamma/(hbar w0))
    double g_coupling() const { return omega0 / L; }
    double chi() const { return g_coupling() * std::sqrt(2.0 * hbar / (mass * nu)); }
    double Q_m() const { return nu / (2.0 * Gamma); }
    double finesse() const { return M_PI * c_light / (2.0 * L * gamma); }
    double gx(double w) const { return G_x ? G_x(w) : 0.0; }
    double gy(double w) const { return G_y ? G_y(w) : 0.0; }

    void validate() const;
};

// parameter set quoted for the experiment discussed in the text; includes
// provenance notes for the internally inconsistent printed values
OptomechParams paper_parameter_set();

struct SteadyState {
    double alpha; // intracavity amplitude
    double q_ss;  // mirror displacement (m)
    double p_ss;  // mirror momentum
};

SteadyState steady_state(const OptomechParams& p);

// D(w) = ((gamma+mu)/2 - i w)^2 (nu^2 - w^2 - i Gamma w)
cplx transfer_denominator(const OptomechParams& p, double omega);

// M(w) with (dX, dY, dQ, dP) = M(w) n(w); equals the inverse of the
// Fourier-transformed linear system applied to the noise vector
Eigen::Matrix4cd transfer_matrix(const OptomechParams& p, double omega);

enum class ThermalModel { CBMME, SBMME };
enum class Detection { phase_mod, homodyne };

// Phase-quadrature signal spectrum, term by term, in units of (eps beta)^2
// [s]. `total` is the sum of enabled terms.
struct SpectrumResult {
    std::vector<double> omega;
    std::vector<double> shot, backaction, internal_loss, amp_noise, phase_noise, thermal,
        diosi_1overT, sbmme_spurious, total;
    bool thermal_validity_flag = false; // set when T_s < 10

    void write_csv(const std::string& filename) const;
};

SpectrumResult spectrum(const OptomechParams& p, const std::vector<double>& omega_grid,
                        ThermalModel model = ThermalModel::CBMME,
                        Detection detection = Detection::phase_mod);

// White-noise weights of the demodulated signal model
// R = eps beta dY_out + q1 + q2 - 2 eps sqrt(gamma) alpha dy.
struct SignalWeights {
    double q1_var; // (1/2)(beta - sqrt(gamma) alpha)^2
    double q2_var; // (1/2)(eps beta)^2
    double dyout_var; // quantum phase-quadrature floor in the signal, (eps beta)^2
    double shot_floor; // assembled shot term of the spectrum, per (eps beta)^2
};

SignalWeights demodulated_signal_model(const OptomechParams& p);

// converts the signal spectrum to the position-fluctuation spectrum:
// hbar/(2 m (eps beta)^2 gamma nu chi^2 alpha^2) (((gamma+mu)/2)^2 + w^2)
double position_scaling(const OptomechParams& p, double omega);

// Closed-form error budget as printed, plus the generic spectrum route.
struct ErrorBudget {
    double dx2_SN;       // shot noise, any frequency
    double dx2_BA_0;     // back-action at w = 0
    double dx2_BA_nu;    // back-action at w = nu (= 4 Q^2 x dx2_BA_0)
    double dx2_Th_0;     // thermal at w = 0
    double dx2_Th_nu;    // thermal at w = nu
    // spectrum-route values S_x(w)/tau for cross-checks
    double route_SN_0, route_BA_0, route_Th_0;
};

ErrorBudget measurement_error_budget(const OptomechParams& p, double tau_m);

void write_error_budget_csv(const OptomechParams& p, const std::vector<double>& powers_W,
                            double tau_m, const std::string& filename);

} // namespace qtraj

#endif
