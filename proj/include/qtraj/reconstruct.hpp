#ifndef QTRAJ_RECONSTRUCT_HPP
#define QTRAJ_RECONSTRUCT_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/hilbert.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

// ---- error taxonomy of the inversion procedures --------------------------

struct NoZeroSupport : ConfigError {
    using ConfigError::ConfigError;
};
struct AdjacentZeros : ConfigError {
    using ConfigError::ConfigError;
};
struct DivisionGuard : NumericalError {
    using NumericalError::NumericalError;
};
struct IllConditioned : NumericalError {
    using NumericalError::NumericalError;
};

// ---- state and probe -------------------------------------------------------

// |psi> = sum r_n e^{i theta_n} |n>, theta_0 = 0 gauge, P_n = r_n^2.
struct PureCavityState {
    std::vector<double> r;
    std::vector<double> theta;

    long dim() const { return static_cast<long>(r.size()); }
    double P(long n) const { return r[n] * r[n]; }
    Vec amps() const;
    static PureCavityState from_amps(const Vec& a); // applies the gauge
    void validate() const;                          // sum P = 1 +- 1e-10
};

struct ProbeConfig {
    double kappa = 1.0; // JC coupling (rad/s)
    double t = 0.0;     // first-atom interaction time
    double s = 0.0;     // second-atom interaction time
    double phi = 0.0;   // atomic superposition phase
    double Omega(long n) const { return kappa * std::sqrt(static_cast<double>(n + 1)); }
};

// kappa t = 0.8/sqrt(n_max) keeps every Gamma_n Upsilon_n away from zero
double default_probe_time(double kappa, long n_max);

// ---- forward models ---------------------------------------------------------

// Joint cavity (x) atom state after a resonant JC interaction of length t;
// atom enters in (|g> + e^{i phi}|e>)/sqrt(2). Requires two empty cavity
// levels of headroom.
StateVector jc_joint_state(const PureCavityState& state, double phi, double t, double kappa);

// generic JC rotation between the cavity factor and one atom factor of a
// multi-factor joint state (atom_slot counts atom factors left of none)
void jc_apply(Vec& joint, long cavity_dim, long n_atoms, long atom_slot, double t,
              double kappa);

struct SingleAtomProbs {
    std::vector<double> qe, qg; // true joint probabilities (sum to 1)
};

SingleAtomProbs single_atom_probs(const PureCavityState& state, double phi, double t,
                                  double kappa);

std::vector<double> total_probs(const PureCavityState& state, double phi, double t,
                                double kappa);

struct TwoAtomProbs {
    // true joint probabilities, first index = first atom; sum over all = 1
    std::vector<double> qgg, qge, qeg, qee;
};

TwoAtomProbs two_atom_probs(const PureCavityState& state, double phi, double t, double s,
                            double kappa);

// ---- printed-formula transcriptions (audited against the exact model) ------

// Values as printed in the source material (their normalization conventions:
// one-atom formulas are 2x, two-atom 4x the true probabilities).
double printed_Qe(const std::vector<double>& P, const std::vector<double>& dtheta, long n,
                  double t, double kappa, double phi);
double printed_Qg(const std::vector<double>& P, const std::vector<double>& dtheta, long n,
                  double t, double kappa, double phi);
double printed_Qtotal(const std::vector<double>& P, const std::vector<double>& dtheta, long n,
                      double t, double kappa, double phi);
double printed_Qgg(const std::vector<double>& P, const std::vector<double>& theta, long n,
                   double t, double s, double kappa, double phi);
double printed_Qge(const std::vector<double>& P, const std::vector<double>& theta, long n,
                   double t, double s, double kappa, double phi);
double printed_Qeg(const std::vector<double>& P, const std::vector<double>& theta, long n,
                   double t, double s, double kappa, double phi);
double printed_Qee(const std::vector<double>& P, const std::vector<double>& theta, long n,
                   double t, double s, double kappa, double phi);

struct FormulaAuditEntry {
    std::string formula;
    double max_abs_error = 0.0;
    bool mismatch = false; // above 1e-9
};

struct FormulaAuditReport {
    std::vector<FormulaAuditEntry> entries;
    long n_states = 0;
    long n_mismatched() const;
    std::string summary() const;
};

// Compare every printed formula against the exact joint-state model on
// random states (dim <= 10). Mismatches are reported, never patched.
FormulaAuditReport audit_printed_formulas(long n_states, uint64_t seed);

// ---- datasets and inversion -------------------------------------------------

enum class Family { g, e, total, gg, ge, eg, ee };
std::string to_string(Family f);

struct Dataset {
    double phi = 0.0;
    Family family = Family::total;
    std::vector<double> q; // true probabilities (or empirical frequencies)
};

struct ReconstructionInput {
    std::vector<double> P; // measured photon statistics of the unknown state
    std::vector<Dataset> datasets;
    double kappa = 1.0, t = 0.0, s = 0.0;
    long n_shots = 0; // 0 = exact data
};

enum class SchemeKind { one_atom, one_atom_total, two_atom };

// Phase differences theta_n - theta_{n-1} from single-atom data at
// phi = 0 and pi/2 (family g or e), as printed.
std::vector<double> invert_single_atom(const std::vector<double>& P,
                                       const std::vector<double>& q_phi0,
                                       const std::vector<double>& q_phi90, Family family,
                                       double t, double kappa);

struct RecursionResult {
    std::vector<double> dtheta;
    std::vector<double> amplification; // per-n error amplification estimate
};

// Q0-seeded recursion from the no-atom-measurement totals
RecursionResult recursion_no_atom_measurement(const std::vector<double>& P,
                                              const std::vector<double>& q_phi0,
                                              const std::vector<double>& q_phi90, double t,
                                              double kappa);

// theta_n - theta_{n-2} on even support (t = s)
std::vector<double> invert_two_atom_even(const ReconstructionInput& in);

// full phase set via the recursive linear inversion (t = s); interior zeros
// are bridged through theta_n - theta_{n-2}
std::vector<double> invert_two_atom_general(const ReconstructionInput& in);

// multinomial sampling of a distribution; returns empirical frequencies
std::vector<double> sample_counts(const std::vector<double>& dist, long n_shots,
                                  RngStream& rng);

struct ReconstructionResult {
    PureCavityState estimate;
    double fidelity = -1.0; // vs truth when supplied
    std::vector<double> phase_stderr;
    std::vector<std::string> diagnostics;
};

ReconstructionResult reconstruct(const std::optional<PureCavityState>& truth,
                                 const ReconstructionInput& in, SchemeKind scheme);

// forward simulation of a complete measurement campaign (exact or sampled)
ReconstructionInput make_input(const PureCavityState& state, SchemeKind scheme, double kappa,
                               double t, double s, long n_shots, uint64_t seed);

} // namespace qtraj

#endif
