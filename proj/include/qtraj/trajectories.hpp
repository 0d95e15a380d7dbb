#ifndef QTRAJ_TRAJECTORIES_HPP
#define QTRAJ_TRAJECTORIES_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qtraj/common.hpp"
#include "qtraj/hilbert.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

enum class Scheme { jump_nonlinear, jump_linear, diffusive_nonlinear, diffusive_linear };

std::string to_string(Scheme s);

// One unravelling of d rho = -i/hbar [H,rho] dt + sum_n D[c_n] rho dt.
// For jump_linear each channel carries an ostensible rate lambda_n; if a
// rate is left at 0 it is filled in by run_ensemble from a coarse
// master-equation pre-run (max of <c†c> over the run).
struct UnravellingSpec {
    Mat H;
    std::vector<Mat> channels;
    Scheme scheme = Scheme::diffusive_nonlinear;
    std::vector<double> ostensible_rates; // jump_linear only
    double hbar = 1.0;

    long dim() const { return H.rows(); }
    void validate() const;
};

// Omega_0 = 1 - (i H/hbar + c†c/2) dt,  Omega_1 = sqrt(dt) c
std::pair<Mat, Mat> measurement_operators(const Mat& H, const Mat& c, double dt,
                                          double hbar = 1.0);

// c -> c + beta,  H -> H - (i hbar/2)(beta* c - beta c†); the non-selective
// map is unchanged (exactly, at the generator level)
std::pair<Mat, Mat> homodyne_transform(const Mat& c, cplx beta, const Mat& H,
                                       double hbar = 1.0);

// Linear diffusive spec for a continuous position measurement of strength k:
// drift -(i H_m/hbar + k Q^2) dt, noise sqrt(2k) Q dW.
UnravellingSpec position_measurement_spec(const Mat& H_m, const Mat& Q, double k,
                                          double hbar = 1.0);

// Realized noise of one trajectory: Wiener increments per channel and/or
// jump (time, channel) records.
struct NoiseRecord {
    double dt = 0.0;
    std::vector<std::vector<double>> dW; // [channel][step]
    std::vector<double> jump_times;
    std::vector<int> jump_channels;
};

// --- single steps (building blocks; psi modified in place) ---

// returns the channel index fired, or -1
int step_jump_nonlinear(Vec& psi, const UnravellingSpec& spec, double dt, RngStream& rng);
// returns the channel fired under the ostensible measure, or -1
int step_jump_linear(Vec& psi, const UnravellingSpec& spec, double dt, RngStream& rng);
void step_diffusive_nonlinear(Vec& psi, const UnravellingSpec& spec, double dt,
                              const double* dW);
void step_diffusive_linear(Vec& psi, const UnravellingSpec& spec, double dt,
                           const double* dW);

// Fourth-order (RK4) integration of the Lindblad master equation with
// hermiticity repair each step. Throws NumericalError if the trace drifts
// by more than 1e-6.
Mat master_evolve(const Mat& rho0, const Mat& H, const std::vector<Mat>& channels, double t,
                  double dt, double hbar = 1.0);

Mat lindblad_rhs(const Mat& rho, const Mat& H, const std::vector<Mat>& channels,
                 double hbar = 1.0);

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<Vec> states; // normalized at stored times
    NoiseRecord noise;
    double weight = 1.0; // norm^2 under the ostensible measure (1 for nonlinear)
    double final_tail = 0.0;
};

struct TrajectoryOptions {
    double t_final = 1.0;
    double dt = 1e-3;
    long store_stride = 1;
    bool store_states = true;
    bool store_noise = false;
};

TrajectoryResult run_single(const UnravellingSpec& spec, const StateVector& psi0,
                            const TrajectoryOptions& opt, RngStream rng);

// Replay a trajectory on a fixed noise record (shared-noise oracle checks).
TrajectoryResult run_on_record(const UnravellingSpec& spec, const StateVector& psi0,
                               const TrajectoryOptions& opt, const NoiseRecord& noise);

struct Observable {
    std::string name;
    Mat op;
};

struct EnsembleOptions {
    double t_final = 1.0;
    double dt = 1e-3;
    long n_traj = 1;
    uint64_t seed = 0;
    long store_stride = 10;
    int n_threads = 1;
    double tail_tolerance = 1e-6; // truncation leakage monitor
};

// Weighted ensemble statistics per stored time and observable.
struct EnsembleResult {
    std::vector<double> times;
    std::vector<std::string> names;
    // [obs][time]
    std::vector<std::vector<cplx>> mean;
    std::vector<std::vector<double>> stderr_re;
    std::vector<std::vector<double>> cond_var_mean;   // mean of per-path Var[O]
    std::vector<std::vector<double>> cond_var_spread; // std of per-path Var[O]
    double min_weight = 0.0, max_weight = 0.0;
    long n_tail_flagged = 0; // trajectories whose Fock tail exceeded tolerance

    void write_csv(const std::string& filename) const;
};

// Deterministic parallel ensemble: trajectory i always uses RNG stream
// (seed, i); reduction order is fixed independent of thread count.
EnsembleResult run_ensemble(const UnravellingSpec& spec, const StateVector& psi0,
                            const std::vector<Observable>& observables,
                            const EnsembleOptions& opt);

} // namespace qtraj

#endif
