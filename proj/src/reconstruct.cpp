#include "qtraj/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qtraj {

namespace {

// An amplitude written as sum_j coef_j e^{i theta_{k_j}}; the machinery below
// expands |amp|^2 into a constant plus cos/sin terms in phase differences,
// which is what the inversion procedures solve for.
struct PhaseTerm {
    cplx coef;
    long k;
};
using PhaseAmp = std::vector<PhaseTerm>;

void add_term(PhaseAmp& amp, cplx coef, long k) {
    if (coef == cplx(0.0)) return;
    for (auto& t : amp)
        if (t.k == k) {
            t.coef += coef;
            return;
        }
    amp.push_back({coef, k});
}

PhaseAmp combine(const PhaseAmp& a, cplx sa, const PhaseAmp& b, cplx sb) {
    PhaseAmp out;
    for (const auto& t : a) add_term(out, sa * t.coef, t.k);
    for (const auto& t : b) add_term(out, sb * t.coef, t.k);
    return out;
}

struct AffinePair {
    long hi, lo;
    cplx C; // contribution 2 Re[C e^{i(theta_hi - theta_lo)}]
};

struct AffineProb {
    double constant = 0.0;
    std::vector<AffinePair> pairs;

    double eval(const std::vector<double>& theta) const {
        double q = constant;
        for (const auto& p : pairs) {
            const double d = theta[p.hi] - theta[p.lo];
            q += 2.0 * (p.C.real() * std::cos(d) - p.C.imag() * std::sin(d));
        }
        return q;
    }
};

AffineProb affine_from_amp(const PhaseAmp& amp) {
    AffineProb out;
    for (const auto& t : amp) out.constant += std::norm(t.coef);
    for (size_t j = 0; j < amp.size(); ++j)
        for (size_t l = j + 1; l < amp.size(); ++l) {
            const bool j_hi = amp[j].k > amp[l].k;
            const PhaseTerm& hi = j_hi ? amp[j] : amp[l];
            const PhaseTerm& lo = j_hi ? amp[l] : amp[j];
            out.pairs.push_back({hi.k, lo.k, hi.coef * std::conj(lo.coef)});
        }
    return out;
}

// amplitudes after the first atom: index [n][atom], atom 0 = g, 1 = e
std::vector<std::array<PhaseAmp, 2>> one_atom_amps(const std::vector<double>& r, double t,
                                                   double kappa, double phi) {
    const long d = static_cast<long>(r.size());
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const cplx eip = std::exp(I * phi);
    auto Om = [&](long n) { return kappa * std::sqrt(static_cast<double>(n + 1)); };
    std::vector<std::array<PhaseAmp, 2>> A(d);
    for (long n = 0; n < d; ++n) {
        // |n, g>
        if (n == 0) {
            add_term(A[0][0], r[0] * inv_sqrt2, 0);
        } else {
            add_term(A[n][0], r[n] * std::cos(Om(n - 1) * t) * inv_sqrt2, n);
            add_term(A[n][0], -I * eip * r[n - 1] * std::sin(Om(n - 1) * t) * inv_sqrt2, n - 1);
        }
        // |n, e>
        add_term(A[n][1], eip * r[n] * std::cos(Om(n) * t) * inv_sqrt2, n);
        if (n + 1 < d)
            add_term(A[n][1], -I * r[n + 1] * std::sin(Om(n) * t) * inv_sqrt2, n + 1);
    }
    return A;
}

// amplitudes after both atoms: index [n][a1*2 + a2]
std::vector<std::array<PhaseAmp, 4>> two_atom_amps(const std::vector<double>& r, double t,
                                                   double s, double kappa, double phi) {
    const long d = static_cast<long>(r.size());
    auto A1 = one_atom_amps(r, t, kappa, phi);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    auto Om = [&](long n) { return kappa * std::sqrt(static_cast<double>(n + 1)); };
    std::vector<std::array<PhaseAmp, 4>> A2(d);
    static const PhaseAmp empty;
    for (long n = 0; n < d; ++n) {
        for (int a1 = 0; a1 < 2; ++a1) {
            const PhaseAmp& here = A1[n][a1];
            const PhaseAmp& below = n > 0 ? A1[n - 1][a1] : empty;
            const PhaseAmp& above = n + 1 < d ? A1[n + 1][a1] : empty;
            // second atom exits g
            if (n == 0)
                A2[n][a1 * 2 + 0] = combine(here, inv_sqrt2, empty, 0.0);
            else
                A2[n][a1 * 2 + 0] =
                    combine(here, std::cos(Om(n - 1) * s) * inv_sqrt2, below,
                            -I * std::sin(Om(n - 1) * s) * inv_sqrt2);
            // second atom exits e
            A2[n][a1 * 2 + 1] = combine(here, std::cos(Om(n) * s) * inv_sqrt2, above,
                                        -I * std::sin(Om(n) * s) * inv_sqrt2);
        }
    }
    return A2;
}

double eval_amp_prob(const PhaseAmp& amp, const std::vector<double>& theta) {
    cplx acc = 0.0;
    for (const auto& t : amp) acc += t.coef * std::exp(I * theta[t.k]);
    return std::norm(acc);
}

long highest_occupied(const std::vector<double>& P, double thr) {
    long nmax = -1;
    for (size_t n = 0; n < P.size(); ++n)
        if (P[n] > thr) nmax = static_cast<long>(n);
    return nmax;
}

} // namespace

// ---- PureCavityState -------------------------------------------------------

Vec PureCavityState::amps() const {
    Vec a(dim());
    for (long n = 0; n < dim(); ++n) a(n) = r[n] * std::exp(I * theta[n]);
    return a;
}

PureCavityState PureCavityState::from_amps(const Vec& a) {
    PureCavityState s;
    s.r.resize(a.size());
    s.theta.resize(a.size());
    // global phase gauge: rotate so the first occupied amplitude is real
    cplx gauge = 1.0;
    for (long n = 0; n < a.size(); ++n)
        if (std::abs(a(n)) > 1e-12) {
            gauge = std::conj(a(n)) / std::abs(a(n));
            break;
        }
    for (long n = 0; n < a.size(); ++n) {
        const cplx v = gauge * a(n);
        s.r[n] = std::abs(v);
        s.theta[n] = s.r[n] > 1e-12 ? std::arg(v) : 0.0;
    }
    return s;
}

void PureCavityState::validate() const {
    if (r.size() != theta.size()) throw ArgumentError("PureCavityState: r/theta size mismatch");
    double tot = 0.0;
    for (double rn : r) {
        if (rn < 0.0) throw ArgumentError("PureCavityState: r_n must be >= 0");
        tot += rn * rn;
    }
    if (std::abs(tot - 1.0) > 1e-10)
        throw ArgumentError("PureCavityState: sum r_n^2 = " + std::to_string(tot) + " != 1");
}

double default_probe_time(double kappa, long n_max) {
    return 0.8 / (kappa * std::sqrt(static_cast<double>(std::max<long>(n_max, 1))));
}

// ---- forward models ---------------------------------------------------------

void jc_apply(Vec& joint, long cavity_dim, long n_atoms, long atom_slot, double t,
              double kappa) {
    // flat index: cavity index n times 2^n_atoms plus atom bits, atom 0 first
    const long atom_dim = 1L << n_atoms;
    const long bit = 1L << (n_atoms - 1 - atom_slot);
    for (long n = 0; n + 1 < cavity_dim; ++n) {
        const double om = kappa * std::sqrt(static_cast<double>(n + 1));
        const double c = std::cos(om * t), s = std::sin(om * t);
        for (long rest = 0; rest < atom_dim; ++rest) {
            if ((rest & bit) == 0) continue; // enumerate atom-excited members once
            const long idx_e = n * atom_dim + rest;              // |n, e>
            const long idx_g = (n + 1) * atom_dim + (rest ^ bit); // |n+1, g>
            const cplx ae = joint(idx_e), ag = joint(idx_g);
            joint(idx_e) = c * ae - I * s * ag;
            joint(idx_g) = c * ag - I * s * ae;
        }
    }
}

StateVector jc_joint_state(const PureCavityState& state, double phi, double t, double kappa) {
    state.validate();
    const long d = state.dim();
    const long nmax = highest_occupied([&] {
        std::vector<double> P(d);
        for (long n = 0; n < d; ++n) P[n] = state.P(n);
        return P;
    }(), bool() ? 0 : 1e-14);
    if (nmax > d - 3)
        throw ConfigError("jc_joint_state: need >= 2 empty cavity levels of headroom");
    Basis joint_basis = Basis::tensor(Basis::fock(d, "cavity"), Basis::fock(2, "atom1"));
    Vec cav = state.amps();
    Vec atom(2);
    atom << 1.0 / std::sqrt(2.0), std::exp(I * phi) / std::sqrt(2.0);
    Vec joint = kron(cav, atom);
    jc_apply(joint, d, 1, 0, t, kappa);
    return {joint_basis, joint};
}

SingleAtomProbs single_atom_probs(const PureCavityState& state, double phi, double t,
                                  double kappa) {
    state.validate();
    auto A = one_atom_amps(state.r, t, kappa, phi);
    const long d = state.dim();
    SingleAtomProbs out;
    out.qg.resize(d);
    out.qe.resize(d);
    for (long n = 0; n < d; ++n) {
        out.qg[n] = eval_amp_prob(A[n][0], state.theta);
        out.qe[n] = eval_amp_prob(A[n][1], state.theta);
    }
    return out;
}

std::vector<double> total_probs(const PureCavityState& state, double phi, double t,
                                double kappa) {
    auto p = single_atom_probs(state, phi, t, kappa);
    std::vector<double> q(p.qg.size());
    for (size_t n = 0; n < q.size(); ++n) q[n] = p.qg[n] + p.qe[n];
    return q;
}

TwoAtomProbs two_atom_probs(const PureCavityState& state, double phi, double t, double s,
                            double kappa) {
    state.validate();
    const long d = state.dim();
    {
        long nmax = -1;
        for (long n = 0; n < d; ++n)
            if (state.P(n) > 1e-14) nmax = n;
        if (nmax > d - 4)
            throw ConfigError("two_atom_probs: need >= 3 empty cavity levels of headroom");
    }
    auto A = two_atom_amps(state.r, t, s, kappa, phi);
    TwoAtomProbs out;
    out.qgg.resize(d);
    out.qge.resize(d);
    out.qeg.resize(d);
    out.qee.resize(d);
    for (long n = 0; n < d; ++n) {
        out.qgg[n] = eval_amp_prob(A[n][0], state.theta);
        out.qge[n] = eval_amp_prob(A[n][1], state.theta);
        out.qeg[n] = eval_amp_prob(A[n][2], state.theta);
        out.qee[n] = eval_amp_prob(A[n][3], state.theta);
    }
    return out;
}

// ---- printed formulas -------------------------------------------------------

namespace {

struct Trig {
    double kappa;
    double time;
    // cos/sin of Omega_j * time with Omega_j = kappa sqrt(j+1); j = -1 gives
    // Omega = 0 (cos 1, sin 0), used by the n = 0 corner formulas
    double G(long j) const {
        return std::cos(kappa * std::sqrt(static_cast<double>(j + 1)) * time);
    }
    double U(long j) const {
        return std::sin(kappa * std::sqrt(static_cast<double>(j + 1)) * time);
    }
    double G2(long j) const { return G(j) * G(j); }
    double U2(long j) const { return U(j) * U(j); }
};

double getP(const std::vector<double>& P, long n) {
    return (n >= 0 && n < static_cast<long>(P.size())) ? P[n] : 0.0;
}
double getTh(const std::vector<double>& th, long n) {
    return (n >= 0 && n < static_cast<long>(th.size())) ? th[n] : 0.0;
}

} // namespace

double printed_Qe(const std::vector<double>& P, const std::vector<double>& th, long n,
                  double t, double kappa, double phi) {
    Trig T{kappa, t};
    const double dth_np1 = getTh(th, n + 1) - getTh(th, n);
    return getP(P, n) * T.G2(n) + getP(P, n + 1) * T.U2(n) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * T.G(n) * T.U(n) *
               std::sin(dth_np1 - phi);
}

double printed_Qg(const std::vector<double>& P, const std::vector<double>& th, long n,
                  double t, double kappa, double phi) {
    if (n == 0) return getP(P, 0);
    Trig T{kappa, t};
    const double dth_n = getTh(th, n) - getTh(th, n - 1);
    return getP(P, n) * T.G2(n - 1) + getP(P, n - 1) * T.U2(n - 1) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * T.U(n - 1) * T.G(n - 1) *
               std::sin(dth_n - phi);
}

double printed_Qtotal(const std::vector<double>& P, const std::vector<double>& th, long n,
                      double t, double kappa, double phi) {
    Trig T{kappa, t};
    if (n == 0) {
        const double dth1 = getTh(th, 1) - getTh(th, 0);
        return getP(P, 0) * (1.0 + T.G2(0)) + getP(P, 1) * T.U2(0) +
               2.0 * std::sqrt(getP(P, 0) * getP(P, 1)) * T.G(0) * T.U(0) *
                   std::sin(dth1 - phi);
    }
    const double dth_n = getTh(th, n) - getTh(th, n - 1);
    const double dth_np1 = getTh(th, n + 1) - getTh(th, n);
    return getP(P, n) * (T.G2(n) + T.G2(n - 1)) + getP(P, n + 1) * T.U2(n) +
           getP(P, n - 1) * T.U2(n - 1) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * T.G(n) * T.U(n) *
               std::sin(dth_np1 - phi) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * T.U(n - 1) * T.G(n - 1) *
               std::sin(dth_n - phi);
}

double printed_Qgg(const std::vector<double>& P, const std::vector<double>& th, long n,
                   double t, double s, double kappa, double phi) {
    Trig Tt{kappa, t}, Ts{kappa, s};
    if (n == 0) return getP(P, 0);
    if (n == 1) {
        const double d1 = getTh(th, 1) - getTh(th, 0);
        return getP(P, 0) * (Ts.U2(0) + Tt.U2(0) * Ts.G2(0) +
                             2.0 * Ts.G(0) * Ts.U(0) * Tt.U(0) * std::cos(phi)) +
               getP(P, 1) * Ts.G2(0) * Tt.G2(0) -
               2.0 * std::sqrt(getP(P, 0) * getP(P, 1)) * Ts.G(0) * Ts.U(0) * Tt.G(0) *
                   std::sin(d1) +
               2.0 * std::sqrt(getP(P, 0) * getP(P, 1)) * Ts.G2(0) * Tt.G(0) * Tt.U(0) *
                   std::sin(d1 - phi);
    }
    const double dth_n = getTh(th, n) - getTh(th, n - 1);
    const double dth_nm1 = getTh(th, n - 1) - getTh(th, n - 2);
    const double dtil_n = getTh(th, n) - getTh(th, n - 2);
    return getP(P, n) * Tt.G2(n - 1) * Ts.G2(n - 1) +
           getP(P, n - 2) * Ts.G2(n - 1) * Ts.G2(n) + // as printed
           getP(P, n - 1) *
               (Ts.G2(n - 1) * Tt.U2(n - 1) + Tt.G2(n - 2) +
                2.0 * Ts.G(n - 1) * Ts.U(n - 1) * Tt.G(n - 2) * Tt.U(n - 1) * std::cos(phi)) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * Ts.G2(n - 1) * Tt.G(n - 1) *
               Tt.U(n - 1) * std::sin(dth_n - phi) -
           2.0 * std::sqrt(getP(P, n - 1) * getP(P, n - 2)) * Tt.G(n - 2) * Tt.U(n) *
               std::sin(dth_nm1 - phi) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * Ts.G(n - 1) * Ts.U(n - 1) *
               Tt.G(n - 1) * Tt.G(n - 2) * std::sin(dth_n) -
           2.0 * std::sqrt(getP(P, n - 1) * getP(P, n - 2)) * Ts.G(n - 1) * Ts.U(n - 1) *
               Tt.U(n - 1) * Tt.U(n) * std::sin(dth_n) - // as printed (dth_n, not n-1)
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 2)) * Ts.G(n - 1) * Ts.U(n - 1) *
               Tt.G(n - 1) * Tt.U(n) * std::cos(dtil_n - phi);
}

double printed_Qge(const std::vector<double>& P, const std::vector<double>& th, long n,
                   double t, double s, double kappa, double phi) {
    Trig Tt{kappa, t}, Ts{kappa, s};
    if (n == 0) {
        const double d1 = getTh(th, 1) - getTh(th, 0);
        return getP(P, 0) * (Ts.G2(0) + Ts.U2(0) * Tt.U2(0) -
                             2.0 * Ts.G(0) * Ts.U(0) * Tt.U(0) * std::cos(phi)) +
               getP(P, 1) * Tt.G2(0) * Ts.U2(0) +
               2.0 * std::sqrt(getP(P, 0) * getP(P, 1)) * Ts.G(0) * Ts.U(0) * std::sin(d1) -
               2.0 * std::sqrt(getP(P, 0) * getP(P, 1)) * Tt.G(0) * Tt.U(0) *
                   std::sin(d1 - phi);
    }
    const double dth_n = getTh(th, n) - getTh(th, n - 1);
    const double dth_np1 = getTh(th, n + 1) - getTh(th, n);
    const double dtil_np1 = getTh(th, n + 1) - getTh(th, n - 1);
    return getP(P, n - 1) * Ts.G2(n) * Tt.U2(n + 1) + getP(P, n + 1) * Ts.U2(n) * Tt.G2(n) +
           getP(P, n) * (Ts.G2(n) * Tt.G2(n - 1) + Ts.U2(n) * Tt.U2(n) -
                         2.0 * Ts.G(n) * Ts.U(n) * Tt.G(n - 1) * Tt.U(n) * std::cos(phi)) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * Ts.G2(n) * Tt.G(n - 1) *
               Tt.U(n + 1) * std::sin(dth_n - phi) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * Ts.U2(n) * Tt.G(n) * Tt.U(n) *
               std::sin(dth_np1 - phi) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * Ts.G(n) * Ts.U(n) * Tt.G(n - 1) *
               Tt.G(n) * std::sin(dth_np1) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * Ts.G(n) * Ts.U(n) * Tt.U(n + 1) *
               Tt.U(n) * std::sin(dth_n) +
           2.0 * std::sqrt(getP(P, n + 1) * getP(P, n - 1)) * Ts.G(n) * Ts.U(n) * Tt.U(n + 1) *
               Tt.G(n) * std::cos(dtil_np1 - phi);
}

double printed_Qeg(const std::vector<double>& P, const std::vector<double>& th, long n,
                   double t, double s, double kappa, double phi) {
    Trig Tt{kappa, t}, Ts{kappa, s};
    if (n == 0) {
        // as printed: no factor 2, no phase dependence
        return getP(P, 0) * Tt.G2(0) + getP(P, 1) * Tt.U2(0) +
               std::sqrt(getP(P, 0) * getP(P, 1)) * Tt.G(0) * Tt.U(0);
    }
    const double dth_n = getTh(th, n) - getTh(th, n - 1);
    const double dth_np1 = getTh(th, n + 1) - getTh(th, n);
    const double dtil_np1 = getTh(th, n + 1) - getTh(th, n - 1);
    return getP(P, n - 1) * Ts.U2(n - 1) * Tt.G2(n - 1) +
           getP(P, n + 1) * Ts.G2(n - 1) * Tt.U2(n) +
           getP(P, n) *
               (Ts.G2(n - 1) * Tt.G2(n) + Ts.U2(n - 1) * Tt.U2(n - 1) -
                2.0 * Ts.G(n - 1) * Ts.U(n - 1) * Tt.G(n) * Tt.U(n - 1) * std::cos(phi)) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * Ts.G2(n - 1) * Tt.G(n) * Tt.U(n) *
               std::sin(dth_np1 - phi) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * Ts.U2(n - 1) * Tt.G(n - 1) *
               Tt.U(n - 1) * std::sin(dth_n - phi) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n - 1)) * Ts.G(n - 1) * Ts.U(n - 1) *
               Tt.G2(n) * std::sin(dth_n) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * Ts.G(n - 1) * Ts.U(n - 1) * Tt.U(n) *
               Tt.U(n - 1) * std::sin(dth_np1) +
           2.0 * std::sqrt(getP(P, n - 1) * getP(P, n + 1)) * Ts.G(n - 1) * Ts.U(n - 1) *
               Tt.G(n - 1) * Tt.U(n) * std::sin(dtil_np1 - phi); // as printed: sin
}

double printed_Qee(const std::vector<double>& P, const std::vector<double>& th, long n,
                   double t, double s, double kappa, double phi) {
    Trig Tt{kappa, t}, Ts{kappa, s};
    const double dth_np1 = getTh(th, n + 1) - getTh(th, n);
    const double dth_np2 = getTh(th, n + 2) - getTh(th, n + 1);
    const double dtil_np2 = getTh(th, n + 2) - getTh(th, n);
    return getP(P, n) * Ts.G2(n) * Tt.G2(n) + getP(P, n + 2) * Ts.U2(n) * Tt.U2(n + 1) +
           getP(P, n + 1) *
               (Ts.G2(n) * Tt.U2(n) + Ts.U2(n) * Tt.G2(n + 1) +
                2.0 * Ts.G(n) * Ts.U(n) * Tt.G(n + 1) * Tt.U(n) * std::cos(phi)) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * Ts.G2(n) * Tt.G(n) * Tt.U(n) *
               std::sin(dth_np1 - phi) +
           2.0 * std::sqrt(getP(P, n + 1) * getP(P, n + 2)) * Ts.U2(n) * Tt.G(n + 1) *
               Tt.U(n + 1) * std::sin(dth_np2 - phi) +
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 1)) * Ts.G(n) * Ts.U(n) * Tt.G(n) *
               Tt.G(n + 1) * std::sin(dth_np1) +
           2.0 * std::sqrt(getP(P, n + 1) * getP(P, n + 2)) * Ts.G(n) * Ts.U(n) * Tt.U(n) *
               Tt.U(n + 1) * std::sin(dth_np2) -
           2.0 * std::sqrt(getP(P, n) * getP(P, n + 2)) * Ts.G(n) * Ts.U(n) * Tt.G(n) *
               Tt.U(n + 1) * std::cos(dtil_np2 - phi);
}

long FormulaAuditReport::n_mismatched() const {
    long n = 0;
    for (const auto& e : entries)
        if (e.mismatch) ++n;
    return n;
}

std::string FormulaAuditReport::summary() const {
    std::ostringstream os;
    os << "formula audit over " << n_states << " random states: " << entries.size()
       << " formulas, " << n_mismatched() << " mismatched vs the joint-state oracle\n";
    for (const auto& e : entries)
        os << "  " << (e.mismatch ? "MISMATCH " : "ok       ") << e.formula
           << "  max|err| = " << e.max_abs_error << "\n";
    return os.str();
}

FormulaAuditReport audit_printed_formulas(long n_states, uint64_t seed) {
    FormulaAuditReport rep;
    rep.n_states = n_states;
    // formula classes; two-atom entries compare printed/4, one-atom printed/2
    enum Class {
        Qe_cls, Qg0, Qgn, Qt0, Qtn, Qgg0, Qgg1, Qggn, Qge0, Qgen, Qeg0, Qegn, Qeen, N_CLS
    };
    const char* names[N_CLS] = {
        "one-atom Q_n^e (all n)",  "one-atom Q_0^g",          "one-atom Q_n^g (n>=1)",
        "no-atom total Q_0",       "no-atom total Q_n (n>=1)", "two-atom Q_0^gg",
        "two-atom Q_1^gg",         "two-atom Q_n^gg (n>=2)",   "two-atom Q_0^ge",
        "two-atom Q_n^ge (n>=1)",  "two-atom Q_0^eg",          "two-atom Q_n^eg (n>=1)",
        "two-atom Q_n^ee (all n)"};
    rep.entries.resize(N_CLS);
    for (int c = 0; c < N_CLS; ++c) rep.entries[c].formula = names[c];

    RngStream rng(seed, 0);
    for (long trial = 0; trial < n_states; ++trial) {
        const long occ = 4 + static_cast<long>(rng.uniform01() * 7); // occupied levels <= 10
        const long d = occ + 4;
        PureCavityState st;
        st.r.assign(d, 0.0);
        st.theta.assign(d, 0.0);
        double tot = 0.0;
        for (long n = 0; n < occ; ++n) {
            st.r[n] = 0.05 + rng.uniform01();
            tot += st.r[n] * st.r[n];
            st.theta[n] = n == 0 ? 0.0 : 2.0 * M_PI * (rng.uniform01() - 0.5);
        }
        for (long n = 0; n < occ; ++n) st.r[n] /= std::sqrt(tot);
        std::vector<double> P(d);
        for (long n = 0; n < d; ++n) P[n] = st.P(n);

        const double t = 0.3 + 0.5 * rng.uniform01();
        const double s = 0.3 + 0.5 * rng.uniform01();
        const double kappa = 1.0;
        const double phi = (trial % 3 == 0) ? 0.0 : (trial % 3 == 1 ? M_PI / 2 : 1.1);

        auto track = [&](Class c, double printed, double exact, double scale) {
            const double err = std::abs(printed / scale - exact);
            rep.entries[c].max_abs_error = std::max(rep.entries[c].max_abs_error, err);
        };

        auto sp = single_atom_probs(st, phi, t, kappa);
        auto tp = total_probs(st, phi, t, kappa);
        auto tw = two_atom_probs(st, phi, t, s, kappa);
        for (long n = 0; n < d - 4; ++n) {
            track(Qe_cls, printed_Qe(P, st.theta, n, t, kappa, phi), sp.qe[n], 2.0);
            track(n == 0 ? Qg0 : Qgn, printed_Qg(P, st.theta, n, t, kappa, phi), sp.qg[n], 2.0);
            track(n == 0 ? Qt0 : Qtn, printed_Qtotal(P, st.theta, n, t, kappa, phi), tp[n],
                  2.0);
            track(n == 0 ? Qgg0 : (n == 1 ? Qgg1 : Qggn),
                  printed_Qgg(P, st.theta, n, t, s, kappa, phi), tw.qgg[n], 4.0);
            track(n == 0 ? Qge0 : Qgen, printed_Qge(P, st.theta, n, t, s, kappa, phi),
                  tw.qge[n], 4.0);
            track(n == 0 ? Qeg0 : Qegn, printed_Qeg(P, st.theta, n, t, s, kappa, phi),
                  tw.qeg[n], 4.0);
            track(Qeen, printed_Qee(P, st.theta, n, t, s, kappa, phi), tw.qee[n], 4.0);
        }
    }
    for (auto& e : rep.entries) e.mismatch = e.max_abs_error > 1e-9;
    return rep;
}

// ---- inversion --------------------------------------------------------------

namespace {

constexpr double kExactZeroThreshold = 1e-10;
constexpr double kTrigGuard = 0.05; // |Gamma_n Upsilon_n| guard

double zero_threshold(long n_shots) {
    return n_shots > 0 ? 0.5 / static_cast<double>(n_shots) : kExactZeroThreshold;
}

void check_no_interior_zero(const std::vector<double>& P, double thr) {
    const long nmax = highest_occupied(P, thr);
    for (long n = 0; n < nmax; ++n)
        if (P[n] <= thr)
            throw NoZeroSupport("P_" + std::to_string(n) +
                                " vanishes inside the occupied range; the one-atom scheme "
                                "cannot bridge it");
}

void check_no_adjacent_zeros(const std::vector<double>& P, double thr) {
    const long nmax = highest_occupied(P, thr);
    for (long n = 0; n + 1 < nmax; ++n)
        if (P[n] <= thr && P[n + 1] <= thr)
            throw AdjacentZeros("P_" + std::to_string(n) + " and P_" + std::to_string(n + 1) +
                                " are both zero; the two-atom scheme cannot bridge "
                                "adjacent zeros");
}

double clamp_pm1(double x) { return std::max(-1.0, std::min(1.0, x)); }

} // namespace

std::vector<double> invert_single_atom(const std::vector<double>& P,
                                       const std::vector<double>& q_phi0,
                                       const std::vector<double>& q_phi90, Family family,
                                       double t, double kappa) {
    if (family != Family::g && family != Family::e)
        throw ArgumentError("invert_single_atom: family must be g or e");
    const double thr = kExactZeroThreshold;
    check_no_interior_zero(P, thr);
    const long nmax = highest_occupied(P, thr);
    Trig T{kappa, t};
    std::vector<double> dtheta(std::max<long>(nmax + 1, 1), 0.0);
    for (long n = 1; n <= nmax; ++n) {
        const double gu = T.G(n - 1) * T.U(n - 1);
        if (std::abs(gu) < kTrigGuard)
            throw DivisionGuard("invert_single_atom: Gamma_" + std::to_string(n - 1) +
                                " Upsilon_" + std::to_string(n - 1) +
                                " too close to zero; choose a different probe time");
        const double den = 2.0 * std::sqrt(P[n] * P[n - 1]) * gu;
        auto sin_from = [&](const std::vector<double>& q) {
            if (family == Family::g) {
                // printed Q^g = 2 q^g
                return (P[n] * T.G2(n - 1) + P[n - 1] * T.U2(n - 1) - 2.0 * q[n]) / den;
            }
            return (2.0 * q[n - 1] - P[n - 1] * T.G2(n - 1) - P[n] * T.U2(n - 1)) / den;
        };
        const double s0 = clamp_pm1(sin_from(q_phi0));
        const double s90 = clamp_pm1(sin_from(q_phi90)); // sin(d - pi/2) = -cos(d)
        dtheta[n] = std::atan2(s0, -s90);
    }
    return dtheta;
}

RecursionResult recursion_no_atom_measurement(const std::vector<double>& P,
                                              const std::vector<double>& q_phi0,
                                              const std::vector<double>& q_phi90, double t,
                                              double kappa) {
    const double thr = kExactZeroThreshold;
    check_no_interior_zero(P, thr);
    const long nmax = highest_occupied(P, thr);
    Trig T{kappa, t};
    RecursionResult out;
    out.dtheta.assign(std::max<long>(nmax + 1, 1), 0.0);
    out.amplification.assign(out.dtheta.size(), 0.0);
    if (nmax < 1) return out;

    // seed and recursion, run separately for the two phase settings
    auto run = [&](const std::vector<double>& q, std::vector<double>& sins) {
        sins.assign(nmax + 1, 0.0);
        double den = 2.0 * std::sqrt(P[0] * P[1]) * T.G(0) * T.U(0);
        if (std::abs(T.G(0) * T.U(0)) < kTrigGuard)
            throw DivisionGuard("recursion: Gamma_0 Upsilon_0 too small");
        sins[1] = clamp_pm1((2.0 * q[0] - P[0] * (1.0 + T.G2(0)) - P[1] * T.U2(0)) / den);
        out.amplification[1] = std::abs(1.0 / den);
        for (long n = 1; n < nmax; ++n) {
            const double gu = T.G(n) * T.U(n);
            if (std::abs(gu) < kTrigGuard)
                throw DivisionGuard("recursion: Gamma_" + std::to_string(n) + " Upsilon_" +
                                    std::to_string(n) + " too small");
            const double den_n = 2.0 * std::sqrt(P[n] * P[n + 1]) * gu;
            const double carry =
                std::sqrt(P[n - 1] / P[n + 1]) * (T.G(n - 1) * T.U(n - 1)) / gu;
            sins[n + 1] = clamp_pm1(
                (2.0 * q[n] - P[n] * (T.G2(n) + T.G2(n - 1)) - P[n + 1] * T.U2(n) -
                 P[n - 1] * T.U2(n - 1)) /
                    den_n +
                carry * sins[n]);
            out.amplification[n + 1] = std::abs(1.0 / den_n) +
                                       std::abs(carry) * out.amplification[n];
        }
    };
    std::vector<double> s0, s90;
    run(q_phi0, s0);
    run(q_phi90, s90);
    for (long n = 1; n <= nmax; ++n) out.dtheta[n] = std::atan2(s0[n], -s90[n]);
    return out;
}

namespace {

// Recursive least-squares phase recovery shared by the two-atom schemes.
// Returns per-n phase differences: delta1[n] = theta_n - theta_{n-1} (NaN if
// unavailable) and delta2[n] = theta_n - theta_{n-2}.
struct TwoAtomSolution {
    std::vector<double> delta1, delta2;
    std::vector<double> stderr1, stderr2;
};

TwoAtomSolution solve_two_atom(const ReconstructionInput& in) {
    const double thr = zero_threshold(in.n_shots);
    check_no_adjacent_zeros(in.P, thr);
    const long nmax = highest_occupied(in.P, thr);
    if (nmax < 0) throw ConfigError("solve_two_atom: empty photon distribution");
    const long d = static_cast<long>(in.P.size());

    // locate the four families at phi = 0 and pi/2
    auto find = [&](Family f, double phi) -> const std::vector<double>* {
        for (const auto& ds : in.datasets)
            if (ds.family == f && std::abs(ds.phi - phi) < 1e-9) return &ds.q;
        return nullptr;
    };
    const Family fams[4] = {Family::gg, Family::ge, Family::eg, Family::ee};
    const std::vector<double>* data[4][2];
    for (int f = 0; f < 4; ++f) {
        data[f][0] = find(fams[f], 0.0);
        data[f][1] = find(fams[f], M_PI / 2);
        if (!data[f][0] || !data[f][1])
            throw ConfigError("solve_two_atom: missing " + to_string(fams[f]) +
                              " dataset at phi = 0 or pi/2 (completeness)");
    }

    std::vector<double> r(d);
    for (long n = 0; n < d; ++n) r[n] = in.P[n] > thr ? std::sqrt(in.P[n]) : 0.0;

    // affine models of every outcome at the two phases
    std::vector<std::array<PhaseAmp, 4>> amps0 = two_atom_amps(r, in.t, in.s, in.kappa, 0.0);
    std::vector<std::array<PhaseAmp, 4>> amps90 =
        two_atom_amps(r, in.t, in.s, in.kappa, M_PI / 2);

    TwoAtomSolution sol;
    sol.delta1.assign(d, std::numeric_limits<double>::quiet_NaN());
    sol.delta2.assign(d, std::numeric_limits<double>::quiet_NaN());
    sol.stderr1.assign(d, 0.0);
    sol.stderr2.assign(d, 0.0);

    // cos/sin of solved pairs, keyed by (hi, lo)
    std::map<std::pair<long, long>, std::pair<double, double>> known;

    for (long n = 1; n <= nmax; ++n) {
        if (in.P[n] <= thr) continue;
        std::vector<std::pair<long, long>> unknowns;
        if (in.P[n - 1] > thr) unknowns.push_back({n, n - 1});
        if (n >= 2 && in.P[n - 2] > thr) unknowns.push_back({n, n - 2});
        if (unknowns.empty()) continue;

        // collect equations whose pairs involve an unknown and nothing above n
        std::vector<Eigen::VectorXd> rows;
        std::vector<double> rhs;
        for (int f = 0; f < 4; ++f)
            for (int ph = 0; ph < 2; ++ph) {
                const auto& amps = ph == 0 ? amps0 : amps90;
                const auto& q = *data[f][ph];
                for (long j = 0; j < d && j < static_cast<long>(q.size()); ++j) {
                    AffineProb ap = affine_from_amp(amps[j][f]);
                    bool has_unknown = false, has_future = false;
                    for (const auto& pr : ap.pairs) {
                        if (pr.hi > n) has_future = true;
                        for (const auto& u : unknowns)
                            if (pr.hi == u.first && pr.lo == u.second) has_unknown = true;
                    }
                    if (!has_unknown || has_future) continue;
                    Eigen::VectorXd row = Eigen::VectorXd::Zero(2 * unknowns.size());
                    double b = q[j] - ap.constant;
                    for (const auto& pr : ap.pairs) {
                        bool is_unknown = false;
                        for (size_t u = 0; u < unknowns.size(); ++u)
                            if (pr.hi == unknowns[u].first && pr.lo == unknowns[u].second) {
                                row(2 * u) += 2.0 * pr.C.real();
                                row(2 * u + 1) += -2.0 * pr.C.imag();
                                is_unknown = true;
                            }
                        if (!is_unknown) {
                            auto it = known.find({pr.hi, pr.lo});
                            if (it == known.end())
                                throw NumericalError("solve_two_atom: pair (" +
                                                     std::to_string(pr.hi) + "," +
                                                     std::to_string(pr.lo) +
                                                     ") needed before it was solved");
                            b -= 2.0 * (pr.C.real() * it->second.first -
                                        pr.C.imag() * it->second.second);
                        }
                    }
                    rows.push_back(row);
                    rhs.push_back(b);
                }
            }
        if (rows.size() < 2 * unknowns.size())
            throw ConfigError("solve_two_atom: not enough equations at n = " +
                              std::to_string(n));
        Eigen::MatrixXd Amat(rows.size(), 2 * unknowns.size());
        Eigen::VectorXd bvec(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            Amat.row(i) = rows[i];
            bvec(i) = rhs[i];
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Amat,
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smax = svd.singularValues()(0);
        const double smin = svd.singularValues()(svd.singularValues().size() - 1);
        if (!(smin > 0.0) || smax / smin > 1e8)
            throw IllConditioned("solve_two_atom: inversion at n = " + std::to_string(n) +
                                 " is ill conditioned (cond > 1e8); change the probe time t");
        Eigen::VectorXd x = svd.solve(bvec);
        // crude error bars: unit-diagonal of the pseudoinverse scale
        Eigen::VectorXd resid = Amat * x - bvec;
        const double sigma =
            rows.size() > 2 * unknowns.size()
                ? std::sqrt(resid.squaredNorm() / (rows.size() - 2 * unknowns.size()))
                : 0.0;
        for (size_t u = 0; u < unknowns.size(); ++u) {
            const double c = x(2 * u), s = x(2 * u + 1);
            known[unknowns[u]] = {c, s};
            const double delta = std::atan2(s, c);
            const double amp = std::max(1e-12, std::hypot(c, s));
            const double db = sigma / (amp * smin); // rough propagated bar
            if (unknowns[u].second == n - 1) {
                sol.delta1[n] = delta;
                sol.stderr1[n] = db;
            } else {
                sol.delta2[n] = delta;
                sol.stderr2[n] = db;
            }
        }
    }
    return sol;
}

} // namespace

std::vector<double> invert_two_atom_even(const ReconstructionInput& in) {
    const double thr = zero_threshold(in.n_shots);
    const long nmax = highest_occupied(in.P, thr);
    for (long n = 1; n <= nmax; n += 2)
        if (in.P[n] > thr)
            throw ConfigError("invert_two_atom_even: odd-n probability P_" +
                              std::to_string(n) + " is nonzero; not an even-branch state");
    TwoAtomSolution sol = solve_two_atom(in);
    std::vector<double> dtil(in.P.size(), 0.0);
    for (size_t n = 2; n < dtil.size(); n += 2)
        if (!std::isnan(sol.delta2[n])) dtil[n] = sol.delta2[n];
    return dtil;
}

std::vector<double> invert_two_atom_general(const ReconstructionInput& in) {
    TwoAtomSolution sol = solve_two_atom(in);
    const double thr = zero_threshold(in.n_shots);
    std::vector<double> theta(in.P.size(), 0.0);
    for (size_t n = 1; n < theta.size(); ++n) {
        if (in.P[n] <= thr) {
            theta[n] = 0.0;
        } else if (!std::isnan(sol.delta1[n])) {
            theta[n] = theta[n - 1] + sol.delta1[n];
        } else if (n >= 2 && !std::isnan(sol.delta2[n])) {
            theta[n] = theta[n - 2] + sol.delta2[n];
        }
    }
    return theta;
}

std::vector<double> sample_counts(const std::vector<double>& dist, long n_shots,
                                  RngStream& rng) {
    if (n_shots < 1) throw ArgumentError("sample_counts: n_shots must be >= 1");
    std::vector<double> cdf(dist.size());
    double acc = 0.0;
    for (size_t k = 0; k < dist.size(); ++k) {
        acc += std::max(0.0, dist[k]);
        cdf[k] = acc;
    }
    std::vector<long> counts(dist.size(), 0);
    for (long s = 0; s < n_shots; ++s) {
        const double u = rng.uniform01() * acc;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        ++counts[std::min<size_t>(dist.size() - 1, it - cdf.begin())];
    }
    std::vector<double> freq(dist.size());
    for (size_t k = 0; k < dist.size(); ++k)
        freq[k] = static_cast<double>(counts[k]) / static_cast<double>(n_shots);
    return freq;
}

std::string to_string(Family f) {
    switch (f) {
        case Family::g: return "g";
        case Family::e: return "e";
        case Family::total: return "total";
        case Family::gg: return "gg";
        case Family::ge: return "ge";
        case Family::eg: return "eg";
        case Family::ee: return "ee";
    }
    return "?";
}

ReconstructionInput make_input(const PureCavityState& state, SchemeKind scheme, double kappa,
                               double t, double s, long n_shots, uint64_t seed) {
    state.validate();
    ReconstructionInput in;
    in.kappa = kappa;
    in.t = t;
    in.s = s;
    in.n_shots = n_shots;
    const long d = state.dim();
    in.P.resize(d);
    for (long n = 0; n < d; ++n) in.P[n] = state.P(n);

    uint64_t stream = 1;
    auto maybe_sample = [&](std::vector<double> q) {
        if (n_shots > 0) {
            RngStream rng(seed, stream++);
            return sample_counts(q, n_shots, rng);
        }
        return q;
    };
    if (n_shots > 0) {
        RngStream rng(seed, 0);
        in.P = sample_counts(in.P, n_shots, rng);
    }

    for (double phi : {0.0, M_PI / 2}) {
        if (scheme == SchemeKind::one_atom) {
            auto p = single_atom_probs(state, phi, t, kappa);
            in.datasets.push_back({phi, Family::g, maybe_sample(p.qg)});
            in.datasets.push_back({phi, Family::e, maybe_sample(p.qe)});
        } else if (scheme == SchemeKind::one_atom_total) {
            in.datasets.push_back({phi, Family::total,
                                   maybe_sample(total_probs(state, phi, t, kappa))});
        } else {
            auto p = two_atom_probs(state, phi, t, s, kappa);
            in.datasets.push_back({phi, Family::gg, maybe_sample(p.qgg)});
            in.datasets.push_back({phi, Family::ge, maybe_sample(p.qge)});
            in.datasets.push_back({phi, Family::eg, maybe_sample(p.qeg)});
            in.datasets.push_back({phi, Family::ee, maybe_sample(p.qee)});
        }
    }
    return in;
}

ReconstructionResult reconstruct(const std::optional<PureCavityState>& truth,
                                 const ReconstructionInput& in, SchemeKind scheme) {
    ReconstructionResult out;
    const long d = static_cast<long>(in.P.size());
    const double thr = zero_threshold(in.n_shots);

    auto find = [&](Family f, double phi) -> const std::vector<double>* {
        for (const auto& ds : in.datasets)
            if (ds.family == f && std::abs(ds.phi - phi) < 1e-9) return &ds.q;
        return nullptr;
    };

    std::vector<double> theta(d, 0.0);
    if (scheme == SchemeKind::one_atom) {
        const std::vector<double>* g0 = find(Family::g, 0.0);
        const std::vector<double>* g90 = find(Family::g, M_PI / 2);
        const std::vector<double>* e0 = find(Family::e, 0.0);
        const std::vector<double>* e90 = find(Family::e, M_PI / 2);
        std::vector<double> dtheta;
        if (g0 && g90)
            dtheta = invert_single_atom(in.P, *g0, *g90, Family::g, in.t, in.kappa);
        else if (e0 && e90)
            dtheta = invert_single_atom(in.P, *e0, *e90, Family::e, in.t, in.kappa);
        else
            throw ConfigError("reconstruct: one-atom scheme needs a g or e family at both "
                              "phi = 0 and pi/2 (completeness)");
        for (size_t n = 1; n < dtheta.size(); ++n) theta[n] = theta[n - 1] + dtheta[n];
        out.diagnostics.push_back("one-atom inversion over " +
                                  std::to_string(dtheta.size() - 1) + " phase differences");
    } else if (scheme == SchemeKind::one_atom_total) {
        const std::vector<double>* q0 = find(Family::total, 0.0);
        const std::vector<double>* q90 = find(Family::total, M_PI / 2);
        if (!q0 || !q90)
            throw ConfigError("reconstruct: recursion scheme needs total datasets at phi = 0 "
                              "and pi/2 (completeness)");
        RecursionResult rec = recursion_no_atom_measurement(in.P, *q0, *q90, in.t, in.kappa);
        for (size_t n = 1; n < rec.dtheta.size(); ++n) theta[n] = theta[n - 1] + rec.dtheta[n];
        double amp_max = 0.0;
        for (double a : rec.amplification) amp_max = std::max(amp_max, a);
        out.diagnostics.push_back("recursion error amplification up to " +
                                  std::to_string(amp_max));
        if (in.n_shots > 0) {
            out.phase_stderr.resize(d, 0.0);
            for (size_t n = 0; n < rec.amplification.size() && n < static_cast<size_t>(d); ++n)
                out.phase_stderr[n] =
                    rec.amplification[n] / std::sqrt(static_cast<double>(in.n_shots));
        }
    } else {
        theta = invert_two_atom_general(in);
        out.diagnostics.push_back("two-atom recursive linear inversion");
    }

    out.estimate.r.resize(d);
    out.estimate.theta = theta;
    for (long n = 0; n < d; ++n)
        out.estimate.r[n] = in.P[n] > thr ? std::sqrt(in.P[n]) : 0.0;
    // renormalize (sampled P need not sum exactly to 1)
    double tot = 0.0;
    for (double rn : out.estimate.r) tot += rn * rn;
    for (auto& rn : out.estimate.r) rn /= std::sqrt(tot);
    if (out.phase_stderr.empty()) out.phase_stderr.assign(d, 0.0);

    if (truth) {
        Vec a = truth->amps();
        Vec b = out.estimate.amps();
        out.fidelity = fidelity(a, b);
    }
    return out;
}

} // namespace qtraj
