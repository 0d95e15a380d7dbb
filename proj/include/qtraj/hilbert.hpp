#ifndef QTRAJ_HILBERT_HPP
#define QTRAJ_HILBERT_HPP

#include <string>
#include <utility>
#include <vector>

#include "qtraj/common.hpp"

namespace qtraj {

// Labeled tensor-product basis. Factors are listed left to right and the
// flat index is row-major in that order, so for cavity (x) atom the flat
// index is n*2 + s. The labels exist to keep cavity/atom indices straight
// in the reconstruction code.
struct Basis {
    struct Factor {
        std::string name;
        long dim;
    };
    std::vector<Factor> factors;

    long dim() const {
        long d = 1;
        for (const auto& f : factors) d *= f.dim;
        return d;
    }
    static Basis fock(long d, const std::string& name = "fock") { return Basis{{{name, d}}}; }
    static Basis tensor(const Basis& a, const Basis& b) {
        Basis out = a;
        out.factors.insert(out.factors.end(), b.factors.begin(), b.factors.end());
        return out;
    }
    std::string describe() const;
};

// State vector on a labeled basis. Unnormalized states are first-class:
// in the linear trajectory formulation the physical probability lives in
// the norm, so nothing here renormalizes implicitly.
struct StateVector {
    Basis basis;
    Vec amps;

    long dim() const { return amps.size(); }
    double norm2() const { return amps.squaredNorm(); }
    double norm() const { return amps.norm(); }
};

// Returns (normalized state, prior norm).
std::pair<StateVector, double> normalize(const StateVector& s);

struct DensityMatrix {
    Basis basis;
    Mat rho;

    long dim() const { return rho.rows(); }
    double trace() const { return rho.trace().real(); }
    double hermiticity_error() const { return (rho - rho.adjoint()).norm(); }
    void enforce_hermitian() { rho = 0.5 * (rho + rho.adjoint()); }
};

DensityMatrix pure_density(const StateVector& s);

struct MatrixOperator {
    Mat m;
    std::string label;

    long dim() const { return m.rows(); }
};

// a with a|n> = sqrt(n)|n-1>; requires dim >= 2
MatrixOperator annihilation(long dim);
MatrixOperator creation(long dim);
MatrixOperator number_op(long dim);

// |alpha> truncated to dim levels; requires the Poisson tail beyond dim to
// be below 1e-10
StateVector coherent_state(cplx alpha, long dim);

enum class CatParity { even, odd };

// normalized (|alpha> +- |-alpha>)/N
StateVector cat_state(cplx alpha, CatParity parity, long dim);

// Q = sqrt(hbar/2 m w)(a + a†), P = i sqrt(m hbar w / 2)(a† - a)
std::pair<MatrixOperator, MatrixOperator> quadratures(long dim, double mass, double omega,
                                                      double hbar = 1.0);

cplx expectation(const Mat& op, const StateVector& s);   // <psi|O|psi>/<psi|psi>
cplx expectation(const Mat& op, const DensityMatrix& r); // Tr[O rho]/Tr[rho]
double variance(const Mat& op, const StateVector& s);

// |<psi|phi>|^2 / (|psi|^2 |phi|^2)
double fidelity(const StateVector& a, const StateVector& b);
double fidelity(const Vec& a, const Vec& b);

// exp(scale*M), dense scaling-and-squaring; dim <= 512, |scale*M| <= 200
MatrixOperator matrix_exp(const MatrixOperator& op, cplx scale = 1.0);
Mat matrix_exp(const Mat& m, cplx scale = 1.0);

// Trace out a subset of factors; keep[i] = true keeps factor i.
DensityMatrix partial_trace(const DensityMatrix& r, const std::vector<bool>& keep);

Mat kron(const Mat& a, const Mat& b);
Vec kron(const Vec& a, const Vec& b);

// population in the top n_levels Fock levels, relative to the total norm
double fock_tail_population(const StateVector& s, long n_levels = 2);

// {labels, dim, amps:[[re,im],...], norm}
std::string state_to_json(const StateVector& s);

} // namespace qtraj

#endif
