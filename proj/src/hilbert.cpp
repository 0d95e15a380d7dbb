#include "qtraj/hilbert.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace qtraj {

std::string Basis::describe() const {
    std::string out;
    for (size_t i = 0; i < factors.size(); ++i) {
        if (i) out += "(x)";
        out += factors[i].name + "[" + std::to_string(factors[i].dim) + "]";
    }
    return out;
}

std::pair<StateVector, double> normalize(const StateVector& s) {
    const double n = s.norm();
    if (n == 0.0) throw NumericalError("normalize: zero state");
    StateVector out = s;
    out.amps /= n;
    return {out, n};
}

DensityMatrix pure_density(const StateVector& s) {
    return DensityMatrix{s.basis, s.amps * s.amps.adjoint()};
}

MatrixOperator annihilation(long dim) {
    if (dim < 2) throw ArgumentError("annihilation: dim must be >= 2");
    Mat a = Mat::Zero(dim, dim);
    for (long n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return {a, "a"};
}

MatrixOperator creation(long dim) {
    MatrixOperator a = annihilation(dim);
    return {a.m.adjoint(), "adag"};
}

MatrixOperator number_op(long dim) {
    Mat n = Mat::Zero(dim, dim);
    for (long k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
    return {n, "N"};
}

StateVector coherent_state(cplx alpha, long dim) {
    if (dim < 1) throw ArgumentError("coherent_state: dim must be >= 1");
    Vec amps = Vec::Zero(dim);
    if (alpha == 0.0) {
        amps(0) = 1.0;
        return {Basis::fock(dim), amps};
    }
    // log-space ladder keeps the factorials finite
    const double a2 = std::norm(alpha);
    cplx log_amp = -0.5 * a2; // log of the n=0 amplitude
    const cplx log_alpha = std::log(alpha);
    double tail = 1.0;
    for (long n = 0; n < dim; ++n) {
        amps(n) = std::exp(log_amp);
        tail -= std::norm(amps(n));
        log_amp += log_alpha - 0.5 * std::log(static_cast<double>(n + 1));
    }
    if (tail > 1e-10)
        throw ConfigError("coherent_state: truncation too small (Poisson tail " +
                          std::to_string(tail) + ")");
    return {Basis::fock(dim), amps};
}

StateVector cat_state(cplx alpha, CatParity parity, long dim) {
    StateVector plus = coherent_state(alpha, dim);
    StateVector minus = coherent_state(-alpha, dim);
    const double sign = (parity == CatParity::even) ? 1.0 : -1.0;
    Vec amps = plus.amps + sign * minus.amps;
    const double a2 = std::norm(alpha);
    const double n2 = 2.0 * (1.0 + sign * std::exp(-2.0 * a2));
    amps /= std::sqrt(n2);
    return {Basis::fock(dim), amps};
}

std::pair<MatrixOperator, MatrixOperator> quadratures(long dim, double mass, double omega,
                                                      double hbar) {
    if (!(mass > 0.0) || !(omega > 0.0)) throw ArgumentError("quadratures: need m, omega > 0");
    Mat a = annihilation(dim).m;
    Mat ad = a.adjoint();
    Mat Q = std::sqrt(hbar / (2.0 * mass * omega)) * (a + ad);
    Mat P = I * std::sqrt(mass * hbar * omega / 2.0) * (ad - a);
    return {MatrixOperator{Q, "Q"}, MatrixOperator{P, "P"}};
}

cplx expectation(const Mat& op, const StateVector& s) {
    if (op.rows() != s.dim()) throw ArgumentError("expectation: dimension mismatch");
    const double n2 = s.norm2();
    if (n2 == 0.0) throw NumericalError("expectation: zero state");
    return (s.amps.adjoint() * op * s.amps)(0) / n2;
}

cplx expectation(const Mat& op, const DensityMatrix& r) {
    if (op.rows() != r.dim()) throw ArgumentError("expectation: dimension mismatch");
    const cplx tr = r.rho.trace();
    return (op * r.rho).trace() / tr;
}

double variance(const Mat& op, const StateVector& s) {
    const cplx m1 = expectation(op, s);
    const cplx m2 = expectation(Mat(op * op), s);
    return (m2 - m1 * m1).real();
}

double fidelity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ArgumentError("fidelity: dimension mismatch");
    const double na = a.squaredNorm(), nb = b.squaredNorm();
    if (na == 0.0 || nb == 0.0) throw NumericalError("fidelity: zero state");
    const cplx ov = (a.adjoint() * b)(0);
    return std::norm(ov) / (na * nb);
}

double fidelity(const StateVector& a, const StateVector& b) { return fidelity(a.amps, b.amps); }

Mat matrix_exp(const Mat& m, cplx scale) {
    if (m.rows() != m.cols()) throw ArgumentError("matrix_exp: not square");
    if (m.rows() > 512) throw ArgumentError("matrix_exp: dim > 512");
    Mat sm = scale * m;
    // max row sum bounds the spectral radius
    if (sm.cwiseAbs().rowwise().sum().maxCoeff() > 200.0)
        throw NumericalError("matrix_exp: ||scale*M|| > 200, overflow guard");
    return sm.exp();
}

MatrixOperator matrix_exp(const MatrixOperator& op, cplx scale) {
    return {matrix_exp(op.m, scale), "exp(" + op.label + ")"};
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Vec kron(const Vec& a, const Vec& b) {
    Vec out(a.size() * b.size());
    for (long i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

DensityMatrix partial_trace(const DensityMatrix& r, const std::vector<bool>& keep) {
    const auto& factors = r.basis.factors;
    if (keep.size() != factors.size())
        throw ArgumentError("partial_trace: keep mask size mismatch");
    // dims and strides of every factor in the flat row-major index
    const size_t nf = factors.size();
    std::vector<long> dims(nf), strides(nf);
    long stride = 1;
    for (size_t i = nf; i-- > 0;) {
        dims[i] = factors[i].dim;
        strides[i] = stride;
        stride *= dims[i];
    }
    Basis out_basis;
    long kept_dim = 1, traced_dim = 1;
    for (size_t i = 0; i < nf; ++i) {
        if (keep[i]) {
            out_basis.factors.push_back(factors[i]);
            kept_dim *= dims[i];
        } else {
            traced_dim *= dims[i];
        }
    }
    Mat out = Mat::Zero(kept_dim, kept_dim);
    // enumerate kept/traced multi-indices through mixed radix counters
    auto flat_index = [&](long kept_code, long traced_code) {
        long idx = 0;
        long kc = kept_code, tc = traced_code;
        for (size_t i = nf; i-- > 0;) {
            if (keep[i]) {
                idx += (kc % dims[i]) * strides[i];
                kc /= dims[i];
            } else {
                idx += (tc % dims[i]) * strides[i];
                tc /= dims[i];
            }
        }
        return idx;
    };
    for (long ki = 0; ki < kept_dim; ++ki)
        for (long kj = 0; kj < kept_dim; ++kj) {
            cplx acc = 0.0;
            for (long tc = 0; tc < traced_dim; ++tc)
                acc += r.rho(flat_index(ki, tc), flat_index(kj, tc));
            out(ki, kj) = acc;
        }
    return DensityMatrix{out_basis, out};
}

double fock_tail_population(const StateVector& s, long n_levels) {
    const double n2 = s.norm2();
    if (n2 == 0.0) return 0.0;
    double tail = 0.0;
    for (long k = std::max<long>(0, s.dim() - n_levels); k < s.dim(); ++k)
        tail += std::norm(s.amps(k));
    return tail / n2;
}

std::string state_to_json(const StateVector& s) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"labels\":\"" << s.basis.describe() << "\",\"dim\":" << s.dim() << ",\"amps\":[";
    for (long k = 0; k < s.dim(); ++k) {
        if (k) os << ",";
        os << "[" << s.amps(k).real() << "," << s.amps(k).imag() << "]";
    }
    os << "],\"norm\":" << s.norm() << "}";
    return os.str();
}

} // namespace qtraj
