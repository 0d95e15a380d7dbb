#include "qtraj/evolution_ops.hpp"

#include <cmath>

namespace qtraj {

Mat lqse_split(const Mat& Atilde, const Mat& B) {
    if (Atilde.rows() != B.rows() || Atilde.cols() != B.cols())
        throw ArgumentError("lqse_split: dimension mismatch");
    return Atilde - 0.5 * B * B;
}

Mat qnd_number_evolution(double omega, double k, double t, double W, long dim) {
    if (k < 0.0) throw ArgumentError("qnd_number_evolution: k must be >= 0");
    Mat v = Mat::Zero(dim, dim);
    const double sk = std::sqrt(2.0 * k);
    for (long n = 0; n < dim; ++n) {
        const double nn = static_cast<double>(n);
        const cplx ex = -I * omega * (nn + 0.5) * t - 2.0 * k * nn * nn * t + sk * nn * W;
        v(n, n) = std::exp(ex);
    }
    return v;
}

double qnd_vv_diag(double tau, double w_std, long n) {
    const double nn = static_cast<double>(n);
    return std::exp(-4.0 * tau * nn * nn + 2.0 * std::sqrt(2.0 * tau) * nn * w_std);
}

namespace {

// Measure-folded integrand of the average conditional uncertainty:
//   h(w) = sqrt( sum_{nm} n(n-m) rho_n rho_m V_n V_m ) e^{-w^2/2}/sqrt(2 pi).
// Folding the Gaussian inside the root turns every term into a bounded bump
// exp(log rho_n - (w - w_n)^2/2) with w_n = 2 sqrt(2 tau) n, so nothing can
// overflow even though the bare integrand grows like e^{w^2/2}. The true
// measure of the final states is this sum of per-n Gaussians.
double qnd_sigma_weighted(const std::vector<double>& log_rho, double tau, double w) {
    const size_t d = log_rho.size();
    const double c1 = 2.0 * std::sqrt(2.0 * tau);
    double lmax = -1e300;
    std::vector<double> ell(d);
    for (size_t n = 0; n < d; ++n) {
        const double wn = c1 * static_cast<double>(n);
        ell[n] = log_rho[n] - 0.5 * (w - wn) * (w - wn);
        lmax = std::max(lmax, ell[n]);
    }
    if (lmax < -700.0) return 0.0;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (size_t n = 0; n < d; ++n) {
        const double e = std::exp(ell[n] - lmax);
        const double nn = static_cast<double>(n);
        s0 += e;
        s1 += nn * e;
        s2 += nn * nn * e;
    }
    const double q = s2 * s0 - s1 * s1; // = sum n(n-m) e_n e_m >= 0
    if (q < -1e-12 * s0 * s0)
        throw NumericalError("qnd_average_uncertainty: negative variance form");
    return std::sqrt(std::max(0.0, q)) * std::exp(lmax) / std::sqrt(2.0 * M_PI);
}

} // namespace

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    // Golub-Welsch on the Hermite Jacobi matrix, b_k = sqrt(k/2)
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(0.5 * k);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int k = 0; k < n; ++k) {
        nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        weights[k] = sqrt_pi * v0 * v0;
    }
}

double qnd_average_uncertainty(const std::vector<double>& rho_diag, double tau) {
    double tot = 0.0;
    for (double p : rho_diag) tot += p;
    if (std::abs(tot - 1.0) > 1e-9)
        throw ArgumentError("qnd_average_uncertainty: diagonal must sum to 1");
    if (tau < 0.0) throw ArgumentError("qnd_average_uncertainty: tau must be >= 0");
    std::vector<double> log_rho(rho_diag.size());
    long n_top = 0;
    for (size_t n = 0; n < rho_diag.size(); ++n) {
        log_rho[n] = rho_diag[n] > 0.0 ? std::log(rho_diag[n]) : -1e300;
        if (rho_diag[n] > 0.0) n_top = static_cast<long>(n);
    }
    if (tau == 0.0) {
        // sqrt(2 pi) h(0) at tau = 0 is the initial sigma_n
        return qnd_sigma_weighted(log_rho, 0.0, 0.0) * std::sqrt(2.0 * M_PI);
    }

    // The folded integrand is a mixture of unit-width bumps centred on
    // w_n = 2 sqrt(2 tau) n: integrate over their union with composite
    // Gauss-Legendre panels, doubling the panel count until the relative
    // change drops below 1e-6.
    const double w_lo = -9.0;
    const double w_hi = 2.0 * std::sqrt(2.0 * tau) * static_cast<double>(n_top) + 9.0;
    static const double gl_x[4] = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
    static const double gl_w[4] = {0.3478548451374538, 0.6521451548625461,
                                   0.6521451548625461, 0.3478548451374538};
    double prev = 0.0;
    bool have_prev = false;
    for (long panels = static_cast<long>(std::ceil(w_hi - w_lo)); panels <= 1L << 22;
         panels *= 2) {
        const double hstep = (w_hi - w_lo) / static_cast<double>(panels);
        double acc = 0.0;
        for (long p = 0; p < panels; ++p) {
            const double mid = w_lo + (static_cast<double>(p) + 0.5) * hstep;
            for (int j = 0; j < 4; ++j)
                acc += 0.5 * hstep * gl_w[j] *
                       qnd_sigma_weighted(log_rho, tau, mid + 0.5 * hstep * gl_x[j]);
        }
        if (have_prev && std::abs(acc - prev) <= 1e-6 * std::abs(acc)) return acc;
        prev = acc;
        have_prev = true;
    }
    return prev;
}

std::pair<double, double> momentum_joint_noise(double t, RngStream& rng) {
    if (!(t > 0.0)) throw ArgumentError("momentum_joint_noise: t must be positive");
    const double x1 = rng.gaussian();
    const double x2 = rng.gaussian();
    const double W = std::sqrt(t) * x1;
    const double Y = std::pow(t, 1.5) * (0.5 * x1 + x2 / std::sqrt(12.0));
    return {W, Y};
}

double momentum_conditional_variance(double sigma_p0_sq, double k, double t) {
    if (!(sigma_p0_sq > 0.0)) throw ArgumentError("momentum_conditional_variance: need var > 0");
    if (k < 0.0) throw ArgumentError("momentum_conditional_variance: k must be >= 0");
    return sigma_p0_sq / (1.0 + 8.0 * k * sigma_p0_sq * t);
}

cplx QuadraticGenerator::lambda() const {
    cplx l = std::sqrt(xi * xi - 4.0 * alpha * gamma);
    if (l.real() < 0.0) l = -l;
    return l;
}

FFunctions quad_f_functions(const QuadraticGenerator& g, double eps, double hbar) {
    const cplx lam = g.lambda();
    const cplx ihe = I * hbar * eps;
    cplx C, S_over_lam, Cm1_over_lam2;
    if (std::abs(lam * ihe) < 1e-4) {
        // series branch around lambda = 0
        const cplx l2e2 = lam * lam * ihe * ihe;
        C = 1.0 + 0.5 * l2e2;
        S_over_lam = ihe * (1.0 + l2e2 / 6.0);
        Cm1_over_lam2 = 0.5 * ihe * ihe * (1.0 + l2e2 / 12.0);
    } else {
        C = std::cosh(ihe * lam);
        const cplx S = std::sinh(ihe * lam);
        S_over_lam = S / lam;
        Cm1_over_lam2 = (C - 1.0) / (lam * lam);
    }
    FFunctions f;
    f.f1 = (-2.0 * g.kappa * g.gamma + g.k * g.xi) * S_over_lam + g.k * C;
    f.f2 = (2.0 * g.k * g.alpha - g.kappa * g.xi) * S_over_lam + g.kappa * C;
    f.f3 = (g.k * g.eta * g.xi - 2.0 * g.k * g.alpha * g.zeta + g.kappa * g.zeta * g.xi -
            2.0 * g.kappa * g.gamma * g.eta) *
               Cm1_over_lam2 +
           (g.k * g.eta - g.kappa * g.zeta) * S_over_lam;
    return f;
}

GaussianNoiseSummary accumulate_noise_summary(const QuadraticGenerator& gen,
                                              const WienerPath& path, double hbar) {
    GaussianNoiseSummary s;
    s.t = path.t_final();
    for (size_t j = 0; j < path.steps(); ++j) {
        const double tj = static_cast<double>(j) * path.dt; // left endpoint (Ito)
        const FFunctions f = quad_f_functions(gen, tj, hbar);
        const double dw = path.increments[j];
        s.Z += (f.f1 * s.X2 - f.f2 * s.X1) * dw;
        s.X1 += f.f1 * dw;
        s.X2 += f.f2 * dw;
        s.X3 += f.f3 * dw;
        s.W += dw;
    }
    return s;
}

Eigen::Matrix3cd noise_summary_covariance(const QuadraticGenerator& gen, double t, double hbar,
                                          long n_grid) {
    Eigen::Matrix3cd cov = Eigen::Matrix3cd::Zero();
    const double h = t / static_cast<double>(n_grid);
    auto fvec = [&](double tp) {
        const FFunctions f = quad_f_functions(gen, tp, hbar);
        return Eigen::Vector3cd(f.f1, f.f2, f.f3);
    };
    Eigen::Vector3cd prev = fvec(0.0);
    for (long j = 1; j <= n_grid; ++j) {
        Eigen::Vector3cd cur = fvec(h * static_cast<double>(j));
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                cov(a, b) += 0.5 * h * (prev(a) * prev(b) + cur(a) * cur(b));
        prev = cur;
    }
    return cov;
}

QuadEvolutionResult quad_evolution(const QuadraticGenerator& gen, double t,
                                   const GaussianNoiseSummary& noise, const StateVector& psi0,
                                   double mass, double omega, double hbar,
                                   double tail_tolerance) {
    const long dim = psi0.dim();
    auto [Qop, Pop] = quadratures(dim, mass, omega, hbar);
    const Mat& Q = Qop.m;
    const Mat& P = Pop.m;
    Mat A = gen.alpha * (P * P) + gen.gamma * (Q * Q) + gen.xi * (Q * P) + gen.eta * P +
            gen.zeta * Q;
    Mat lin = noise.X1 * Q + noise.X2 * P;
    Vec out = matrix_exp(lin) * psi0.amps;
    out = matrix_exp(A, t) * out;
    out *= std::exp(noise.X3);
    StateVector sv{psi0.basis, out};
    if (fock_tail_population(sv) > tail_tolerance)
        throw NumericalError("quad_evolution: truncation leakage above tolerance");
    return {sv, I * hbar * noise.Z};
}

cplx position_meas_s_prime(double s_sq, double r, double omega, double t) {
    if (!(r > 0.0) || !(s_sq > 0.0))
        throw ArgumentError("position_meas_s_prime: need r > 0 and s^2 > 0");
    cplx z = std::sqrt(2.0 * I / r - 1.0);
    if (z.real() < 0.0) z = -z;
    if (t == 0.0) return s_sq;
    const cplx th = std::tanh(z * omega * t);
    return s_sq * (I * z) * (I * z * th - 1.0) / (th - I * z);
}

double position_meas_sigma_x2(double s_sq, double r, double omega, double t) {
    return 1.0 / (4.0 * position_meas_s_prime(s_sq, r, omega, t).real());
}

DisentangledQuadratic disentangle_quadratic(cplx u, cplx v, cplx w) {
    DisentangledQuadratic d;
    d.u = u;
    d.v = v;
    d.w = w;
    cplx f = std::sqrt(w * w - 4.0 * u * v);
    if (f.real() < 0.0) f = -f;
    d.f = f;
    cplx sinh_over_den, f_over_den;
    if (std::abs(f) < 1e-4) {
        // series in f^2: den = f[(1-w) + f^2 (3-w)/6 + ...]
        const cplx f2 = f * f;
        const cplx base = (1.0 - w) + f2 * (3.0 - w) / 6.0;
        if (std::abs(base) < 1e-12)
            throw NumericalError("disentangle_quadratic: singular denominator");
        sinh_over_den = (1.0 + f2 / 6.0) / base;
        f_over_den = 1.0 / base;
    } else {
        const cplx den = f * std::cosh(f) - w * std::sinh(f);
        if (std::abs(den) < 1e-12 * std::abs(f))
            throw NumericalError("disentangle_quadratic: singular denominator");
        sinh_over_den = std::sinh(f) / den;
        f_over_den = f / den;
    }
    d.l = v * sinh_over_den;
    d.m = u * sinh_over_den;
    d.chi = std::log(f_over_den);
    d.prefactor = std::exp(0.5 * (d.chi - w));
    return d;
}

LinearExpOnCoherent linear_exp_on_coherent(cplx nu, cplx mu, cplx alpha, double mass,
                                           double omega, double hbar) {
    // nu P + mu Q = theta a + phi a† on this oscillator basis
    const double cq = std::sqrt(hbar / (2.0 * mass * omega));
    const double cp = std::sqrt(mass * hbar * omega / 2.0);
    LinearExpOnCoherent r;
    r.theta = mu * cq - I * nu * cp;
    r.phi = mu * cq + I * nu * cp;
    r.alpha_out = alpha + r.phi;
    const double phi2 = std::norm(r.phi);
    const double re_afs = (alpha * std::conj(r.phi)).real();
    r.factor = std::exp(0.5 * phi2 + re_afs + r.theta * alpha + 0.5 * r.theta * r.phi);
    return r;
}

Mat poisson_damped_evolution(double omega, double gamma, double t, long N, long dim) {
    if (N < 0) throw ArgumentError("poisson_damped_evolution: N must be >= 0");
    Mat a = annihilation(dim).m;
    Mat aN = Mat::Identity(dim, dim);
    for (long k = 0; k < N; ++k) aN = a * aN;
    Mat d = Mat::Zero(dim, dim);
    for (long n = 0; n < dim; ++n) {
        const cplx ex = (-(I * omega + 0.5 * gamma) * static_cast<double>(n) + 0.5 * gamma) * t;
        d(n, n) = std::exp(ex);
    }
    return d * aN;
}

double poisson_record_probability(double psi_hat_norm2, double gamma, double t, long N) {
    // P~(N,t) q^N with q = (1-e^{-g t})/(g t) collapses to the Poissonian in
    // the integrated loss 1 - e^{-g t}
    const double x = 1.0 - std::exp(-gamma * t);
    double logp = -gamma * t + static_cast<double>(N) * std::log(x) - std::lgamma(N + 1.0);
    return psi_hat_norm2 * std::exp(logp);
}

double cat_jump_count_probability(double alpha_abs, double gamma, double t, long N) {
    const double a2 = alpha_abs * alpha_abs;
    const double lam = a2 * (1.0 - std::exp(-gamma * t));
    const double denom = 1.0 + std::exp(-2.0 * a2);
    const double poiss = std::exp(-lam + N * std::log(lam) - std::lgamma(N + 1.0));
    const double sign = (N % 2 == 0) ? 1.0 : -1.0;
    const double second =
        std::exp(-a2 * (1.0 + std::exp(-gamma * t)) + N * std::log(lam) - std::lgamma(N + 1.0));
    return (poiss + sign * second) / denom;
}

StateVector cat_trajectory_state(cplx alpha, double omega, double gamma, double t, long N,
                                 long dim) {
    const cplx ap = alpha * std::exp(-(I * omega + 0.5 * gamma) * t);
    return cat_state(ap, (N % 2 == 0) ? CatParity::even : CatParity::odd, dim);
}

cplx driven_cavity_coherent(cplx alpha0, cplx alpha_s, double gamma, double t) {
    return (alpha0 - alpha_s) * std::exp(-0.5 * gamma * t) + alpha_s;
}

StateVector driven_cavity_evolution(const StateVector& psi0, cplx alpha_s, double gamma,
                                    double t, const std::vector<double>& jump_times) {
    const long dim = psi0.dim();
    const Mat a = annihilation(dim).m;
    const Mat id = Mat::Identity(dim, dim);
    const cplx E = 0.5 * gamma * alpha_s;
    Vec psi = psi0.amps;
    // jump factors commute (all affine in a), order immaterial
    for (double tk : jump_times) {
        const double decay = std::exp(-0.5 * gamma * tk);
        psi = ((a - alpha_s * id) * decay + alpha_s * id) * psi;
    }
    Mat A = -0.5 * gamma * number_op(dim).m + E * a.adjoint() - std::conj(E) * a +
            0.5 * gamma * id;
    psi = matrix_exp(A, t) * psi;
    return {psi0.basis, psi};
}

StateVector kerr_cat_evolution(cplx alpha, double omega, double gamma, double chi_kerr,
                               double t, long N, double Y, long dim) {
    if (std::abs(chi_kerr * t - M_PI) > 1e-9 * std::max(1.0, M_PI))
        throw ConfigError("kerr_cat_evolution: only the chi*t = pi branch is supported");
    (void)N; // a^N only scales a coherent input; parity does not toggle here
    const cplx ap = alpha * std::exp(-(I * omega + 0.5 * gamma) * t - I * chi_kerr * Y);
    StateVector plus = coherent_state(I * ap, dim);
    StateVector minus = coherent_state(-I * ap, dim);
    Vec amps = ((1.0 - I) * plus.amps + (1.0 + I) * minus.amps) / 2.0;
    return {Basis::fock(dim), amps};
}

} // namespace qtraj
