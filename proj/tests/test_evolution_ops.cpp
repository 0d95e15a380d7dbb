#include <doctest.h>

#include <cmath>

#include "qtraj/evolution_ops.hpp"
#include "qtraj/trajectories.hpp"

using namespace qtraj;

TEST_CASE("lqse_split: trivial, scalar, and O(dt^{3/2}) contract") {
    const long d = 6;
    RngStream rng(1, 0);
    Mat At(d, d), B(d, d);
    for (long i = 0; i < d; ++i)
        for (long j = 0; j < d; ++j) {
            At(i, j) = cplx(rng.gaussian(), rng.gaussian());
            B(i, j) = cplx(rng.gaussian(), rng.gaussian());
        }
    CHECK((lqse_split(At, Mat(Mat::Zero(d, d))) - At).norm() == 0.0);

    // scalar check: Atilde = f, B = g gives the multiplicative-noise exponent
    Mat f = 0.37 * Mat::Identity(1, 1), g = 0.81 * Mat::Identity(1, 1);
    CHECK(std::abs(lqse_split(f, g)(0, 0) - (0.37 - 0.5 * 0.81 * 0.81)) < 1e-15);

    // e^{A dt} e^{B dW} reproduces the one-step map (1 + At dt + B dW) under
    // dW^2 = dt: at dW = sqrt(dt) the B^2 dW^2/2 Ito term cancels against
    // A = At - B^2/2, leaving a residual of O(dt^{3/2})
    Mat A = lqse_split(At, B);
    double err[2];
    int i = 0;
    for (double dt : {1e-4, 1e-5}) {
        Mat lhs = matrix_exp(A, dt) * matrix_exp(B, std::sqrt(dt));
        Mat rhs = Mat::Identity(d, d) + At * dt + B * std::sqrt(dt);
        err[i++] = (lhs - rhs).norm();
    }
    const double order = std::log10(err[0] / err[1]);
    CHECK(order > 1.2); // 1.5 expected
    CHECK(order < 1.8);
}

TEST_CASE("qnd evolution operator: diagonal structure") {
    const long d = 8;
    // n = 0 entry of V V† is 1 for any t, W
    Mat v = qnd_number_evolution(0.9, 0.3, 2.0, -1.3, d);
    CHECK(std::abs(std::norm(v(0, 0)) - 1.0) < 1e-14);

    // k = 0: pure phase evolution
    Mat v0 = qnd_number_evolution(0.9, 0.0, 2.0, 0.7, d);
    for (long n = 0; n < d; ++n) CHECK(std::abs(std::abs(v0(n, n)) - 1.0) < 1e-14);

    // V V† diagonal equals exp(-4 k t n^2 + 2 sqrt(2k) n W)
    const double k = 0.3, t = 0.5, W = -0.8;
    for (long n = 0; n < d; ++n) {
        const double want = std::exp(-4.0 * k * t * n * n + 2.0 * std::sqrt(2.0 * k) * n * W);
        CHECK(std::norm(v(n, n)) == doctest::Approx(
                                        std::exp(-4.0 * 0.3 * 2.0 * n * n +
                                                 2.0 * std::sqrt(0.6) * n * (-1.3))));
        (void)want;
    }
}

TEST_CASE("qnd closed form matches the linear diffusive SDE on a shared path") {
    const long d = 16;
    const double omega = 0.4, k = 0.25, t = 0.1;
    Mat n = number_op(d).m;
    UnravellingSpec spec;
    spec.H = omega * (n + 0.5 * Mat::Identity(d, d));
    spec.channels = {Mat(std::sqrt(2.0 * k) * n)};
    spec.scheme = Scheme::diffusive_linear;
    StateVector psi0 = coherent_state(1.3, d);

    double infid[2];
    int idx = 0;
    for (double dt : {1e-5, 1e-6}) {
        const size_t steps = static_cast<size_t>(std::round(t / dt));
        RngStream rng(2718, idx);
        WienerPath path = wiener_path(steps, dt, rng);
        NoiseRecord rec;
        rec.dt = dt;
        rec.dW = {path.increments};
        TrajectoryOptions opt;
        opt.t_final = t;
        opt.dt = dt;
        TrajectoryResult tr = run_on_record(spec, psi0, opt, rec);
        Vec closed = qnd_number_evolution(omega, k, t, path.cumulative.back(), d) * psi0.amps;
        infid[idx++] = 1.0 - fidelity(tr.states.back(), closed);
    }
    CHECK(infid[0] < 1e-3);
    CHECK(infid[0] / infid[1] > 5.0);
}

TEST_CASE("qnd average uncertainty: Fock state, tau=0, thermal vs coherent") {
    // Fock state: no uncertainty at any tau
    std::vector<double> fock(10, 0.0);
    fock[3] = 1.0;
    CHECK(qnd_average_uncertainty(fock, 0.3) == doctest::Approx(0.0));

    // tau = 0 returns the initial sigma_n
    std::vector<double> two(6, 0.0);
    two[0] = 0.5;
    two[4] = 0.5; // variance 4
    CHECK(qnd_average_uncertainty(two, 0.0) == doctest::Approx(2.0).epsilon(1e-9));

    // thermal <n>=4 and coherent <n>=20, both sigma_n^2 = 20: both curves
    // decrease and stay within 25% of each other over tau in [0.01, 1]
    const long d_th = 90, d_co = 90;
    std::vector<double> th(d_th), co(d_co);
    {
        const double nbar = 4.0, x = nbar / (1.0 + nbar);
        double norm = 0.0;
        for (long n = 0; n < d_th; ++n) norm += std::pow(x, n);
        for (long n = 0; n < d_th; ++n) th[n] = std::pow(x, n) / norm;
        double norm2 = 0.0;
        for (long n = 0; n < d_co; ++n) {
            co[n] = std::exp(-20.0 + n * std::log(20.0) - std::lgamma(n + 1.0));
            norm2 += co[n];
        }
        for (long n = 0; n < d_co; ++n) co[n] /= norm2;
    }
    CHECK(qnd_average_uncertainty(th, 0.0) == doctest::Approx(std::sqrt(20.0)).epsilon(1e-3));
    CHECK(qnd_average_uncertainty(co, 0.0) == doctest::Approx(std::sqrt(20.0)).epsilon(1e-3));
    double prev_th = 1e300, prev_co = 1e300;
    for (double tau : {0.01, 0.03, 0.1, 0.3, 1.0}) {
        const double st = qnd_average_uncertainty(th, tau);
        const double sc = qnd_average_uncertainty(co, tau);
        CHECK(st < prev_th);
        CHECK(sc < prev_co);
        prev_th = st;
        prev_co = sc;
        CHECK(std::abs(st - sc) / std::max(st, sc) < 0.25);
    }
}

TEST_CASE("momentum joint noise: covariances and scale-free correlation") {
    const double t = 1.0;
    const size_t n = 1000000;
    RngStream rng(99, 0);
    double sww = 0, swy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        auto [W, Y] = momentum_joint_noise(t, rng);
        sww += W * W;
        swy += W * Y;
        syy += Y * Y;
    }
    sww /= n;
    swy /= n;
    syy /= n;
    CHECK(sww == doctest::Approx(1.0).epsilon(0.01));
    CHECK(swy == doctest::Approx(0.5).epsilon(0.01));
    CHECK(syy == doctest::Approx(1.0 / 3.0).epsilon(0.01));

    // correlation coefficient sqrt(3)/2 independent of t
    for (double tt : {0.1, 2.5}) {
        RngStream r2(100, 0);
        double a = 0, b = 0, c = 0;
        for (size_t i = 0; i < 50000; ++i) {
            auto [W, Y] = momentum_joint_noise(tt, r2);
            a += W * W;
            b += W * Y;
            c += Y * Y;
        }
        CHECK(b / std::sqrt(a * c) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(0.02));
    }
}

TEST_CASE("momentum conditional variance formula limits") {
    CHECK(momentum_conditional_variance(0.7, 0.0, 5.0) == doctest::Approx(0.7));
    CHECK(momentum_conditional_variance(0.7, 1.0, 1e9) < 1e-7);
    CHECK(momentum_conditional_variance(0.5, 0.25, 1.0) ==
          doctest::Approx(0.5 / (1.0 + 8.0 * 0.25 * 0.5)));
}

TEST_CASE("quad_f_functions: eps = 0 and the dense conjugation oracle") {
    QuadraticGenerator g;
    RngStream rng(5, 0);
    g.alpha = cplx(0.1 * rng.gaussian(), 0.1 * rng.gaussian());
    g.gamma = cplx(0.1 * rng.gaussian(), 0.1 * rng.gaussian());
    g.xi = cplx(0.1 * rng.gaussian(), 0.1 * rng.gaussian());
    g.eta = cplx(0.1 * rng.gaussian(), 0.1 * rng.gaussian());
    g.zeta = cplx(0.1 * rng.gaussian(), 0.1 * rng.gaussian());
    g.k = cplx(0.4, -0.2);
    g.kappa = cplx(-0.3, 0.6);

    FFunctions f0 = quad_f_functions(g, 0.0);
    CHECK(std::abs(f0.f1 - g.k) < 1e-14);
    CHECK(std::abs(f0.f2 - g.kappa) < 1e-14);
    CHECK(std::abs(f0.f3) < 1e-14);

    // e^{-eps A}(k Q + kappa P) e^{eps A} = f1 Q + f2 P + f3 on a truncation
    const long d = 96;
    auto [Q, P] = quadratures(d, 1.0, 1.0);
    const double eps = 0.15;
    Mat A = g.alpha * (P.m * P.m) + g.gamma * (Q.m * Q.m) + g.xi * (Q.m * P.m) + g.eta * P.m +
            g.zeta * Q.m;
    Mat lhs = matrix_exp(A, -eps) * (g.k * Q.m + g.kappa * P.m) * matrix_exp(A, eps);
    FFunctions f = quad_f_functions(g, eps);
    Mat rhs = f.f1 * Q.m + f.f2 * P.m + f.f3 * Mat::Identity(d, d);
    const long K = 12;
    CHECK((lhs - rhs).topLeftCorner(K, K).norm() / rhs.topLeftCorner(K, K).norm() < 1e-7);
}

TEST_CASE("quad_f_functions: lambda -> 0 momentum-measurement branch") {
    // gamma = xi = 0 makes lambda = 0; the series branch must reproduce the
    // momentum-measurement structure f1 = k, f2 = kappa + 2 alpha k (i hbar eps)
    QuadraticGenerator g;
    g.alpha = cplx(0.0, -0.5); // -i/(2m), m=1, hbar=1
    g.k = 0.0;
    g.kappa = std::sqrt(2.0 * 0.3); // B = sqrt(2k) P
    FFunctions f = quad_f_functions(g, 0.2);
    CHECK(std::abs(f.f1) < 1e-12);
    CHECK(std::abs(f.f2 - g.kappa) < 1e-12); // [A,B] central: f2 stays kappa
    CHECK(std::abs(f.f3) < 1e-12);

    // with a linear potential (zeta = iF/hbar) f3 integrates the force
    g.zeta = I * 1.7;
    FFunctions f2 = quad_f_functions(g, 0.2);
    // df3/deps = i hbar (eta f1 - zeta f2) = -i zeta kappa eps-independent
    CHECK(std::abs(f2.f3 - (-I * g.zeta * g.kappa * 0.2)) < 1e-10);
}

TEST_CASE("noise summary: sample covariance matches the analytic integrals") {
    QuadraticGenerator g;
    g.alpha = cplx(0.0, -0.5);
    g.gamma = cplx(0.0, -0.5) - 2.0 * 0.3; // harmonic + position measurement
    g.k = std::sqrt(2.0 * 0.3);
    const double t = 0.8;
    Eigen::Matrix3cd want = noise_summary_covariance(g, t);
    Eigen::Matrix3cd got = Eigen::Matrix3cd::Zero();
    const size_t n_paths = 20000, steps = 200;
    for (size_t i = 0; i < n_paths; ++i) {
        RngStream rng(123, i);
        WienerPath p = wiener_path(steps, t / steps, rng);
        GaussianNoiseSummary s = accumulate_noise_summary(g, p);
        Eigen::Vector3cd x(s.X1, s.X2, s.X3);
        got += x * x.transpose();
    }
    got /= static_cast<double>(n_paths);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(std::abs(got(a, b) - want(a, b)) <
                  0.05 * std::max(1e-3, std::abs(want(a, b))) + 2e-3);
}

TEST_CASE("quad_evolution: identity at t=0 and Gaussianity of the output") {
    const long d = 48;
    QuadraticGenerator g; // all zero
    GaussianNoiseSummary none;
    StateVector c = coherent_state(0.7, d);
    QuadEvolutionResult r = quad_evolution(g, 0.0, none, c, 1.0, 1.0);
    CHECK(fidelity(r.state_unnormalized, c) > 1.0 - 1e-12);

    // harmonic + position measurement: coherent in, Gaussian out; third
    // cumulant of the position distribution stays at zero
    QuadraticGenerator h;
    h.alpha = cplx(0.0, -0.5);
    h.gamma = cplx(0.0, -0.5) - 2.0 * 0.3;
    h.k = std::sqrt(2.0 * 0.3);
    RngStream rng(7, 0);
    WienerPath path = wiener_path(2000, 5e-4, rng);
    GaussianNoiseSummary s = accumulate_noise_summary(h, path);
    QuadEvolutionResult out = quad_evolution(h, path.t_final(), s, c, 1.0, 1.0);
    auto [st, norm] = normalize(out.state_unnormalized);
    auto [Q, P] = quadratures(d, 1.0, 1.0);
    const double m1 = expectation(Q.m, st).real();
    const double m2 = expectation(Mat(Q.m * Q.m), st).real();
    const double m3 = expectation(Mat(Q.m * Q.m * Q.m), st).real();
    const double c3 = m3 - 3.0 * m2 * m1 + 2.0 * m1 * m1 * m1;
    CHECK(std::abs(c3) < 1e-6);
}

TEST_CASE("position-measurement conditional width: t = 0 and the two limits") {
    const double s2 = 0.5;
    CHECK(std::abs(position_meas_s_prime(s2, 1.0, 1.0, 0.0) - s2) < 1e-12);

    // r -> infinity: unmonitored width 1/(4 s^2) within 1%
    const double sx_unmon = position_meas_sigma_x2(s2, 1e8, 1.0, 50.0);
    CHECK(sx_unmon == doctest::Approx(1.0 / (4.0 * s2)).epsilon(0.01));

    // t -> infinity equals the -i z s^2 asymptote
    cplx z = std::sqrt(2.0 * I / 1.0 - 1.0);
    if (z.real() < 0.0) z = -z;
    const cplx want = -s2 * I * z;
    const cplx got = position_meas_s_prime(s2, 1.0, 1.0, 60.0);
    CHECK(std::abs(got - want) < 1e-9);
}

TEST_CASE("disentangle_quadratic: identity case, symmetry, reassembly") {
    auto dis0 = disentangle_quadratic(0.0, 0.0, cplx{0.2, -0.1});
    CHECK(std::abs(dis0.l) < 1e-12);
    CHECK(std::abs(dis0.m) < 1e-12);
    CHECK(std::abs(dis0.chi - cplx{0.2, -0.1}) < 1e-9);

    // w = 0, u = v real small: l = m
    auto dis1 = disentangle_quadratic(0.05, 0.05, 0.0);
    CHECK(std::abs(dis1.l - dis1.m) < 1e-12);

    // reassembly against the dense exponential on low-n states
    const long d = 40;
    Mat a = annihilation(d).m, ad = a.adjoint();
    RngStream rng(17, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Vector3d re, im;
        for (int i = 0; i < 3; ++i) {
            re(i) = rng.gaussian();
            im(i) = rng.gaussian();
        }
        double scale = 0.3 * rng.uniform01() / std::sqrt(re.squaredNorm() + im.squaredNorm());
        const cplx u = scale * cplx(re(0), im(0));
        const cplx v = scale * cplx(re(1), im(1));
        const cplx w = scale * cplx(re(2), im(2));
        auto dis = disentangle_quadratic(u, v, w);
        Mat lhs = matrix_exp(Mat(u * a * a + v * ad * ad + w * ad * a));
        Mat rhs = dis.prefactor * matrix_exp(Mat(dis.l * ad * ad)) *
                  matrix_exp(number_op(d).m, dis.chi) * matrix_exp(Mat(dis.m * a * a));
        Vec psi(d);
        psi.setZero();
        for (long n = 0; n < 5; ++n) psi(n) = cplx(rng.gaussian(), rng.gaussian());
        psi /= psi.norm();
        Vec x = lhs * psi, y = rhs * psi;
        worst = std::max(worst, (x - y).head(d / 2).norm() / x.head(d / 2).norm());
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("linear exponential on a coherent state: identity and matrix oracle") {
    auto r0 = linear_exp_on_coherent(0.0, 0.0, cplx{0.3, 0.2}, 1.0, 1.0);
    CHECK(std::abs(r0.factor - 1.0) < 1e-14);
    CHECK(std::abs(r0.alpha_out - cplx{0.3, 0.2}) < 1e-14);

    const long d = 40;
    const double mass = 1.4, om = 0.7;
    auto [Q, P] = quadratures(d, mass, om);
    RngStream rng(23, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const cplx nu{0.25 * rng.gaussian(), 0.25 * rng.gaussian()};
        const cplx mu{0.25 * rng.gaussian(), 0.25 * rng.gaussian()};
        const cplx al{0.5 * rng.gaussian(), 0.5 * rng.gaussian()};
        auto r = linear_exp_on_coherent(nu, mu, al, mass, om);
        Vec lhs = matrix_exp(Mat(nu * P.m + mu * Q.m)) * coherent_state(al, d).amps;
        Vec rhs = r.factor * coherent_state(r.alpha_out, d).amps;
        CHECK(fidelity(lhs, rhs) > 1.0 - 1e-9);
        CHECK((lhs - rhs).norm() / rhs.norm() < 1e-8);
    }

    // the output stays coherent: Fano factor of the number distribution = 1
    auto r = linear_exp_on_coherent(0.3, -0.2, 0.6, mass, om);
    const long dd = 30;
    Vec st = matrix_exp(Mat(cplx(0.3) * quadratures(dd, mass, om).second.m +
                            cplx(-0.2) * quadratures(dd, mass, om).first.m)) *
             coherent_state(0.6, dd).amps;
    StateVector sv{Basis::fock(dd), st};
    Mat n = number_op(dd).m;
    const double mean_n = expectation(n, sv).real();
    const double var_n = variance(n, sv);
    CHECK(var_n / mean_n == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("poisson damped evolution: phase rotation, cat closed form, P(N,t)") {
    const long d = 30;
    // N = 0, gamma = 0: pure phase rotation
    Mat v = poisson_damped_evolution(0.7, 0.0, 1.3, 0, d);
    for (long n = 0; n < d; ++n)
        CHECK(std::abs(v(n, n) - std::exp(-I * 0.7 * 1.3 * static_cast<double>(n))) < 1e-12);

    // cat input: the evolved state equals the closed form with parity toggle
    const double alpha = 1.2, gamma = 1.0, om = 0.4;
    const double t = 0.3 / gamma;
    StateVector cat0 = cat_state(alpha, CatParity::even, d);
    for (long N : {0L, 1L, 2L, 3L}) {
        Vec evolved = poisson_damped_evolution(om, gamma, t, N, d) * cat0.amps;
        StateVector want = cat_trajectory_state(alpha, om, gamma, t, N, d);
        CHECK(fidelity(evolved, want.amps) > 1.0 - 1e-10);
    }

    // P(N,t) normalizes to 1 and matches the two-Poissonian closed form
    const double a1 = 1.0, gt = 0.5;
    double tot = 0.0;
    for (long N = 0; N < 40; ++N) {
        Vec ev = poisson_damped_evolution(0.0, 1.0, gt, N, d) * cat_state(a1, CatParity::even, d).amps;
        const double p = poisson_record_probability(ev.squaredNorm(), 1.0, gt, N);
        tot += p;
        CHECK(p == doctest::Approx(cat_jump_count_probability(a1, 1.0, gt, N))
                       .epsilon(1e-9)
                       .scale(1.0));
    }
    CHECK(std::abs(tot - 1.0) < 1e-10);
}

TEST_CASE("cat trajectory state matches the linear jump SDE on a shared record") {
    const long d = 24;
    const double alpha = 1.2, gamma = 1.0, om = 0.0;
    const double t = 0.3 / gamma;
    StateVector cat0 = cat_state(alpha, CatParity::even, d);
    Mat a = annihilation(d).m;
    UnravellingSpec spec;
    spec.H = om * number_op(d).m;
    spec.channels = {Mat(std::sqrt(gamma) * a)};
    spec.scheme = Scheme::jump_linear;
    spec.ostensible_rates = {gamma};
    // an odd record: one jump at 0.4 t
    NoiseRecord rec;
    rec.dt = 1e-5;
    rec.jump_times = {0.4 * t};
    rec.jump_channels = {0};
    TrajectoryOptions opt;
    opt.t_final = t;
    opt.dt = 1e-5;
    TrajectoryResult tr = run_on_record(spec, cat0, opt, rec);
    StateVector want = cat_trajectory_state(alpha, om, gamma, t, 1, d);
    CHECK(fidelity(tr.states.back(), want.amps) > 1.0 - 1e-3);
}

TEST_CASE("driven cavity: steady state, long-time amplitude, master oracle") {
    CHECK(std::abs(driven_cavity_coherent(2.0, 2.0, 1.0, 3.0) - 2.0) < 1e-15);
    CHECK(std::abs(driven_cavity_coherent(0.3, 1.4, 1.0, 60.0) - 1.4) < 1e-12);

    const long d = 30;
    const double gamma = 1.0, t = 1.1;
    const cplx alpha0{0.8, -0.4}, alpha_s{1.2, 0.0};
    const cplx E = 0.5 * gamma * alpha_s;
    Mat a = annihilation(d).m;
    Mat H = I * (E * a.adjoint() - std::conj(E) * a);
    StateVector psi0 = coherent_state(alpha0, d);
    Mat rho = master_evolve(psi0.amps * psi0.amps.adjoint(), H,
                            {Mat(std::sqrt(gamma) * a)}, t, 1e-4);
    const cplx a_master = (a * rho).trace();
    const cplx a_closed = driven_cavity_coherent(alpha0, alpha_s, gamma, t);
    CHECK(std::abs(a_master - a_closed) < 1e-6);

    // non-coherent input falls back to the operator product on the record
    StateVector cat0 = cat_state(1.0, CatParity::even, d);
    StateVector out = driven_cavity_evolution(cat0, alpha_s, gamma, t, {0.2, 0.7});
    CHECK(out.norm() > 0.0); // smoke: full check against the jump SDE below
    UnravellingSpec spec;
    spec.H = H;
    spec.channels = {Mat(std::sqrt(gamma) * a)};
    spec.scheme = Scheme::jump_linear;
    spec.ostensible_rates = {gamma};
    NoiseRecord rec;
    rec.dt = 1e-5;
    rec.jump_times = {0.2, 0.7};
    rec.jump_channels = {0, 0};
    TrajectoryOptions opt;
    opt.t_final = t;
    opt.dt = 1e-5;
    TrajectoryResult tr = run_on_record(spec, cat0, opt, rec);
    CHECK(fidelity(tr.states.back(), out.amps) > 1.0 - 1e-3);
}

TEST_CASE("kerr cat: dense oracle, norm, Y periodicity, branch guard") {
    const long d = 60;
    const double alpha = 1.5, chi = 0.9;
    const double t = M_PI / chi;
    // gamma = 0, N = 0, Y = 0 vs dense exponential of the Kerr generator
    Mat n = number_op(d).m;
    Mat kerr = -I * 0.0 * n - I * (chi / 2.0) * (n * n - n);
    // scaling-squaring on the diagonal generator is exact; build directly
    Vec direct = Vec::Zero(d);
    {
        Vec c = coherent_state(alpha, d).amps;
        for (long j = 0; j < d; ++j)
            direct(j) = c(j) * std::exp(-I * (chi / 2.0) *
                                        (static_cast<double>(j) * j - j) * t);
    }
    StateVector closed = kerr_cat_evolution(alpha, 0.0, 0.0, chi, t, 0, 0.0, d);
    CHECK(fidelity(direct, closed.amps) > 1.0 - 1e-8);
    CHECK(std::abs(closed.norm() - 1.0) < 1e-10);

    // Y -> Y + 2 pi/chi leaves the state invariant
    StateVector s1 = kerr_cat_evolution(alpha, 0.3, 0.8, chi, t, 2, 0.37, d);
    StateVector s2 = kerr_cat_evolution(alpha, 0.3, 0.8, chi, t, 2, 0.37 + 2.0 * M_PI / chi, d);
    CHECK((s1.amps - s2.amps).norm() < 1e-10);

    CHECK_THROWS_AS(kerr_cat_evolution(alpha, 0.0, 0.0, chi, 0.5 * t, 0, 0.0, d), ConfigError);
}

TEST_CASE("kerr cat on a damped jump record matches the SDE") {
    const long d = 40;
    const double alpha = 1.1, chi = 1.3, gamma = 0.6, om = 0.2;
    const double t = M_PI / chi;
    Mat n = number_op(d).m;
    Mat a = annihilation(d).m;
    UnravellingSpec spec;
    spec.H = om * n + (chi / 2.0) * (n * n - n);
    spec.channels = {Mat(std::sqrt(gamma) * a)};
    spec.scheme = Scheme::jump_linear;
    spec.ostensible_rates = {gamma};
    NoiseRecord rec;
    rec.dt = 1e-5;
    rec.jump_times = {0.3 * t, 0.6 * t};
    rec.jump_channels = {0, 0};
    TrajectoryOptions opt;
    opt.t_final = t;
    opt.dt = 1e-5;
    StateVector psi0 = coherent_state(alpha, d);
    TrajectoryResult tr = run_on_record(spec, psi0, opt, rec);
    const double Y = 0.3 * t + 0.6 * t;
    StateVector closed = kerr_cat_evolution(alpha, om, gamma, chi, t, 2, Y, d);
    CHECK(fidelity(tr.states.back(), closed.amps) > 1.0 - 1e-3);
}
