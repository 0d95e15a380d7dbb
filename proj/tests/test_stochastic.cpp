#include <doctest.h>

#include <cmath>

#include "qtraj/stochastic.hpp"

using namespace qtraj;

TEST_CASE("wiener increments: unit-variance statistics and dt scaling") {
    // sample-statistics oracle over >= 1e5 draws
    const size_t n = 100000;
    RngStream rng(12345, 0);
    WienerPath p = wiener_path(n, 1.0, rng);
    double mean = 0.0, var = 0.0;
    for (double dw : p.increments) mean += dw;
    mean /= n;
    for (double dw : p.increments) var += (dw - mean) * (dw - mean);
    var /= (n - 1);
    CHECK(var > 0.97);
    CHECK(var < 1.03);
    // 4-sigma bound on the mean
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));

    // dt scaled by 4 -> std scales by 2 within 2%
    RngStream rng2(12345, 1);
    WienerPath p4 = wiener_path(n, 4.0, rng2);
    double var4 = 0.0;
    for (double dw : p4.increments) var4 += dw * dw;
    var4 /= n;
    CHECK(std::sqrt(var4 / var) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("wiener path determinism: same (seed,index) is bitwise identical") {
    RngStream a(99, 7), b(99, 7);
    WienerPath pa = wiener_path(1000, 1e-3, a);
    WienerPath pb = wiener_path(1000, 1e-3, b);
    for (size_t k = 0; k < pa.steps(); ++k) {
        REQUIRE(pa.increments[k] == pb.increments[k]);
    }
    // different index diverges
    RngStream c(99, 8);
    WienerPath pc = wiener_path(1000, 1e-3, c);
    bool same = true;
    for (size_t k = 0; k < pc.steps(); ++k) same = same && pc.increments[k] == pa.increments[k];
    CHECK_FALSE(same);
}

TEST_CASE("wiener path argument errors") {
    RngStream rng(1, 0);
    CHECK_THROWS_AS(wiener_path(0, 1.0, rng), ArgumentError);
    CHECK_THROWS_AS(wiener_path(10, 0.0, rng), ArgumentError);
    CHECK_THROWS_AS(wiener_path(10, -1.0, rng), ArgumentError);
}

TEST_CASE("quadratic variation converges to t") {
    // chi^2 tail bound: var(QV) = 2 dt t, [0.98, 1.02] is > 4 sigma at dt=1e-4
    RngStream rng(31337, 0);
    WienerPath p = wiener_path(10000, 1e-4, rng);
    const double qv = quadratic_variation(p);
    CHECK(qv > 0.98);
    CHECK(qv < 1.02);

    RngStream rng2(31337, 1);
    WienerPath p2 = wiener_path(20000, 1e-4, rng2);
    const double qv2 = quadratic_variation(p2);
    CHECK(qv2 > 1.97);
    CHECK(qv2 < 2.03);

    WienerPath zeros;
    zeros.dt = 1e-3;
    zeros.increments.assign(100, 0.0);
    zeros.cumulative.assign(100, 0.0);
    CHECK(quadratic_variation(zeros) == 0.0);
}

TEST_CASE("quadratic variation deviation shrinks like sqrt(dt)") {
    // averaged over a few paths per dt to steady the estimate
    double dev[3];
    int di = 0;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
        const size_t n = static_cast<size_t>(std::round(1.0 / dt));
        double acc = 0.0;
        const int reps = 20;
        for (int r = 0; r < reps; ++r) {
            RngStream rng(555, 100 * di + r);
            acc += std::abs(quadratic_variation(wiener_path(n, dt, rng)) - 1.0);
        }
        dev[di++] = acc / reps;
    }
    // each decade of dt should shrink the deviation by roughly sqrt(10)
    CHECK(dev[1] < dev[0]);
    CHECK(dev[2] < dev[1]);
    CHECK(dev[2] < dev[0] / 3.0);
}

TEST_CASE("ou_exact deterministic and noise-free limits") {
    RngStream rng(7, 0);
    WienerPath p = wiener_path(1000, 1e-3, rng);

    // g = 0: x(t) = e^{kt} x0 exactly
    const cplx k{-0.7, 0.3}, x0{1.0, -0.5};
    auto traj = ou_exact(x0, k, 0.0, p);
    for (size_t j = 99; j < traj.size(); j += 300) {
        const double t = (j + 1) * p.dt;
        CHECK(std::abs(traj[j] - std::exp(k * t) * x0) < 1e-12);
    }

    // k = 0, g = 1: x(t) = x0 + W(t)
    auto traj2 = ou_exact(x0, 0.0, 1.0, p);
    for (size_t j = 0; j < traj2.size(); j += 211)
        CHECK(std::abs(traj2[j] - (x0 + p.cumulative[j])) < 1e-12);
}

TEST_CASE("ou_exact ensemble variance reaches 1/(2|k|)") {
    // k=-1, g=1, late time: Var -> 1/2 within 3% over 1e5 paths.
    // Var is estimated at t=6 (e^{-12} transient) with 200-step paths.
    const size_t n_paths = 100000;
    const double dt = 0.03;
    const size_t n_steps = 200;
    double m = 0.0, m2 = 0.0;
    for (size_t i = 0; i < n_paths; ++i) {
        RngStream rng(2024, i);
        WienerPath p = wiener_path(n_steps, dt, rng);
        const cplx x = ou_exact(0.0, -1.0, 1.0, p).back();
        m += x.real();
        m2 += x.real() * x.real();
    }
    m /= n_paths;
    m2 /= n_paths;
    const double var = m2 - m * m;
    CHECK(var == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("multiplicative_exact limits and euler self-convergence") {
    RngStream rng(11, 0);
    WienerPath p = wiener_path(2000, 5e-4, rng);

    // g = 0 -> exp(f t) x0
    auto t1 = multiplicative_exact(1.0, cplx{0.4, -1.0}, 0.0, p);
    CHECK(std::abs(t1.back() - std::exp(cplx{0.4, -1.0} * 1.0)) < 1e-12);

    // f = g^2/2 and W == 0 path -> x stays x0
    WienerPath flat;
    flat.dt = 1e-3;
    flat.increments.assign(100, 0.0);
    flat.cumulative.assign(100, 0.0);
    auto t2 = multiplicative_exact(2.0, 0.08, 0.4, flat);
    CHECK(std::abs(t2.back() - 2.0) < 1e-12);
}

TEST_CASE("multiplicative: euler error halves when dt halves (strong order ~1)") {
    // drift/diffusion commute for this equation, so EM converges at order 1;
    // slope of log-error vs log-dt must sit in [0.7, 1.3]
    const cplx f{0.2, 0.0}, g{0.5, 0.0};
    const double t_final = 1.0;
    double errs[3];
    int ei = 0;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const size_t n = static_cast<size_t>(std::round(t_final / dt));
        double acc = 0.0;
        const int reps = 400;
        for (int r = 0; r < reps; ++r) {
            RngStream rng(808, r);
            WienerPath p = wiener_path(n, dt, rng);
            const cplx exact = multiplicative_exact(1.0, f, g, p).back();
            const cplx euler = multiplicative_euler(1.0, f, g, p).back();
            acc += std::abs(exact - euler);
        }
        errs[ei++] = acc / reps;
    }
    const double slope = std::log(errs[0] / errs[2]) / std::log(4.0);
    CHECK(slope > 0.7);
    CHECK(slope < 1.3);
    // halving dt halves the error, +-30%
    const double ratio = errs[0] / errs[1];
    CHECK(ratio > 2.0 * 0.7);
    CHECK(ratio < 2.0 * 1.3);
}

TEST_CASE("poisson path: trivial rate, mean count, dt guard") {
    RngStream rng(5, 0);
    CHECK_THROWS_AS(poisson_path(200.0, 10, 1e-3, rng), ConfigError);

    PoissonPath p0 = poisson_path(0.0, 1000, 1e-2, rng);
    CHECK(p0.N() == 0);
    CHECK(p0.Y() == 0.0);

    // lambda=1, t=5: mean N over 1e5 paths within [4.93, 5.07]
    const size_t n_paths = 100000;
    double acc = 0.0;
    for (size_t i = 0; i < n_paths; ++i) {
        RngStream r(777, i);
        acc += static_cast<double>(poisson_path(1.0, 500, 1e-2, r).N());
    }
    acc /= n_paths;
    CHECK(acc > 4.93);
    CHECK(acc < 5.07);
}

TEST_CASE("poisson path: counting distribution matches the Poissonian") {
    const double lambda = 1.0, t = 3.0, dt = 5e-3;
    const size_t n_paths = 20000;
    std::vector<long> hist(40, 0);
    for (size_t i = 0; i < n_paths; ++i) {
        RngStream r(31, i);
        size_t N = poisson_path(lambda, static_cast<size_t>(t / dt), dt, r).N();
        if (N < hist.size()) ++hist[N];
    }
    // chi-square against e^{-lt}(lt)^k/k!, bins with expectation >= 10
    double chi2 = 0.0;
    int dof = 0;
    for (size_t k = 0; k < hist.size(); ++k) {
        const double pk =
            std::exp(-lambda * t + k * std::log(lambda * t) - std::lgamma(k + 1.0));
        const double expect = pk * n_paths;
        if (expect < 10.0) continue;
        chi2 += (hist[k] - expect) * (hist[k] - expect) / expect;
        ++dof;
    }
    // dof ~ 10; 1e-3 critical value ~ 30; leave margin for the O(dt) bias
    CHECK(chi2 < 40.0);
}

TEST_CASE("poisson path: event times conditionally uniform (KS test)") {
    // pool all event times (scaled by 1/t) across paths; KS vs uniform
    const double lambda = 1.0, t = 5.0, dt = 5e-3;
    std::vector<double> times;
    for (size_t i = 0; i < 2000; ++i) {
        RngStream r(808, i);
        PoissonPath p = poisson_path(lambda, static_cast<size_t>(t / dt), dt, r);
        for (double tk : p.event_times) times.push_back(tk / t);
    }
    std::sort(times.begin(), times.end());
    double ks = 0.0;
    const double n = static_cast<double>(times.size());
    for (size_t i = 0; i < times.size(); ++i) {
        const double f = static_cast<double>(i + 1) / n;
        ks = std::max(ks, std::abs(f - times[i]));
        ks = std::max(ks, std::abs(static_cast<double>(i) / n - times[i]));
    }
    // 99.9% critical value 1.95/sqrt(n), plus slack for the dt grid bias
    CHECK(ks < 1.95 / std::sqrt(n) + dt / t);
}

TEST_CASE("poisson path invariants: Y <= N t, exact mode agrees in mean") {
    for (size_t i = 0; i < 50; ++i) {
        RngStream r(99, i);
        PoissonPath p = poisson_path(2.0, 400, 0.01, r);
        CHECK(p.Y() <= static_cast<double>(p.N()) * p.t_final() + 1e-12);
    }
    double acc = 0.0;
    const size_t n_paths = 50000;
    for (size_t i = 0; i < n_paths; ++i) {
        RngStream r(12, i);
        acc += static_cast<double>(poisson_path_exact(1.0, 5.0, r).N());
    }
    acc /= n_paths;
    CHECK(acc == doctest::Approx(5.0).epsilon(0.03));
}
