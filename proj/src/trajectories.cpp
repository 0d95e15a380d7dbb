#include "qtraj/trajectories.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

namespace qtraj {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::jump_nonlinear: return "jump_nonlinear";
        case Scheme::jump_linear: return "jump_linear";
        case Scheme::diffusive_nonlinear: return "diffusive_nonlinear";
        case Scheme::diffusive_linear: return "diffusive_linear";
    }
    return "?";
}

void UnravellingSpec::validate() const {
    if (H.rows() != H.cols()) throw ArgumentError("UnravellingSpec: H not square");
    for (const auto& c : channels)
        if (c.rows() != H.rows() || c.cols() != H.cols())
            throw ArgumentError("UnravellingSpec: channel dimension mismatch");
    if (scheme == Scheme::jump_linear) {
        if (ostensible_rates.size() != channels.size())
            throw ArgumentError("UnravellingSpec: need one ostensible rate per channel");
        for (double l : ostensible_rates)
            if (!(l > 0.0)) throw ArgumentError("UnravellingSpec: ostensible rate must be > 0");
    }
}

std::pair<Mat, Mat> measurement_operators(const Mat& H, const Mat& c, double dt, double hbar) {
    if (!(dt > 0.0)) throw ArgumentError("measurement_operators: dt must be positive");
    if (H.rows() != c.rows()) throw ArgumentError("measurement_operators: dim mismatch");
    const long d = H.rows();
    Mat omega0 = Mat::Identity(d, d) - (I / hbar * H + 0.5 * c.adjoint() * c) * dt;
    Mat omega1 = std::sqrt(dt) * c;
    return {omega0, omega1};
}

std::pair<Mat, Mat> homodyne_transform(const Mat& c, cplx beta, const Mat& H, double hbar) {
    Mat c2 = c + beta * Mat::Identity(c.rows(), c.cols());
    Mat H2 = H - 0.5 * I * hbar * (std::conj(beta) * c - beta * c.adjoint());
    return {c2, H2};
}

UnravellingSpec position_measurement_spec(const Mat& H_m, const Mat& Q, double k, double hbar) {
    if (k < 0.0) throw ArgumentError("position_measurement_spec: k must be >= 0");
    UnravellingSpec spec;
    spec.H = H_m;
    spec.channels = {Mat(std::sqrt(2.0 * k) * Q)};
    spec.scheme = Scheme::diffusive_linear;
    spec.hbar = hbar;
    return spec;
}

int step_jump_nonlinear(Vec& psi, const UnravellingSpec& spec, double dt, RngStream& rng) {
    const size_t nc = spec.channels.size();
    // jump probabilities <c†c> dt
    double total = 0.0;
    std::vector<double> p(nc);
    std::vector<Vec> cpsi(nc);
    for (size_t n = 0; n < nc; ++n) {
        cpsi[n] = spec.channels[n] * psi;
        p[n] = cpsi[n].squaredNorm() * dt; // psi is normalized
        total += p[n];
    }
    if (total > 0.1)
        throw NumericalError("step_jump_nonlinear: total jump probability " +
                             std::to_string(total) + " per step > 0.1, reduce dt");
    const double u = rng.uniform01();
    if (u <= total) {
        // at most one jump per step, channel by relative rate
        double acc = 0.0;
        for (size_t n = 0; n < nc; ++n) {
            acc += p[n];
            if (u <= acc || n + 1 == nc) {
                psi = cpsi[n] / cpsi[n].norm();
                return static_cast<int>(n);
            }
        }
    }
    // no-jump drift, then restore the norm
    Vec drift = -(I / spec.hbar) * (spec.H * psi);
    for (size_t n = 0; n < nc; ++n) drift -= 0.5 * (spec.channels[n].adjoint() * cpsi[n]);
    psi += dt * drift;
    psi /= psi.norm();
    return -1;
}

int step_jump_linear(Vec& psi, const UnravellingSpec& spec, double dt, RngStream& rng) {
    const size_t nc = spec.channels.size();
    double total = 0.0;
    for (double l : spec.ostensible_rates) total += l * dt;
    if (total >= 0.1)
        throw ConfigError("step_jump_linear: sum(lambda) * dt >= 0.1");
    const double u = rng.uniform01();
    if (u <= total) {
        double acc = 0.0;
        for (size_t n = 0; n < nc; ++n) {
            acc += spec.ostensible_rates[n] * dt;
            if (u <= acc || n + 1 == nc) {
                psi = (spec.channels[n] * psi) / std::sqrt(spec.ostensible_rates[n]);
                return static_cast<int>(n);
            }
        }
    }
    // no-jump: [1 - (iH/hbar + sum (c†c - lambda)/2) dt]
    Vec drift = -(I / spec.hbar) * (spec.H * psi);
    for (size_t n = 0; n < nc; ++n) {
        drift -= 0.5 * (spec.channels[n].adjoint() * (spec.channels[n] * psi));
        drift += 0.5 * spec.ostensible_rates[n] * psi;
    }
    psi += dt * drift;
    return -1;
}

void step_diffusive_nonlinear(Vec& psi, const UnravellingSpec& spec, double dt,
                              const double* dW) {
    Vec dpsi = -(I / spec.hbar) * (spec.H * psi) * dt;
    for (size_t n = 0; n < spec.channels.size(); ++n) {
        const Mat& c = spec.channels[n];
        Vec cpsi = c * psi;
        const cplx ec = psi.dot(cpsi); // <c> (psi normalized; dot conjugates psi)
        const cplx ecd = std::conj(ec);
        dpsi -= (0.5 * (c.adjoint() * cpsi) - ecd * cpsi + 0.5 * ecd * ec * psi) * dt;
        dpsi += (cpsi - ec * psi) * dW[n];
    }
    psi += dpsi;
    psi /= psi.norm();
}

void step_diffusive_linear(Vec& psi, const UnravellingSpec& spec, double dt, const double* dW) {
    Vec dpsi = -(I / spec.hbar) * (spec.H * psi) * dt;
    for (size_t n = 0; n < spec.channels.size(); ++n) {
        const Mat& c = spec.channels[n];
        Vec cpsi = c * psi;
        dpsi -= 0.5 * (c.adjoint() * cpsi) * dt;
        dpsi += cpsi * dW[n];
    }
    psi += dpsi;
}

Mat lindblad_rhs(const Mat& rho, const Mat& H, const std::vector<Mat>& channels, double hbar) {
    Mat out = -(I / hbar) * (H * rho - rho * H);
    for (const auto& c : channels) {
        Mat cd = c.adjoint();
        Mat cdc = cd * c;
        out += c * rho * cd - 0.5 * (cdc * rho + rho * cdc);
    }
    return out;
}

Mat master_evolve(const Mat& rho0, const Mat& H, const std::vector<Mat>& channels, double t,
                  double dt, double hbar) {
    if (!(dt > 0.0)) throw ArgumentError("master_evolve: dt must be positive");
    Mat rho = rho0;
    const double tr0 = rho.trace().real();
    long n_steps = static_cast<long>(std::round(t / dt));
    if (n_steps < 0) throw ArgumentError("master_evolve: negative time");
    for (long s = 0; s < n_steps; ++s) {
        Mat k1 = lindblad_rhs(rho, H, channels, hbar);
        Mat k2 = lindblad_rhs(rho + 0.5 * dt * k1, H, channels, hbar);
        Mat k3 = lindblad_rhs(rho + 0.5 * dt * k2, H, channels, hbar);
        Mat k4 = lindblad_rhs(rho + dt * k3, H, channels, hbar);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = 0.5 * (rho + rho.adjoint()); // hermiticity repair
        if (std::abs(rho.trace().real() - tr0) > 1e-6 * std::max(1.0, std::abs(tr0)))
            throw NumericalError("master_evolve: trace drift > 1e-6, reduce dt");
    }
    return rho;
}

namespace {

struct StepContext {
    const UnravellingSpec& spec;
    bool diffusive;
    bool linear;
    size_t nc;
    std::vector<double> dw_buf;
};

// advance one step; fills noise values used
inline int do_step(Vec& psi, StepContext& ctx, double dt, RngStream& rng,
                   NoiseRecord* record, double t_now) {
    if (ctx.diffusive) {
        const double sq = std::sqrt(dt);
        for (size_t n = 0; n < ctx.nc; ++n) ctx.dw_buf[n] = sq * rng.gaussian();
        if (record)
            for (size_t n = 0; n < ctx.nc; ++n) record->dW[n].push_back(ctx.dw_buf[n]);
        if (ctx.linear)
            step_diffusive_linear(psi, ctx.spec, dt, ctx.dw_buf.data());
        else
            step_diffusive_nonlinear(psi, ctx.spec, dt, ctx.dw_buf.data());
        return -1;
    }
    int ch = ctx.linear ? step_jump_linear(psi, ctx.spec, dt, rng)
                        : step_jump_nonlinear(psi, ctx.spec, dt, rng);
    if (record && ch >= 0) {
        record->jump_times.push_back(t_now + dt);
        record->jump_channels.push_back(ch);
    }
    return ch;
}

} // namespace

TrajectoryResult run_single(const UnravellingSpec& spec, const StateVector& psi0,
                            const TrajectoryOptions& opt, RngStream rng) {
    spec.validate();
    TrajectoryResult out;
    Vec psi = psi0.amps;
    const bool linear =
        spec.scheme == Scheme::jump_linear || spec.scheme == Scheme::diffusive_linear;
    if (!linear) psi /= psi.norm();
    const long n_steps = static_cast<long>(std::round(opt.t_final / opt.dt));
    StepContext ctx{spec,
                    spec.scheme == Scheme::diffusive_nonlinear ||
                        spec.scheme == Scheme::diffusive_linear,
                    linear, spec.channels.size(),
                    std::vector<double>(spec.channels.size())};
    NoiseRecord* rec = nullptr;
    if (opt.store_noise) {
        out.noise.dt = opt.dt;
        out.noise.dW.resize(ctx.diffusive ? ctx.nc : 0);
        rec = &out.noise;
    }
    auto store = [&](double t) {
        out.times.push_back(t);
        if (opt.store_states) {
            Vec v = psi;
            if (linear && v.norm() > 0.0) v /= v.norm();
            out.states.push_back(std::move(v));
        }
    };
    store(0.0);
    for (long s = 0; s < n_steps; ++s) {
        do_step(psi, ctx, opt.dt, rng, rec, static_cast<double>(s) * opt.dt);
        if ((s + 1) % opt.store_stride == 0 || s + 1 == n_steps)
            store(static_cast<double>(s + 1) * opt.dt);
    }
    out.weight = linear ? psi.squaredNorm() : 1.0;
    out.final_tail = fock_tail_population(StateVector{psi0.basis, psi});
    return out;
}

TrajectoryResult run_on_record(const UnravellingSpec& spec, const StateVector& psi0,
                               const TrajectoryOptions& opt, const NoiseRecord& noise) {
    spec.validate();
    TrajectoryResult out;
    Vec psi = psi0.amps;
    const bool linear =
        spec.scheme == Scheme::jump_linear || spec.scheme == Scheme::diffusive_linear;
    const bool diffusive = spec.scheme == Scheme::diffusive_nonlinear ||
                           spec.scheme == Scheme::diffusive_linear;
    if (!linear) psi /= psi.norm();
    const long n_steps = static_cast<long>(std::round(opt.t_final / opt.dt));
    std::vector<double> dw(spec.channels.size(), 0.0);
    size_t next_jump = 0;
    for (long s = 0; s < n_steps; ++s) {
        if (diffusive) {
            for (size_t n = 0; n < spec.channels.size(); ++n) dw[n] = noise.dW[n][s];
            if (linear)
                step_diffusive_linear(psi, spec, opt.dt, dw.data());
            else
                step_diffusive_nonlinear(psi, spec, opt.dt, dw.data());
        } else {
            const double t_end = static_cast<double>(s + 1) * opt.dt;
            bool jump = next_jump < noise.jump_times.size() &&
                        noise.jump_times[next_jump] <= t_end + 1e-12 * opt.dt;
            if (jump) {
                const int ch = noise.jump_channels[next_jump];
                ++next_jump;
                if (linear) {
                    psi = (spec.channels[ch] * psi) / std::sqrt(spec.ostensible_rates[ch]);
                } else {
                    psi = spec.channels[ch] * psi;
                    psi /= psi.norm();
                }
            } else {
                Vec drift = -(I / spec.hbar) * (spec.H * psi);
                for (size_t n = 0; n < spec.channels.size(); ++n) {
                    drift -= 0.5 * (spec.channels[n].adjoint() * (spec.channels[n] * psi));
                    if (linear) drift += 0.5 * spec.ostensible_rates[n] * psi;
                }
                psi += opt.dt * drift;
                if (!linear) psi /= psi.norm();
            }
        }
    }
    out.times = {opt.t_final};
    out.states = {psi};
    out.weight = linear ? psi.squaredNorm() : 1.0;
    out.final_tail = fock_tail_population(StateVector{psi0.basis, psi});
    return out;
}

namespace {

// per-(time, observable) weighted accumulators for one block of trajectories
struct BlockStats {
    std::vector<double> sw;        // sum of weights (per time)
    std::vector<cplx> swx;         // [obs*nt + t] sum w * <O>
    std::vector<double> swx2_re;   // sum w * Re<O>^2   (for stderr)
    std::vector<double> sw2x_re;   // sum w^2 * Re<O>^2 (ratio-estimator stderr)
    std::vector<cplx> sw2x;        // sum w^2 * <O>
    std::vector<double> sw2;       // per time
    std::vector<double> svar, svar2; // sum w*Var, sum w*Var^2
    double wmin = 1e300, wmax = -1e300;
    long tail_flagged = 0;

    void init(size_t nt, size_t nobs) {
        sw.assign(nt, 0.0);
        sw2.assign(nt, 0.0);
        swx.assign(nt * nobs, 0.0);
        swx2_re.assign(nt * nobs, 0.0);
        sw2x_re.assign(nt * nobs, 0.0);
        sw2x.assign(nt * nobs, 0.0);
        svar.assign(nt * nobs, 0.0);
        svar2.assign(nt * nobs, 0.0);
    }
};

} // namespace

EnsembleResult run_ensemble(const UnravellingSpec& spec, const StateVector& psi0,
                            const std::vector<Observable>& observables,
                            const EnsembleOptions& opt) {
    spec.validate();
    if (opt.n_traj < 1) throw ArgumentError("run_ensemble: n_traj must be >= 1");
    UnravellingSpec spec_run = spec;
    if (spec.scheme == Scheme::jump_linear) {
        // fill in default ostensible rates from a coarse master pre-run
        if (spec_run.ostensible_rates.empty())
            spec_run.ostensible_rates.assign(spec.channels.size(), 0.0);
        bool need = false;
        for (double l : spec_run.ostensible_rates) need = need || !(l > 0.0);
        if (need) {
            Mat rho = psi0.amps * psi0.amps.adjoint();
            rho /= rho.trace().real();
            const double dt_pre = opt.t_final / 64.0;
            std::vector<double> peak(spec.channels.size(), 0.0);
            for (int s = 0; s <= 64; ++s) {
                for (size_t n = 0; n < spec.channels.size(); ++n) {
                    const Mat& c = spec.channels[n];
                    double r = ((c.adjoint() * c * rho).trace()).real();
                    peak[n] = std::max(peak[n], r);
                }
                if (s < 64) rho = master_evolve(rho, spec.H, spec.channels, dt_pre,
                                                dt_pre / 8.0, spec.hbar);
            }
            for (size_t n = 0; n < spec.channels.size(); ++n)
                if (!(spec_run.ostensible_rates[n] > 0.0))
                    spec_run.ostensible_rates[n] = std::max(peak[n], 1e-12);
        }
    }

    const long n_steps = static_cast<long>(std::round(opt.t_final / opt.dt));
    std::vector<double> times;
    std::vector<long> store_steps;
    times.push_back(0.0);
    store_steps.push_back(0);
    for (long s = opt.store_stride; s < n_steps; s += opt.store_stride) {
        times.push_back(static_cast<double>(s) * opt.dt);
        store_steps.push_back(s);
    }
    times.push_back(static_cast<double>(n_steps) * opt.dt);
    store_steps.push_back(n_steps);
    const size_t nt = times.size();
    const size_t nobs = observables.size();

    const bool linear =
        spec.scheme == Scheme::jump_linear || spec.scheme == Scheme::diffusive_linear;
    const bool diffusive = spec.scheme == Scheme::diffusive_nonlinear ||
                           spec.scheme == Scheme::diffusive_linear;

    // fixed block decomposition, independent of thread count
    const long block_size = 64;
    const long n_blocks = (opt.n_traj + block_size - 1) / block_size;
    std::vector<BlockStats> blocks(n_blocks);

    std::atomic<long> next_block{0};
    std::atomic<bool> failed{false};
    std::string fail_msg;
    std::mutex fail_mutex;

    auto worker = [&]() {
        std::vector<Mat> ops(nobs), ops2(nobs);
        for (size_t o = 0; o < nobs; ++o) {
            ops[o] = observables[o].op;
            ops2[o] = observables[o].op * observables[o].op;
        }
        StepContext ctx{spec_run, diffusive, linear, spec_run.channels.size(),
                        std::vector<double>(spec_run.channels.size())};
        for (;;) {
            const long b = next_block.fetch_add(1);
            if (b >= n_blocks || failed.load()) break;
            BlockStats& st = blocks[b];
            st.init(nt, nobs);
            const long i0 = b * block_size;
            const long i1 = std::min<long>(opt.n_traj, i0 + block_size);
            try {
                for (long i = i0; i < i1; ++i) {
                    RngStream rng(opt.seed, static_cast<uint64_t>(i));
                    Vec psi = psi0.amps;
                    if (!linear) psi /= psi.norm();
                    size_t store_at = 0;
                    double max_tail = 0.0;
                    for (long s = 0; s <= n_steps; ++s) {
                        if (store_at < store_steps.size() && s == store_steps[store_at]) {
                            const double w = linear ? psi.squaredNorm() : 1.0;
                            const double n2 = psi.squaredNorm();
                            st.sw[store_at] += w;
                            st.sw2[store_at] += w * w;
                            for (size_t o = 0; o < nobs; ++o) {
                                const cplx m1 = (psi.adjoint() * (ops[o] * psi))(0) / n2;
                                const cplx m2 = (psi.adjoint() * (ops2[o] * psi))(0) / n2;
                                const size_t idx = o * nt + store_at;
                                st.swx[idx] += w * m1;
                                st.swx2_re[idx] += w * m1.real() * m1.real();
                                st.sw2x_re[idx] += w * w * m1.real() * m1.real();
                                st.sw2x[idx] += w * w * m1;
                                const double var = (m2 - m1 * m1).real();
                                st.svar[idx] += w * var;
                                st.svar2[idx] += w * var * var;
                            }
                            ++store_at;
                        }
                        if (s < n_steps)
                            do_step(psi, ctx, opt.dt, rng, nullptr,
                                    static_cast<double>(s) * opt.dt);
                        double tail = fock_tail_population(StateVector{psi0.basis, psi});
                        max_tail = std::max(max_tail, tail);
                    }
                    if (max_tail > opt.tail_tolerance) ++st.tail_flagged;
                    const double wfin = linear ? psi.squaredNorm() : 1.0;
                    st.wmin = std::min(st.wmin, wfin);
                    st.wmax = std::max(st.wmax, wfin);
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> g(fail_mutex);
                failed.store(true);
                fail_msg = std::string(e.what()) + " (trajectory block " + std::to_string(b) + ")";
            }
        }
    };

    const int nthreads = std::max(1, opt.n_threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw NumericalError("run_ensemble: " + fail_msg);

    // fixed-order reduction
    EnsembleResult out;
    out.times = times;
    for (const auto& o : observables) out.names.push_back(o.name);
    out.mean.assign(nobs, std::vector<cplx>(nt, 0.0));
    out.stderr_re.assign(nobs, std::vector<double>(nt, 0.0));
    out.cond_var_mean.assign(nobs, std::vector<double>(nt, 0.0));
    out.cond_var_spread.assign(nobs, std::vector<double>(nt, 0.0));
    out.min_weight = 1e300;
    out.max_weight = -1e300;

    std::vector<double> SW(nt, 0.0), SW2(nt, 0.0);
    std::vector<cplx> SWX(nt * nobs, 0.0), SW2X(nt * nobs, 0.0);
    std::vector<double> SWX2(nt * nobs, 0.0), SW2XR(nt * nobs, 0.0);
    std::vector<double> SV(nt * nobs, 0.0), SV2(nt * nobs, 0.0);
    for (long b = 0; b < n_blocks; ++b) {
        const BlockStats& st = blocks[b];
        for (size_t t = 0; t < nt; ++t) {
            SW[t] += st.sw[t];
            SW2[t] += st.sw2[t];
        }
        for (size_t i = 0; i < nt * nobs; ++i) {
            SWX[i] += st.swx[i];
            SWX2[i] += st.swx2_re[i];
            SW2XR[i] += st.sw2x_re[i];
            SW2X[i] += st.sw2x[i];
            SV[i] += st.svar[i];
            SV2[i] += st.svar2[i];
        }
        out.min_weight = std::min(out.min_weight, st.wmin);
        out.max_weight = std::max(out.max_weight, st.wmax);
        out.n_tail_flagged += st.tail_flagged;
    }
    for (size_t o = 0; o < nobs; ++o)
        for (size_t t = 0; t < nt; ++t) {
            const size_t idx = o * nt + t;
            const double sw = SW[t];
            const cplx mean = SWX[idx] / sw;
            out.mean[o][t] = mean;
            // ratio-estimator variance of the weighted mean (real part)
            const double num = SW2XR[idx] - 2.0 * mean.real() * SW2X[idx].real() +
                               mean.real() * mean.real() * SW2[t];
            out.stderr_re[o][t] = std::sqrt(std::max(0.0, num)) / sw;
            const double vmean = SV[idx] / sw;
            out.cond_var_mean[o][t] = vmean;
            out.cond_var_spread[o][t] =
                std::sqrt(std::max(0.0, SV2[idx] / sw - vmean * vmean));
        }
    return out;
}

void EnsembleResult::write_csv(const std::string& filename) const {
    std::ofstream f(filename);
    f.precision(12);
    f << "# units: t [1/rate units of the spec]; observables dimensionless unless stated\n";
    f << "t,obs_name,mean_re,mean_im,stderr,cond_var_mean\n";
    for (size_t o = 0; o < names.size(); ++o)
        for (size_t t = 0; t < times.size(); ++t)
            f << times[t] << "," << names[o] << "," << mean[o][t].real() << ","
              << mean[o][t].imag() << "," << stderr_re[o][t] << "," << cond_var_mean[o][t]
              << "\n";
}

} // namespace qtraj
