#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "scnoise/errors.hpp"
#include "scnoise/netlist.hpp"
#include "scnoise/noiseplan.hpp"

namespace scnoise {

// boost: ziggurat normals, and streams that do not depend on the standard library
using Rng = boost::random::mt19937_64;
using Normal = boost::random::normal_distribution<double>;

struct NoiseOptions {
    bool switches = true;
    bool otas = true;
};

struct NoiseSource {
    std::string element;
    int a = -1;  // free-node index, -1 = fixed node
    int b = -1;
    double psd = 0.0;  // one-sided, A^2/Hz
};

struct PhaseSystem {
    std::string phase;
    std::vector<std::string> nodes;  // free nodes (not ground, not sources)
    Eigen::MatrixXd cap;             // F
    Eigen::MatrixXd cond;            // S, includes OTA VCCS stamps
    std::vector<NoiseSource> sources;
};

struct McConfig {
    int runs = 1000;
    int periods = 10;
    std::optional<double> dt;  // empty = AUTO
    std::uint64_t seed = 1;
    std::optional<double> temperature;
    int record = 0;   // stride in steps, 0 = auto
    int threads = 0;  // 0 = hardware concurrency
    bool keep_traces = false;
    NoiseOptions noise;
};

struct TraceEnsemble {
    std::vector<std::string> phases;
    int readout_phase = 0;
    int runs = 0;
    int periods = 0;
    double dt = 0.0;
    int steps_per_phase = 0;
    int record = 0;
    double max_pole = 0.0;  // rad/s
    double min_pole = 0.0;
    std::vector<double> time;                      // s
    std::vector<double> rms;                       // V, per time point
    std::vector<std::vector<double>> traces;       // [run][point] when kept
    std::vector<double> readout_time;              // per period
    std::vector<double> readout_rms;               // per period
    std::vector<std::vector<double>> readout;      // [run][period]
    std::vector<std::vector<double>> phase_end_rms;  // [period][phase]
    std::vector<std::string> warnings;
};

struct ComparisonRow {
    int period = 0;
    double analytic_rms = 0.0;
    double mc_rms = 0.0;
    double rel_err = 0.0;
    double se = 0.0;
    bool pass = true;
};

struct ComparisonTable {
    int runs = 0;
    std::vector<ComparisonRow> rows;
    bool pass = true;
    std::vector<int> failing;  // periods
};

// ============================================================================
// Compilation
// ============================================================================

inline PhaseSystem compile_phase(const PhaseView& pv, double temperature, const NoiseOptions& opt = {}) {
    const Circuit& c = *pv.circuit;
    PhaseSystem s;
    s.phase = pv.phase;
    std::vector<int> idx(c.nodes.size(), -1);
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        if (c.is_fixed(c.nodes[i])) continue;
        idx[i] = static_cast<int>(s.nodes.size());
        s.nodes.push_back(c.nodes[i]);
    }
    const auto n = static_cast<Eigen::Index>(s.nodes.size());
    s.cap = Eigen::MatrixXd::Zero(n, n);
    s.cond = Eigen::MatrixXd::Zero(n, n);
    auto at = [&](const std::string& node) { return idx[c.node_index(node)]; };
    auto stamp = [](Eigen::MatrixXd& m, int a, int b, double v) {
        if (a >= 0) m(a, a) += v;
        if (b >= 0) m(b, b) += v;
        if (a >= 0 && b >= 0) {
            m(a, b) -= v;
            m(b, a) -= v;
        }
    };
    const double kt4 = 4.0 * kBoltzmann * temperature;

    // adjacency over caps and closed switches for the island check
    std::vector<std::vector<int>> adj(c.nodes.size());
    auto link = [&](const std::string& x, const std::string& y) {
        int i = c.node_index(x), j = c.node_index(y);
        adj[i].push_back(j);
        adj[j].push_back(i);
    };

    for (const auto& cap : c.capacitors) {
        stamp(s.cap, at(cap.a), at(cap.b), cap.value);
        link(cap.a, cap.b);
    }
    for (auto i : pv.closed) {
        const auto& sw = c.switches[i];
        stamp(s.cond, at(sw.a), at(sw.b), sw.gon);
        s.sources.push_back({sw.name, at(sw.a), at(sw.b), opt.switches ? kt4 * sw.gon : 0.0});
        link(sw.a, sw.b);
    }
    for (const auto& o : c.otas) {
        int in = at(o.input), out = at(o.output);
        // gm*V(in) leaves the output node
        if (out >= 0 && in >= 0) s.cond(out, in) += o.gm;
        s.sources.push_back({o.name, out, -1, opt.otas ? kt4 * o.gamma * o.gm : 0.0});
    }

    std::vector<bool> seen(c.nodes.size(), false);
    std::vector<int> stack;
    for (std::size_t i = 0; i < c.nodes.size(); ++i)
        if (idx[i] < 0) {
            seen[i] = true;
            stack.push_back(static_cast<int>(i));
        }
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        for (int j : adj[i])
            if (!seen[j]) {
                seen[j] = true;
                stack.push_back(j);
            }
    }
    for (std::size_t i = 0; i < c.nodes.size(); ++i)
        if (!seen[i]) throw AnalysisError("floating island: node " + c.nodes[i] + " has no path to a fixed node in phase " + pv.phase);
    return s;
}

// Finite nonzero natural frequencies (rad/s) of C dv/dt = -G v.
inline std::vector<std::complex<double>> poles(const PhaseSystem& s) {
    std::vector<std::complex<double>> out;
    if (s.nodes.empty()) return out;
    const double cs = s.cap.cwiseAbs().maxCoeff(), gs = s.cond.cwiseAbs().maxCoeff();
    if (cs == 0.0 || gs == 0.0) return out;
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(-s.cond / gs, s.cap / cs, false);
    std::vector<std::complex<double>> all;
    double biggest = 0.0;
    for (Eigen::Index i = 0; i < ges.alphas().size(); ++i) {
        std::complex<double> a = ges.alphas()(i);
        double b = ges.betas()(i);
        if (std::abs(b) <= 1e-10 * std::abs(a) || b == 0.0) continue;  // infinite
        std::complex<double> l = a / b * (gs / cs);
        if (!std::isfinite(l.real()) || !std::isfinite(l.imag())) continue;
        all.push_back(l);
        biggest = std::max(biggest, std::abs(l));
    }
    for (auto l : all)
        if (std::abs(l) > 1e-9 * biggest) out.push_back(l);
    return out;
}

// ============================================================================
// Time stepping
// ============================================================================

// Precomputed backward-Euler map v' = A v + B z, z ~ N(0, I).
struct PhaseStepper {
    int n = 0;
    int m = 0;
    std::vector<double> a;  // n*n row-major
    std::vector<double> b;  // n*m row-major

    void advance(std::vector<double>& v, std::vector<double>& tmp, std::vector<double>& z, Rng& rng, Normal& normal) const {
        for (int k = 0; k < m; ++k) z[k] = normal(rng);
        switch (n) {
            case 1: return kernel<1>(v, tmp, z);
            case 2: return kernel<2>(v, tmp, z);
            case 3: return kernel<3>(v, tmp, z);
            case 4: return kernel<4>(v, tmp, z);
            case 5: return kernel<5>(v, tmp, z);
            case 6: return kernel<6>(v, tmp, z);
            case 7: return kernel<7>(v, tmp, z);
            case 8: return kernel<8>(v, tmp, z);
            default: return kernel<0>(v, tmp, z);
        }
    }

private:
    // N > 0: size known at compile time so the inner loops unroll
    template <int N>
    void kernel(std::vector<double>& v, std::vector<double>& tmp, const std::vector<double>& z) const {
        const int nn = N > 0 ? N : n;
        const double* av = a.data();
        const double* bv = b.data();
        for (int i = 0; i < nn; ++i) {
            double acc = 0.0;
            for (int j = 0; j < nn; ++j) acc += av[i * nn + j] * v[j];
            for (int k = 0; k < m; ++k) acc += bv[i * m + k] * z[k];
            tmp[i] = acc;
        }
        v.swap(tmp);
    }
};

inline PhaseStepper make_stepper(const PhaseSystem& s, double dt) {
    if (!(dt > 0.0)) throw Error("dt must be positive");
    const auto n = static_cast<Eigen::Index>(s.nodes.size());
    Eigen::MatrixXd cdt = s.cap / dt;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cdt + s.cond);
    if (n > 0 && !lu.isInvertible())
        throw AnalysisError("singular (C/dt + G) in phase " + s.phase + " (floating island?)");
    std::vector<const NoiseSource*> live;
    for (const auto& src : s.sources)
        if (src.psd > 0.0) live.push_back(&src);
    Eigen::MatrixXd inj = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k) {
        double sigma = std::sqrt(live[k]->psd / (2.0 * dt));
        if (live[k]->a >= 0) inj(live[k]->a, static_cast<Eigen::Index>(k)) += sigma;
        if (live[k]->b >= 0) inj(live[k]->b, static_cast<Eigen::Index>(k)) -= sigma;
    }
    PhaseStepper st;
    st.n = static_cast<int>(n);
    st.m = static_cast<int>(live.size());
    if (n == 0) return st;
    // without conductance the map is exactly the identity: open phases freeze charge bit-for-bit
    Eigen::MatrixXd am = s.cond.isZero(0.0) ? Eigen::MatrixXd::Identity(n, n) : Eigen::MatrixXd(lu.solve(cdt));
    Eigen::MatrixXd bm = lu.solve(inj);
    st.a.resize(static_cast<std::size_t>(n * n));
    st.b.resize(static_cast<std::size_t>(n) * live.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) st.a[static_cast<std::size_t>(i * n + j)] = am(i, j);
        for (Eigen::Index k = 0; k < bm.cols(); ++k) st.b[static_cast<std::size_t>(i * bm.cols() + k)] = bm(i, k);
    }
    return st;
}

inline Eigen::VectorXd step(const PhaseSystem& s, const Eigen::VectorXd& v, double dt, Rng& rng) {
    auto st = make_stepper(s, dt);
    std::vector<double> x(v.data(), v.data() + v.size()), tmp(x.size()), z(static_cast<std::size_t>(st.m));
    Normal normal;
    st.advance(x, tmp, z, rng, normal);
    return Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline Rng run_rng(std::uint64_t seed, std::uint64_t run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32), 0x5c4e01u};
    return Rng(seq);
}

// ============================================================================
// Ensemble
// ============================================================================

inline TraceEnsemble run(const Circuit& c, const McConfig& cfg) {
    if (cfg.runs < 1) throw Error("runs must be >= 1");
    if (cfg.periods < 1) throw Error("periods must be >= 1");
    if (cfg.dt && !(*cfg.dt > 0.0)) throw Error("dt must be positive");
    if (!(c.fs > 0.0)) throw AnalysisError("simulation needs 'fs'");
    if (!c.readout) throw AnalysisError("simulation needs a readout");
    const double temperature = cfg.temperature.value_or(c.temperature);
    const int nph = static_cast<int>(c.phases.size());
    const double tph = 1.0 / (c.fs * nph);

    TraceEnsemble out;
    out.phases = c.phases;
    out.readout_phase = c.phase_index(c.readout->phase);
    out.runs = cfg.runs;
    out.periods = cfg.periods;

    std::vector<PhaseSystem> sys;
    std::vector<std::vector<std::complex<double>>> pz;
    double pmax = 0.0, pmin = 0.0;
    for (const auto& p : c.phases) {
        sys.push_back(compile_phase(phase_view(c, p), temperature, cfg.noise));
        pz.push_back(poles(sys.back()));
        for (auto l : pz.back()) {
            pmax = std::max(pmax, std::abs(l));
            pmin = pmin == 0.0 ? std::abs(l) : std::min(pmin, std::abs(l));
        }
    }
    out.max_pole = pmax;
    out.min_pole = pmin;
    int steps = 1;
    if (cfg.dt) steps = std::max(1, static_cast<int>(std::llround(tph / *cfg.dt)));
    else if (pmax > 0.0) steps = static_cast<int>(std::ceil(tph * 20.0 * pmax - 1e-9));
    steps = std::max(steps, 1);
    const double dt = tph / steps;
    out.dt = dt;
    out.steps_per_phase = steps;

    for (int p = 0; p < nph; ++p) {
        double worst = 0.0;
        for (auto l : pz[p]) worst = std::max(worst, std::pow(1.0 / std::abs(1.0 - l * dt), steps));
        if (worst > 1e-3) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "phase %s: Ron\xC2\xB7" "C or Ceq/Gm not \xE2\x89\xAA T/2 (slowest mode keeps %.3g of its value)",
                          c.phases[p].c_str(), worst);
            out.warnings.emplace_back(buf);
        }
    }

    std::vector<PhaseStepper> stepper;
    for (const auto& s : sys) stepper.push_back(make_stepper(s, dt));
    const int stride = cfg.record > 0 ? cfg.record : std::max(1, steps / 8);
    out.record = stride;
    std::vector<int> marks;  // step indices recorded within a phase
    for (int j = 0; j < steps; ++j)
        if ((j + 1) % stride == 0 || j == steps - 1) marks.push_back(j);

    out.time.push_back(0.0);
    for (int k = 0; k < cfg.periods; ++k)
        for (int p = 0; p < nph; ++p)
            for (int j : marks) out.time.push_back((static_cast<double>(k * nph + p) * steps + j + 1) * dt);
    const std::size_t npts = out.time.size();
    for (int k = 0; k < cfg.periods; ++k)
        out.readout_time.push_back((static_cast<double>(k * nph + out.readout_phase + 1)) * tph);

    const int ra = [&] {
        auto it = std::find(sys[0].nodes.begin(), sys[0].nodes.end(), c.readout->port.a);
        return it == sys[0].nodes.end() ? -1 : static_cast<int>(it - sys[0].nodes.begin());
    }();
    const int rb = [&] {
        auto it = std::find(sys[0].nodes.begin(), sys[0].nodes.end(), c.readout->port.b);
        return it == sys[0].nodes.end() ? -1 : static_cast<int>(it - sys[0].nodes.begin());
    }();
    const int n = static_cast<int>(sys[0].nodes.size());
    int max_m = 0;
    for (const auto& st : stepper) max_m = std::max(max_m, st.m);

    struct RunOut {
        std::vector<double> trace;
        std::vector<double> ends;  // periods * nph
    };
    auto simulate = [&](int r, RunOut& ro) {
        Rng rng = run_rng(cfg.seed, static_cast<std::uint64_t>(r));
        Normal normal;
        std::vector<double> v(static_cast<std::size_t>(n), 0.0), tmp(v.size()), z(static_cast<std::size_t>(max_m));
        ro.trace.assign(npts, 0.0);
        ro.ends.assign(static_cast<std::size_t>(cfg.periods * nph), 0.0);
        auto readout = [&] { return (ra >= 0 ? v[ra] : 0.0) - (rb >= 0 ? v[rb] : 0.0); };
        std::size_t pt = 1;
        for (int k = 0; k < cfg.periods; ++k)
            for (int p = 0; p < nph; ++p) {
                const auto& st = stepper[p];
                std::size_t mi = 0;
                for (int j = 0; j < steps; ++j) {
                    st.advance(v, tmp, z, rng, normal);
                    if (mi < marks.size() && marks[mi] == j) {
                        ro.trace[pt++] = readout();
                        ++mi;
                    }
                }
                ro.ends[static_cast<std::size_t>(k * nph + p)] = readout();
            }
    };

    int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, cfg.runs);
    const int block = std::max(1, threads * 8);

    std::vector<double> sumsq(npts, 0.0);
    std::vector<double> end_sumsq(static_cast<std::size_t>(cfg.periods * nph), 0.0);
    out.readout.assign(static_cast<std::size_t>(cfg.runs), std::vector<double>(static_cast<std::size_t>(cfg.periods)));
    if (cfg.keep_traces) out.traces.resize(static_cast<std::size_t>(cfg.runs));

    std::vector<RunOut> buf(static_cast<std::size_t>(block));
    for (int base = 0; base < cfg.runs; base += block) {
        const int count = std::min(block, cfg.runs - base);
        if (threads == 1) {
            for (int i = 0; i < count; ++i) simulate(base + i, buf[static_cast<std::size_t>(i)]);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t)
                pool.emplace_back([&] {
                    for (int i = next++; i < count; i = next++) simulate(base + i, buf[static_cast<std::size_t>(i)]);
                });
            for (auto& th : pool) th.join();
        }
        // reduce in run order so results do not depend on scheduling
        for (int i = 0; i < count; ++i) {
            auto& ro = buf[static_cast<std::size_t>(i)];
            for (std::size_t q = 0; q < npts; ++q) sumsq[q] += ro.trace[q] * ro.trace[q];
            for (std::size_t q = 0; q < end_sumsq.size(); ++q) end_sumsq[q] += ro.ends[q] * ro.ends[q];
            auto& rd = out.readout[static_cast<std::size_t>(base + i)];
            for (int k = 0; k < cfg.periods; ++k) rd[static_cast<std::size_t>(k)] = ro.ends[static_cast<std::size_t>(k * nph + out.readout_phase)];
            if (cfg.keep_traces) out.traces[static_cast<std::size_t>(base + i)] = ro.trace;
        }
    }

    out.rms.resize(npts);
    for (std::size_t q = 0; q < npts; ++q) out.rms[q] = std::sqrt(sumsq[q] / cfg.runs);
    out.phase_end_rms.assign(static_cast<std::size_t>(cfg.periods), std::vector<double>(static_cast<std::size_t>(nph)));
    for (int k = 0; k < cfg.periods; ++k)
        for (int p = 0; p < nph; ++p)
            out.phase_end_rms[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)] =
                std::sqrt(end_sumsq[static_cast<std::size_t>(k * nph + p)] / cfg.runs);
    for (int k = 0; k < cfg.periods; ++k)
        out.readout_rms.push_back(out.phase_end_rms[static_cast<std::size_t>(k)][static_cast<std::size_t>(out.readout_phase)]);
    return out;
}

// ============================================================================
// Statistics and comparison
// ============================================================================

inline double standard_error(double rms, int runs) { return rms * std::sqrt(1.0 / (2.0 * runs)); }

// RMS pooled over readouts of periods first..last (1-based, inclusive).
inline double pooled_rms(const TraceEnsemble& mc, int first, int last) {
    first = std::max(first, 1);
    last = std::min(last, mc.periods);
    double s = 0.0;
    long count = 0;
    for (const auto& r : mc.readout)
        for (int k = first; k <= last; ++k) {
            s += r[static_cast<std::size_t>(k - 1)] * r[static_cast<std::size_t>(k - 1)];
            ++count;
        }
    return count ? std::sqrt(s / static_cast<double>(count)) : 0.0;
}

// Per-period variance growth from mean squared increments at lags 1..max_lag,
// fitted as M_k = k*slope + offset. Readouts before `first` are skipped.
inline double increment_slope(const TraceEnsemble& mc, int first, int max_lag) {
    std::vector<double> lag, msd;
    for (int k = 1; k <= max_lag; ++k) {
        double s = 0.0;
        long count = 0;
        for (const auto& r : mc.readout)
            for (int i = first - 1; i + k < mc.periods; ++i) {
                double d = r[static_cast<std::size_t>(i + k)] - r[static_cast<std::size_t>(i)];
                s += d * d;
                ++count;
            }
        if (count == 0) break;
        lag.push_back(k);
        msd.push_back(s / static_cast<double>(count));
    }
    if (lag.size() < 2) throw Error("increment_slope: not enough periods");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lag.size(); ++i) {
        mx += lag[i];
        my += msd[i];
    }
    mx /= static_cast<double>(lag.size());
    my /= static_cast<double>(lag.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lag.size(); ++i) {
        sxy += (lag[i] - mx) * (msd[i] - my);
        sxx += (lag[i] - mx) * (lag[i] - mx);
    }
    return sxy / sxx;
}

inline bool within(double mc, double analytic, double se, double rel = 0.05) {
    return std::abs(mc - analytic) <= std::max(3.0 * se, rel * std::abs(analytic));
}

inline ComparisonTable compare(const NoiseReport& analytic, const TraceEnsemble& mc) {
    if (static_cast<int>(analytic.series.size()) != mc.periods)
        throw Error("compare: analytic report has " + std::to_string(analytic.series.size()) +
                    " periods, simulation has " + std::to_string(mc.periods));
    ComparisonTable t;
    t.runs = mc.runs;
    for (int k = 0; k < mc.periods; ++k) {
        ComparisonRow row;
        row.period = k + 1;
        row.analytic_rms = std::sqrt(analytic.series[static_cast<std::size_t>(k)]);
        row.mc_rms = mc.readout_rms[static_cast<std::size_t>(k)];
        row.rel_err = row.analytic_rms > 0 ? (row.mc_rms - row.analytic_rms) / row.analytic_rms : 0.0;
        row.se = standard_error(row.mc_rms, mc.runs);
        row.pass = within(row.mc_rms, row.analytic_rms, row.se);
        if (!row.pass) {
            t.pass = false;
            t.failing.push_back(row.period);
        }
        t.rows.push_back(row);
    }
    return t;
}

// First period whose readout variance is within `tol` of steady state.
inline int converged_from(const NoiseReport& r, double tol = 1e-3) {
    if (!r.sampled_ss || !r.total_ss || *r.sampled_ss <= 0.0) return 1;
    const double l2 = r.recursion.lambda * r.recursion.lambda;
    if (l2 == 0.0) return 2;
    const double k = std::log(tol * *r.total_ss / *r.sampled_ss) / std::log(l2);
    return 1 + std::max(1, static_cast<int>(std::ceil(k)));
}

struct PooledCheck {
    int first = 0;
    int last = 0;
    double analytic_rms = 0.0;
    double mc_rms = 0.0;
    double se = 0.0;
    double rel_err = 0.0;
    bool pass = false;
};

// MC readouts pooled over periods first..last against the analytic mean over the same periods.
inline PooledCheck pooled_compare(const NoiseReport& r, const TraceEnsemble& mc, int first, int last = 0) {
    if (last <= 0) last = mc.periods;
    if (static_cast<int>(r.series.size()) < last) throw Error("pooled_compare: analytic series too short");
    if (first < 1 || first > last) throw Error("pooled_compare: empty period window");
    PooledCheck p;
    p.first = first;
    p.last = last;
    double s = 0.0;
    for (int k = first; k <= last; ++k) s += r.series[static_cast<std::size_t>(k - 1)];
    p.analytic_rms = std::sqrt(s / (last - first + 1));
    p.mc_rms = pooled_rms(mc, first, last);
    p.se = standard_error(p.mc_rms, mc.runs);
    p.rel_err = p.analytic_rms > 0 ? (p.mc_rms - p.analytic_rms) / p.analytic_rms : 0.0;
    p.pass = within(p.mc_rms, p.analytic_rms, p.se);
    return p;
}

// ============================================================================
// CSV
// ============================================================================

inline void write_rms_csv(std::ostream& os, const TraceEnsemble& mc) {
    char line[96];
    os << "time_s,rms_v\n";
    for (std::size_t i = 0; i < mc.time.size(); ++i) {
        std::snprintf(line, sizeof line, "%.9e,%.9e\n", mc.time[i], mc.rms[i]);
        os << line;
    }
}

inline void write_runs_csv(std::ostream& os, const TraceEnsemble& mc) {
    if (mc.traces.empty()) throw Error("per-run traces were not kept (set keep_traces)");
    char line[96];
    os << "time_s,run,node_v\n";
    for (std::size_t r = 0; r < mc.traces.size(); ++r)
        for (std::size_t i = 0; i < mc.time.size(); ++i) {
            std::snprintf(line, sizeof line, "%.9e,%zu,%.9e\n", mc.time[i], r, mc.traces[r][i]);
            os << line;
        }
}

}  // namespace scnoise
