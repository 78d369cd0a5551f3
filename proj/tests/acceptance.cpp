// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "oracle.hpp"
#include "pfdlab/loop_sim.hpp"
#include "pfdlab/measure.hpp"

using namespace pfdlab;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) ok = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (cond ? "" : " [x]");
    }
};

std::string f(const char* fmt, double a, double b = 0, double c = 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b, c);
    return buf;
}

int failures = 0;

void criterion(int n, const char* name, double budget_s, const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.require(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0) c.require(s < budget_s, f("runtime %.2f s < %.0f s", s, budget_s));
    if (!c.ok) ++failures;
    std::printf("[%s] %2d %-22s %s (%.2f s)\n", c.ok ? "PASS" : "FAIL", n, name, c.detail.c_str(), s);
    std::fflush(stdout);
}

PfdImpl unbuffered() { return PfdImpl::switch_level(SimModel::compile(build_reference_pfd())); }

Fs first_change(const WaveformSet& w, const std::string& net, Fs after, Logic v) {
    for (const auto& t : w.trace(net))
        if (t.time > after && t.value == v) return t.time;
    return -1;
}

int oracle_mismatches(const PfdImpl& sw, int n, std::uint64_t seed, bool clocked, double freq = 0) {
    PfdConfig cfg;
    cfg.t_setup = 0;
    const Fs sep = 5 * sw.max_delay();
    int bad = 0;
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
        auto o = clocked ? testing::random_clocked_stimulus(rng, freq, sep, 20) : testing::random_oracle_stimulus(rng, sep, 40);
        if (!testing::compare_with_behavioral(sw, cfg, o).match) ++bad;
    }
    return bad;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double max_rel_diff(const LockReport& a, const LockReport& b) {
    double diff = 0, scale = 0;
    if (a.v_ctrl_trace.size() != b.v_ctrl_trace.size()) return INFINITY;
    for (std::size_t i = 0; i < a.v_ctrl_trace.size(); ++i) {
        diff = std::max(diff, std::abs(a.v_ctrl_trace[i].v - b.v_ctrl_trace[i].v));
        scale = std::max(scale, std::abs(b.v_ctrl_trace[i].v));
    }
    return diff / scale;
}

}  // namespace

int main() {
    criterion(1, "golden replay", 1, [](Check& c) {
        auto m = SimModel::compile(build_reference_pfd());
        Stimulus s;
        s.edges = {{"Ref", 0, Logic::Zero}, {"Div", 0, Logic::Zero}, {"Ref", 100'000, Logic::One},
                   {"Div", 300'000, Logic::One}};
        auto w = run(m, s, 500'000);
        c.require(w.value_at("W1", 99'000) == Logic::One, "W1=1 before Ref");
        const Fs x1 = first_change(w, "X", 100'000, Logic::One);
        c.require(x1 > 100'000 && x1 < 300'000, "cycle 1 X->1");
        c.require(w.value_at("Y", 299'000) == Logic::Zero, "cycle 1 Y=0");
        const Fs y2 = first_change(w, "Y", 300'000, Logic::One), x2 = first_change(w, "X", 300'000, Logic::Zero);
        c.require(y2 > 0 && x2 > y2, "cycle 2 Y->1 then X->0");
    });

    criterion(2, "dead zone", 10, [](Check& c) {
        const Fs b = measure_dead_zone(PfdImpl::behavioral({}), 1e9);
        const Fs s = measure_dead_zone(calibrated_reference(), 1e9);
        c.require(std::abs(b - 40'000) <= 1'000, f("behavioral %.3f ps", b / 1e3));
        c.require(std::abs(s - 40'000) <= 2'000, f("calibrated switch %.3f ps", s / 1e3));
    });

    criterion(3, "blind zone", 10, [](Check& c) {
        for (double fr : {1e9, 2e9, 3e9}) {
            const Fs z = measure_blind_zone(PfdImpl::behavioral({}), fr).window;
            c.require(z == 0, f("%.0f GHz %.0f fs", fr / 1e9, static_cast<double>(z)));
        }
        for (double fr : {1e9, 2e9, 3e9}) {
            const Fs z = measure_blind_zone(PfdImpl::behavioral(PfdConfig::comparison_preset(fr)), fr).window;
            const double want = static_cast<double>(period_of(fr)) / 10;
            c.require(std::abs(z - want) <= 1'000, f("preset %.0f GHz %.2f ps", fr / 1e9, z / 1e3));
        }
    });

    criterion(4, "transfer curve", 60, [](Check& c) {
        const double T = static_cast<double>(period_of(1e9));
        for (auto [name, pfd] : {std::pair{std::string("behavioral"), PfdImpl::behavioral({})},
                                 std::pair{std::string("calibrated"), calibrated_reference()}}) {
            auto curve = transfer_sweep(pfd, 1e9, 201);
            const auto& p = curve.points;
            double worst = 0;
            bool monotone = true, flat_inside = true, sloped_outside = true;
            for (std::size_t i = 0; i < p.size(); ++i) {
                worst = std::max(worst, std::abs(p[i].output + p[p.size() - 1 - i].output));
                const double dt = std::abs(p[i].delta_phi) / kTwoPi * T;
                if (i > 0 && p[i].output < p[i - 1].output - 1e-12) monotone = false;
                if (dt < 40'000 - 1'000 && p[i].output != 0) flat_inside = false;
                if (dt > 40'000 + 1'000 && (p[i].output == 0 || (p[i].output > 0) != (p[i].delta_phi > 0)))
                    sloped_outside = false;
                if (i > 0 && dt > 40'000 + 1'000 && std::abs(p[i - 1].delta_phi) / kTwoPi * T > 40'000 + 1'000 &&
                    !(p[i].output > p[i - 1].output))
                    sloped_outside = false;
            }
            c.require(worst < 0.01, name + f(" max |pair sum| %.2g", worst));
            c.require(monotone && sloped_outside, name + " monotone outside +-40 ps");
            c.require(flat_inside, name + " flat only inside +-40 ps");
        }
    });

    criterion(5, "pulse width anchor", 0, [](Check& c) {
        const double w = pulse_width_at(PfdImpl::behavioral({}), 0.1 * kPi, 1e9).mean;
        c.require(std::abs(w - 50'000) <= 1'000, f("phi=0.1pi width %.3f ps", w / 1e3));
    });

    criterion(6, "PVT envelope", 60, [](Check& c) {
        auto g = pvt_sweep(PfdImpl::behavioral({}), PvtModel{}, default_pvt_temps(), default_pvt_vdds(), 0.1 * kPi, 1e9);
        double ratio = 0;
        for (double t : g.temps) ratio += g.width(t, 1.1) / g.width(t, 0.9);
        ratio /= static_cast<double>(g.temps.size());
        const double tr = g.width(100, 1.0) / g.width(25, 1.0);
        const double lo = g.width(-25, 0.9), hi = g.width(125, 1.1);
        c.require(std::abs(ratio - 1.10) <= 0.02, f("1.1V/0.9V %.4f", ratio));
        c.require(std::abs(tr - 1.055) <= 0.01, f("100C/25C %.4f", tr));
        c.require(std::abs(lo - 44'000) <= 1'000, f("(-25C,0.9V) %.2f ps", lo / 1e3));
        c.require(std::abs(hi - 52'000) <= 1'000, f("(125C,1.1V) %.2f ps", hi / 1e3));
    });

    criterion(7, "Monte Carlo", 300, [](Check& c) {
        McOptions o;
        o.seed = 1;
        auto r = monte_carlo(calibrated_reference(), o);
        c.require(r.samples == 5000, f("%.0f samples", static_cast<double>(r.samples)));
        c.require(std::abs(r.mean_up - 97'700) <= 3'000, f("up %.2f +- %.2f ps", r.mean_up / 1e3, r.std_up / 1e3));
        c.require(std::abs(r.mean_down - 97'480) <= 3'000,
                  f("down %.2f +- %.2f ps", r.mean_down / 1e3, r.std_down / 1e3));

        const fs::path root = fs::temp_directory_path() / "pfdlab-acceptance-mc";
        fs::remove_all(root);
        std::ostringstream sink;
        const char* threads[] = {"1", "4"};
        for (int k = 0; k < 2; ++k) {
            setenv("PFDLAB_THREADS", threads[k], 1);
            cli::run({"montecarlo", "--seed", "1", "--out", (root / threads[k]).string()}, sink, sink);
        }
        unsetenv("PFDLAB_THREADS");
        bool same = true;
        for (const char* file : {"montecarlo.json", "mc_hist_up.csv", "mc_hist_down.csv", "mc_samples.csv"}) {
            const auto a = slurp(root / "1" / file);
            same = same && !a.empty() && a == slurp(root / "4" / file);
        }
        fs::remove_all(root);
        c.require(same, "reports byte-identical for seed 1 on 1 and 4 threads");
    });

    criterion(8, "oracle equivalence", 0, [](Check& c) {
        const int n = 1000;
        const int u = oracle_mismatches(unbuffered(), n, 0, false);
        const int k = oracle_mismatches(calibrated_reference(), n, 0, false);
        c.require(u == 0, f("unbuffered %.0f/%.0f mismatches", u, n));
        c.require(k == 0, f("calibrated %.0f/%.0f mismatches", k, n));
    });

    criterion(9, "loop properties", 0, [](Check& c) {
        LoopConfig base;
        const double e1 = max_rel_diff(run_loop(base, 300), run_fixed_step(base, 300));
        LoopConfig shunt = base;
        shunt.filter.c2 = 1e-12;
        const double e2 = max_rel_diff(run_loop(shunt, 300), run_fixed_step(shunt, 300));
        c.require(e1 < 1e-3, f("R-C oracle %.2g%%", 100 * e1));
        c.require(e2 < 1e-3, f("R-C-C oracle %.2g%%", 100 * e2));

        auto r = run_lock(base, 5000);
        const double target = base.f_ref * base.divider_n;
        c.require(r.locked && std::abs(r.final_freq - target) <= 1e-3 * target,
                  f("lock at %.1f ns, f=%.6g Hz", r.lock_time / 1e6, r.final_freq));

        std::mt19937_64 rng(2024);
        std::uniform_int_distribution<Fs> reset(5'000, 50'000);
        std::uniform_real_distribution<double> ratio(0.8, 1.2);
        int ok = 0;
        for (int k = 0; k < 20; ++k) {
            LoopConfig m;
            m.pfd.t_setup = 0;
            m.pfd.t_reset = reset(rng);
            m.icp_down = m.icp_up * ratio(rng);
            m.lock_tolerance = 20e-12;
            auto q = run_loop(m, 3000);
            if (q.locked && (q.steady_phase_error > 0) == (m.icp_down > m.icp_up)) ++ok;
        }
        c.require(ok == 20, f("mismatch sign %.0f/20", ok));
    });

    criterion(10, "3 GHz operation", 0, [](Check& c) {
        const int n = 1000;
        const int u = oracle_mismatches(unbuffered(), n, 1000, true, 3e9);
        c.require(u == 0, f("clocked 3 GHz %.0f/%.0f mismatches", u, n));
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
