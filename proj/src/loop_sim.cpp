#include "pfdlab/loop_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pfdlab {

const char* to_string(LoopMode mode) { return mode == LoopMode::PLL ? "PLL" : "DLL"; }

void LoopConfig::check() const {
    if (!(f_ref > 0)) throw std::invalid_argument("f_ref must be > 0");
    if (!(filter.c1 > 0)) throw std::invalid_argument("C1 must be > 0");
    if (filter.c2 && !(*filter.c2 > 0)) throw std::invalid_argument("C2 must be > 0 when present");
    if (filter.r < 0) throw std::invalid_argument("R must be >= 0");
    if (filter.c2 && !(filter.r > 0)) throw std::invalid_argument("a second pole needs R > 0");
    if (divider_n < 1) throw std::invalid_argument("divider_n must be >= 1");
    if (icp_up < 0 || icp_down < 0) throw std::invalid_argument("charge-pump currents must be >= 0");
    if (lock_cycles < 1) throw std::invalid_argument("lock_cycles must be >= 1");
    if (!(vdd > 0)) throw std::invalid_argument("vdd must be > 0");
    pfd.check();
}

double LoopConfig::lock_tolerance_s() const {
    if (lock_tolerance) return *lock_tolerance;
    return to_seconds(pfd.threshold()) + 0.01 / f_ref;
}

double LoopState::current(const LoopConfig& cfg) const {
    const bool up_on = up && (down || up_confirmed);
    const bool down_on = down && (up || down_confirmed);
    return (up_on ? cfg.icp_up : 0.0) - (down_on ? cfg.icp_down : 0.0) - cfg.leakage;
}

namespace {

constexpr double kFs = 1e-15;

double cycles_of(const LoopState& s) { return s.vco_phase / kTwoPi; }

/// Discrete PFD / charge-pump bookkeeping shared by both integrators;
/// the continuous part is supplied by the caller.
class LoopCore {
public:
    LoopCore(const LoopConfig& cfg, LoopState& s) : cfg_(cfg), s_(s), period_(period_of(cfg.f_ref)) {}

    Fs period() const { return period_; }

    void add_charge(double q) {
        if (cfg_.filter.c2) s_.v_c2 += q / *cfg_.filter.c2;
        else s_.v_c1 += q / cfg_.filter.c1;
    }

    void refresh_vctrl() {
        if (cfg_.filter.c2) s_.v_ctrl = s_.v_c2;
        else s_.v_ctrl = std::clamp(s_.v_c1 + cfg_.filter.r * s_.current(cfg_), 0.0, cfg_.vdd);
    }

    void clamp() {
        auto fix = [&](double& v) {
            if (v < 0 || v > cfg_.vdd) {
                v = std::clamp(v, 0.0, cfg_.vdd);
                ++s_.clamp_events;
            }
        };
        fix(s_.v_c1);
        if (cfg_.filter.c2) fix(s_.v_c2);
    }

    std::optional<LoopEvent> next_discrete() const {
        std::optional<LoopEvent> best;
        auto offer = [&](LoopEventKind k, Fs t) {
            if (!best || t < best->time || (t == best->time && k < best->kind)) best = LoopEvent{k, t};
        };
        if (s_.up_confirm_at) offer(LoopEventKind::Confirm, *s_.up_confirm_at);
        if (s_.down_confirm_at) offer(LoopEventKind::Confirm, *s_.down_confirm_at);
        if (s_.pfd_state.pending_reset_at) offer(LoopEventKind::Timer, *s_.pfd_state.pending_reset_at);
        if (!s_.pending.empty()) offer(LoopEventKind::Output, s_.pending.front().time);
        if (cfg_.mode == LoopMode::DLL) {
            if (!s_.delayed_edges.empty()) offer(LoopEventKind::Div, s_.delayed_edges.front());
        } else if (s_.next_div_edge >= 0) {
            offer(LoopEventKind::Div, s_.next_div_edge);
        }
        offer(LoopEventKind::Ref, s_.next_ref_edge);
        return best;
    }

    void apply(const LoopEvent& ev) {
        s_.t = ev.time;
        switch (ev.kind) {
        case LoopEventKind::Confirm: confirm(ev.time); break;
        case LoopEventKind::Timer: pfd(PfdEventKind::Timer, ev.time); break;
        case LoopEventKind::Output: output(); break;
        case LoopEventKind::Div:
            if (cfg_.mode == LoopMode::DLL) s_.delayed_edges.pop_front();
            ++s_.div_count;
            pfd(PfdEventKind::DivEdge, ev.time);
            break;
        case LoopEventKind::Ref:
            ++s_.ref_count;
            s_.next_ref_edge += period_;
            if (cfg_.mode == LoopMode::DLL) {
                Fs d = static_cast<Fs>(std::llround((cfg_.d0 - cfg_.kdl * s_.v_ctrl) / kFs));
                Fs out = ev.time + std::max<Fs>(1, d);
                if (!s_.delayed_edges.empty()) out = std::max(out, s_.delayed_edges.back() + 1);
                s_.delayed_edges.push_back(out);
            }
            pfd(PfdEventKind::RefEdge, ev.time);
            break;
        }
        refresh_vctrl();
    }

private:
    void pfd(PfdEventKind kind, Fs t) {
        auto r = pfd_step(s_.pfd_state, cfg_.pfd, {kind, t});
        s_.pfd_state = std::move(r.state);
        for (const auto& tr : r.transitions) {
            CpTransition c{tr.time, tr.output, tr.level};
            auto it = std::upper_bound(s_.pending.begin(), s_.pending.end(), c.time,
                                       [](Fs x, const CpTransition& p) { return x < p.time; });
            s_.pending.insert(it, c);
        }
    }

    void output() {
        const Fs t = s_.t;
        while (!s_.pending.empty() && s_.pending.front().time == t) {
            auto tr = s_.pending.front();
            s_.pending.erase(s_.pending.begin());
            const bool is_up = tr.output == PfdOutput::Up;
            bool& mine = is_up ? s_.up : s_.down;
            bool& theirs = is_up ? s_.down : s_.up;
            bool& confirmed = is_up ? s_.up_confirmed : s_.down_confirmed;
            auto& confirm_at = is_up ? s_.up_confirm_at : s_.down_confirm_at;
            auto& other_confirm_at = is_up ? s_.down_confirm_at : s_.up_confirm_at;
            bool& other_confirmed = is_up ? s_.down_confirmed : s_.up_confirmed;
            if (tr.level == mine) continue;
            mine = tr.level;
            if (tr.level) {
                // The other side rising ends its exclusive phase early.
                if (theirs && !other_confirmed) other_confirm_at.reset();
                if (!theirs) {
                    const Fs th = cfg_.pfd.threshold();
                    if (th == 0) confirmed = true;
                    else confirm_at = t + th;
                }
            } else {
                confirmed = false;
                confirm_at.reset();
            }
        }
    }

    void confirm(Fs t) {
        const Fs th = cfg_.pfd.threshold();
        if (s_.up_confirm_at && *s_.up_confirm_at == t) {
            s_.up_confirm_at.reset();
            s_.up_confirmed = true;
            add_charge(cfg_.icp_up * to_seconds(th));
        }
        if (s_.down_confirm_at && *s_.down_confirm_at == t) {
            s_.down_confirm_at.reset();
            s_.down_confirmed = true;
            add_charge(-cfg_.icp_down * to_seconds(th));
        }
    }

    const LoopConfig& cfg_;
    LoopState& s_;
    Fs period_;
};

// Exact evolution under a constant pump current.
struct Flow {
    const LoopConfig& cfg;
    double i;

    double freq_at(const LoopState& s) const { return cfg.f0 + cfg.kvco * s.v_ctrl; }

    /// Integral over [0, dt] of v0 + k*t limited to [0, vdd].
    double clamped_area(double v0, double k, double dt) const {
        auto lin = [&](double a, double b) { return (b - a) * (v0 + 0.5 * k * (a + b)); };
        auto rail = [&](double v) { return (v - v0) / k; };
        const double vdd = cfg.vdd;
        if (k == 0) return std::clamp(v0, 0.0, vdd) * dt;
        double t0 = rail(0), t1 = rail(vdd);
        if (t0 > t1) std::swap(t0, t1);
        const double a = std::clamp(t0, 0.0, dt), b = std::clamp(t1, 0.0, dt);
        // Before a and after b the line is pinned to a rail.
        const double before = std::clamp(v0, 0.0, vdd) * a;
        const double after = std::clamp(v0 + k * dt, 0.0, vdd) * (dt - b);
        return before + lin(a, b) + after;
    }

    bool leaves_rails(const LoopState& s, double dt) const {
        const double v0 = s.v_c1 + cfg.filter.r * i, v1 = v0 + i * dt / cfg.filter.c1;
        return std::min(v0, v1) < 0 || std::max(v0, v1) > cfg.vdd;
    }

    /// VCO cycles accumulated over dt seconds.
    double cycles(const LoopState& s, double dt) const {
        if (!cfg.filter.c2) return cfg.f0 * dt + cfg.kvco * clamped_area(s.v_c1 + cfg.filter.r * i, i / cfg.filter.c1, dt);
        const double c1 = cfg.filter.c1, c2 = *cfg.filter.c2, r = cfg.filter.r;
        const double q = c1 * s.v_c1 + c2 * s.v_c2, u = s.v_c2 - s.v_c1;
        const double tau = r * c1 * c2 / (c1 + c2), u_inf = i * r * c1 / (c1 + c2);
        const double integral =
            (q * dt + i * dt * dt / 2 + c1 * (u_inf * dt + (u - u_inf) * tau * -std::expm1(-dt / tau))) / (c1 + c2);
        return cfg.f0 * dt + cfg.kvco * integral;
    }

    void advance(LoopState& s, double dt) const {
        s.vco_phase += kTwoPi * cycles(s, dt);
        if (!cfg.filter.c2) {
            s.v_c1 += i * dt / cfg.filter.c1;
            return;
        }
        const double c1 = cfg.filter.c1, c2 = *cfg.filter.c2, r = cfg.filter.r;
        const double q = c1 * s.v_c1 + c2 * s.v_c2 + i * dt;
        const double tau = r * c1 * c2 / (c1 + c2), u_inf = i * r * c1 / (c1 + c2);
        const double u = u_inf + (s.v_c2 - s.v_c1 - u_inf) * std::exp(-dt / tau);
        s.v_c2 = (q + c1 * u) / (c1 + c2);
        s.v_c1 = (q - c2 * u) / (c1 + c2);
    }

    /// Seconds until `remaining` more cycles have elapsed, or nullopt.
    std::optional<double> time_to(const LoopState& s, double remaining) const {
        if (remaining <= 0) return 0.0;
        if (!cfg.filter.c2) {
            const double b = cfg.f0 + cfg.kvco * (s.v_c1 + cfg.filter.r * i);
            const double a = cfg.kvco * i / (2 * cfg.filter.c1);
            const double disc = b * b + 4 * a * remaining;
            const double den = disc < 0 ? 0 : b + std::sqrt(disc);
            if (den > 0 && !leaves_rails(s, 2 * remaining / den)) return 2 * remaining / den;
        }
        double lo = 0, hi = remaining / std::max(std::abs(freq_at(s)), cfg.f0 > 0 ? cfg.f0 : 1.0);
        int guard = 0;
        while (cycles(s, hi) < remaining) {
            lo = hi;
            hi *= 2;
            if (++guard > 80 || hi > 1.0) return std::nullopt;
        }
        for (int k = 0; k < 200 && hi - lo > 1e-18; ++k) {
            const double mid = 0.5 * (lo + hi);
            if (cycles(s, mid) < remaining) lo = mid;
            else hi = mid;
        }
        return hi;
    }
};

double remaining_cycles(const LoopConfig& cfg, const LoopState& s) {
    return static_cast<double>((s.div_count + 1) * static_cast<std::uint64_t>(cfg.divider_n)) - cycles_of(s);
}

void schedule_div(const LoopConfig& cfg, LoopState& s) {
    if (cfg.mode != LoopMode::PLL) return;
    Flow flow{cfg, s.current(cfg)};
    auto dt = flow.time_to(s, remaining_cycles(cfg, s));
    if (!dt) {
        s.next_div_edge = -1;
        return;
    }
    s.next_div_edge = s.t + static_cast<Fs>(std::ceil(*dt / kFs - 1e-6));
}

}  // namespace

LoopState loop_init(const LoopConfig& cfg) {
    cfg.check();
    LoopState s;
    s.v_c1 = s.v_c2 = std::clamp(cfg.v_init, 0.0, cfg.vdd);
    s.next_ref_edge = period_of(cfg.f_ref);
    LoopCore core(cfg, s);
    core.refresh_vctrl();
    schedule_div(cfg, s);
    return s;
}

LoopState loop_advance(const LoopState& state, const LoopConfig& cfg, LoopEvent* processed) {
    LoopState s = state;
    LoopCore core(cfg, s);
    auto ev = core.next_discrete();
    if (!ev) throw std::logic_error("loop has no pending event");
    Flow flow{cfg, s.current(cfg)};
    flow.advance(s, static_cast<double>(ev->time - s.t) * kFs);
    s.t = ev->time;
    core.clamp();
    core.refresh_vctrl();
    core.apply(*ev);
    schedule_div(cfg, s);
    if (processed) *processed = *ev;
    return s;
}

namespace {

/// Online lock detection shared by both integrators.
class LockTracker {
public:
    LockTracker(const LoopConfig& cfg, LockReport& r, bool stop_at_lock)
        : cfg_(cfg), r_(r), tol_(cfg.lock_tolerance_s()), stop_(stop_at_lock) {}

    void on_ref(const LoopState& s) {
        r_.v_ctrl_trace.push_back({s.t, s.v_ctrl});
        refs_.push_back(s.t);
        vco_at_ref_.push_back(cycles_of(s));
        ref_times_.push_back(s.t);
    }

    void on_div(Fs t) {
        while (!refs_.empty() && refs_.front() <= t) {
            const Fs tr = refs_.front();
            refs_.pop_front();
            Fs nearest = t;
            if (last_div_ && tr - *last_div_ < t - tr) nearest = *last_div_;
            const double err = static_cast<double>(nearest - tr) * kFs;
            r_.phase_errors.push_back(err * kTwoPi * cfg_.f_ref);
            if (std::abs(err) < tol_) {
                if (run_ == 0) run_start_ = tr;
                ++run_;
            } else {
                run_ = 0;
            }
            if (run_ == static_cast<std::uint64_t>(cfg_.lock_cycles) && !declared_) {
                declared_ = true;
                declared_at_ = r_.phase_errors.size();
                r_.lock_time = tr;
            }
        }
        last_div_ = t;
        div_times_.push_back(t);
    }

    // After declaring lock, one more window settles the steady-state figures.
    bool done() const {
        return stop_ && declared_ && r_.phase_errors.size() >= declared_at_ + static_cast<std::size_t>(cfg_.lock_cycles);
    }

    void finish(const LoopState& s) {
        r_.cycles = s.ref_count;
        r_.clamp_events = s.clamp_events;
        const auto k = static_cast<std::size_t>(cfg_.lock_cycles);
        r_.locked = stop_ ? declared_ : run_ >= k;
        if (!r_.locked) {
            if (!declared_) r_.lock_time = 0;
        } else if (!stop_) {
            // Lock time of the run that holds to the end.
            r_.lock_time = lock_time_of_final_run();
        }
        const auto& pe = r_.phase_errors;
        const std::size_t n = std::min(k, pe.size());
        double sum = 0;
        for (std::size_t i = pe.size() - n; i < pe.size(); ++i) sum += pe[i];
        r_.steady_phase_error = n ? sum / static_cast<double>(n) : 0.0;

        const std::size_t m = std::min<std::size_t>(k, ref_times_.size() > 0 ? ref_times_.size() - 1 : 0);
        if (cfg_.mode == LoopMode::PLL) {
            if (m > 0) {
                const std::size_t a = ref_times_.size() - 1 - m, b = ref_times_.size() - 1;
                r_.final_freq = (vco_at_ref_[b] - vco_at_ref_[a]) / (static_cast<double>(ref_times_[b] - ref_times_[a]) * kFs);
            } else {
                r_.final_freq = cfg_.f0 + cfg_.kvco * s.v_ctrl;
            }
        } else {
            const std::size_t md = std::min<std::size_t>(k, div_times_.size() > 0 ? div_times_.size() - 1 : 0);
            if (md > 0) {
                const Fs span = div_times_.back() - div_times_[div_times_.size() - 1 - md];
                r_.final_freq = static_cast<double>(md) / (static_cast<double>(span) * kFs);
            }
        }
    }

private:
    Fs lock_time_of_final_run() const {
        // phase_errors and resolved refs are in the same order; the final run
        // is its last run_ entries, and lock was reached lock_cycles into it.
        const std::size_t resolved = r_.phase_errors.size();
        const std::size_t idx = resolved - run_ + static_cast<std::size_t>(cfg_.lock_cycles) - 1;
        return ref_times_[idx];
    }

    const LoopConfig& cfg_;
    LockReport& r_;
    double tol_;
    bool stop_;
    std::deque<Fs> refs_;
    std::optional<Fs> last_div_;
    std::uint64_t run_ = 0;
    Fs run_start_ = 0;
    bool declared_ = false;
    std::size_t declared_at_ = 0;
    std::vector<double> vco_at_ref_;
    std::vector<Fs> ref_times_;
    std::vector<Fs> div_times_;
};

LockReport run_closed_form(const LoopConfig& cfg, int cycles, bool stop_at_lock) {
    LockReport r;
    LockTracker track(cfg, r, stop_at_lock);
    LoopState s = loop_init(cfg);
    const auto limit = static_cast<std::uint64_t>(cycles);
    for (;;) {
        LoopCore core(cfg, s);
        auto ev = core.next_discrete();
        if (ev->kind == LoopEventKind::Ref) {
            if (s.ref_count >= limit) break;
            // Sample v_ctrl as the edge arrives, before the PFD reacts.
            LoopState probe = s;
            Flow{cfg, s.current(cfg)}.advance(probe, static_cast<double>(ev->time - s.t) * kFs);
            probe.t = ev->time;
            LoopCore pc(cfg, probe);
            pc.clamp();
            pc.refresh_vctrl();
            track.on_ref(probe);
        }
        LoopEvent done;
        s = loop_advance(s, cfg, &done);
        if (done.kind == LoopEventKind::Div) track.on_div(done.time);
        if (track.done()) break;
    }
    track.finish(s);
    return r;
}

}  // namespace

LockReport run_lock(const LoopConfig& cfg, int max_cycles) {
    if (max_cycles < 100) throw std::invalid_argument("max_cycles must be >= 100");
    return run_closed_form(cfg, max_cycles, true);
}

LockReport run_loop(const LoopConfig& cfg, int cycles) {
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    return run_closed_form(cfg, cycles, false);
}

LockReport run_fixed_step(const LoopConfig& cfg, int cycles, Fs dt) {
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    if (dt < 1) throw std::invalid_argument("step must be >= 1 fs");
    LockReport r;
    LockTracker track(cfg, r, false);
    LoopState s = loop_init(cfg);
    s.next_div_edge = -1;
    LoopCore core(cfg, s);
    const auto limit = static_cast<std::uint64_t>(cycles);

    // Forward Euler with the pump current held from the start of the step.
    auto euler = [&](Fs step) {
        const double h = static_cast<double>(step) * kFs;
        const double i = s.current(cfg);
        s.vco_phase += kTwoPi * (cfg.f0 + cfg.kvco * s.v_ctrl) * h;
        if (cfg.filter.c2) {
            const double flow = (s.v_c2 - s.v_c1) / cfg.filter.r;
            s.v_c2 += (i - flow) / *cfg.filter.c2 * h;
            s.v_c1 += flow / cfg.filter.c1 * h;
        } else {
            s.v_c1 += i / cfg.filter.c1 * h;
        }
        s.t += step;
        core.clamp();
        core.refresh_vctrl();
    };

    for (;;) {
        const LoopEvent ev = *core.next_discrete();
        if (ev.kind == LoopEventKind::Ref && s.ref_count >= limit) break;
        bool div_fired = false;
        while (s.t < ev.time) {
            const Fs step = std::min(dt, ev.time - s.t);
            if (cfg.mode == LoopMode::PLL) {
                const double f = cfg.f0 + cfg.kvco * s.v_ctrl;
                const double rem = remaining_cycles(cfg, s);
                if (f > 0 && f * static_cast<double>(step) * kFs >= rem) {
                    const Fs hit = std::clamp<Fs>(static_cast<Fs>(std::ceil(rem / f / kFs - 1e-6)), 0, step);
                    euler(hit);
                    core.apply({LoopEventKind::Div, s.t});
                    track.on_div(s.t);
                    div_fired = true;
                    break;
                }
            }
            euler(step);
        }
        if (div_fired) continue;
        if (ev.kind == LoopEventKind::Ref) track.on_ref(s);
        core.apply(ev);
        if (ev.kind == LoopEventKind::Div) track.on_div(ev.time);
    }
    track.finish(s);
    return r;
}

std::string lock_trace_csv(const LockReport& r) {
    std::ostringstream os;
    os << "time_fs,v_ctrl\n";
    os.precision(12);
    for (const auto& p : r.v_ctrl_trace) os << p.t << ',' << p.v << '\n';
    return os.str();
}

std::string lock_report_json(const LockReport& r, const LoopConfig& cfg) {
    nlohmann::ordered_json j;
    j["mode"] = to_string(cfg.mode);
    j["locked"] = r.locked;
    j["lock_time_fs"] = r.lock_time;
    j["steady_phase_error_rad"] = r.steady_phase_error;
    j["final_freq_hz"] = r.final_freq;
    j["target_freq_hz"] = cfg.mode == LoopMode::PLL ? cfg.f_ref * cfg.divider_n : cfg.f_ref;
    j["cycles"] = r.cycles;
    j["clamp_events"] = r.clamp_events;
    j["final_v_ctrl"] = r.v_ctrl_trace.empty() ? cfg.v_init : r.v_ctrl_trace.back().v;
    return j.dump(2) + "\n";
}

}  // namespace pfdlab
