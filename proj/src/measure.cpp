#include "pfdlab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pfdlab {

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// ---------------------------------------------------------------------------
// Implementation handle

PfdImpl PfdImpl::behavioral(PfdConfig cfg) {
    cfg.check();
    PfdImpl p;
    p.cfg_ = cfg;
    return p;
}

PfdImpl PfdImpl::switch_level(SimModel model, RunOptions options) {
    PfdImpl p;
    auto [up, down] = up_down_nets(model.netlist());
    p.up_ = up;
    p.down_ = down;
    p.model_ = std::move(model);
    p.options_ = std::move(options);
    return p;
}

Fs PfdImpl::max_delay() const {
    if (model_) return model_->max_delay();
    return std::max({cfg_.t_reset, cfg_.t_out_rise, cfg_.t_out_fall});
}

namespace {

struct Interval {
    Fs lo, hi;
};

/// High intervals of a net; an interval still open at the horizon ends there.
std::vector<Interval> high_intervals(std::span<const Transition> tr, Fs horizon, bool& complete_last) {
    std::vector<Interval> out;
    Fs open = -1;
    for (const auto& t : tr) {
        if (t.value == Logic::One) {
            if (open < 0) open = t.time;
        } else if (open >= 0) {
            out.push_back({open, t.time});
            open = -1;
        }
    }
    complete_last = open < 0;
    if (open >= 0) out.push_back({open, horizon});
    return out;
}

Fs overlap(const Interval& a, const std::vector<Interval>& others) {
    Fs total = 0;
    for (const auto& b : others) {
        if (b.lo >= a.hi) break;
        Fs lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
        if (hi > lo) total += hi - lo;
    }
    return total;
}

std::vector<Pulse> extract_pulses(const WaveformSet& w, const std::string& net, const std::string& other, Fs from) {
    bool done = false, other_done = false;
    auto mine = high_intervals(w.trace(net), w.horizon(), done);
    auto theirs = high_intervals(w.trace(other), w.horizon(), other_done);
    if (!done) mine.pop_back();
    std::vector<Pulse> out;
    for (const auto& iv : mine) {
        if (iv.lo < from) continue;
        Fs eff = (iv.hi - iv.lo) - overlap(iv, theirs);
        out.push_back({iv.lo, iv.hi, eff, eff > 0});
    }
    return out;
}

bool went_unknown(const WaveformSet& w, const std::string& net, Fs from) {
    for (const auto& t : w.trace(net))
        if (t.time >= from && t.value == Logic::Unknown) return true;
    return w.value_at(net, from) == Logic::Unknown;
}

Fs scale_time(Fs t, double s) { return static_cast<Fs>(std::llround(static_cast<double>(t) * s)); }

}  // namespace

PulseTrace PfdImpl::run(const Stimulus& stim, Fs t_end, Fs from) const {
    PulseTrace out;
    if (!model_) {
        auto tr = simulate_pfd(cfg_, stim, t_end);
        for (auto& p : tr.up)
            if (p.rise >= from) out.up.push_back(p);
        for (auto& p : tr.down)
            if (p.rise >= from) out.down.push_back(p);
        out.waves = std::move(tr.waves);
        return out;
    }
    out.waves = pfdlab::run(*model_, stim, t_end, options_);
    out.up = extract_pulses(out.waves, up_, down_, from);
    out.down = extract_pulses(out.waves, down_, up_, from);
    out.settled = !went_unknown(out.waves, up_, from) && !went_unknown(out.waves, down_, from);
    return out;
}

PfdImpl PfdImpl::scaled(double s) const {
    if (!(s >= 0)) throw std::invalid_argument("delay scale must be >= 0");
    PfdImpl p = *this;
    if (!model_) {
        p.cfg_.t_setup = scale_time(cfg_.t_setup, s);
        p.cfg_.t_reset = scale_time(cfg_.t_reset, s);
        p.cfg_.t_out_rise = scale_time(cfg_.t_out_rise, s);
        p.cfg_.t_out_fall = scale_time(cfg_.t_out_fall, s);
        return p;
    }
    std::vector<Fs> d(model_->delays().begin(), model_->delays().end());
    for (auto& x : d) x = scale_time(x, s);
    p.model_ = model_->with_delays(std::move(d));
    return p;
}

PfdImpl PfdImpl::perturbed(std::mt19937_64& rng, double sigma) const {
    if (sigma < 0) throw std::invalid_argument("sigma must be >= 0");
    PfdImpl p = *this;
    if (sigma == 0) return p;
    std::normal_distribution<double> factor(1.0, sigma);
    auto draw = [&](Fs t) { return std::max<Fs>(0, scale_time(t, factor(rng))); };
    if (!model_) {
        p.cfg_.t_setup = draw(cfg_.t_setup);
        p.cfg_.t_reset = draw(cfg_.t_reset);
        p.cfg_.t_out_rise = draw(cfg_.t_out_rise);
        p.cfg_.t_out_fall = draw(cfg_.t_out_fall);
        return p;
    }
    std::vector<Fs> d(model_->delays().begin(), model_->delays().end());
    for (auto& x : d) x = draw(x);
    p.model_ = model_->with_delays(std::move(d));
    return p;
}

// ---------------------------------------------------------------------------
// Stimulus

Fs phase_to_time(double phi, double freq_hz) {
    return static_cast<Fs>(std::llround(phi / kTwoPi * static_cast<double>(period_of(freq_hz))));
}

PhaseRun phase_stimulus(double freq_hz, Fs delta, int cycles, int warmup) {
    if (freq_hz <= 0) throw std::invalid_argument("frequency must be > 0");
    if (cycles < 1 || warmup < 0) throw std::invalid_argument("cycle counts must be positive");
    const Fs T = period_of(freq_hz);
    const Fs base = T / 2;
    if (delta > T / 2 || delta < -T / 2) {
        delta %= T;
        if (delta > T / 2) delta -= T;
        if (delta < -T / 2) delta += T;
    }
    PhaseRun r;
    r.stim.clocks.push_back({"Ref", T, base + std::max<Fs>(0, -delta), 0.5});
    r.stim.clocks.push_back({"Div", T, base + std::max<Fs>(0, delta), 0.5});
    r.window_start = base + warmup * T;
    r.window_end = r.window_start + cycles * T;
    r.t_end = r.window_end + T;
    return r;
}

PulseTrace run_phase(const PfdImpl& pfd, double freq_hz, Fs delta, int cycles) {
    auto ps = phase_stimulus(freq_hz, delta, cycles);
    auto tr = pfd.run(ps.stim, ps.t_end, ps.window_start);
    auto trim = [&](std::vector<Pulse>& v) {
        std::erase_if(v, [&](const Pulse& p) { return p.rise >= ps.window_end; });
    };
    trim(tr.up);
    trim(tr.down);
    return tr;
}

// ---------------------------------------------------------------------------
// Transfer, dead zone, blind zone

TransferCurve transfer_sweep(const PfdImpl& pfd, double freq_hz, int points, int cycles, unsigned threads) {
    if (points < 3 || points % 2 == 0) throw std::invalid_argument("transfer sweep needs an odd point count >= 3");
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    TransferCurve curve;
    curve.freq = freq_hz;
    curve.points.resize(points);
    const double T = static_cast<double>(period_of(freq_hz));
    const int mid = points / 2;
    parallel_for(static_cast<std::size_t>(points), threads, [&](std::size_t i) {
        const int k = static_cast<int>(i) - mid;
        const double phi = kPi * k / mid;
        auto tr = run_phase(pfd, freq_hz, phase_to_time(phi, freq_hz), cycles);
        double up = 0, down = 0;
        for (const auto& p : tr.up)
            if (p.visible) up += static_cast<double>(p.effective);
        for (const auto& p : tr.down)
            if (p.visible) down += static_cast<double>(p.effective);
        curve.points[i] = {phi, (up - down) / (cycles * T) / 0.5, tr.settled};
    });
    return curve;
}

bool visible_at(const PfdImpl& pfd, double freq_hz, Fs delta) {
    auto tr = run_phase(pfd, freq_hz, delta, 4);
    auto any = [](const std::vector<Pulse>& v) {
        return std::any_of(v.begin(), v.end(), [](const Pulse& p) { return p.visible; });
    };
    return any(tr.up) || any(tr.down);
}

Fs measure_dead_zone(const PfdImpl& pfd, double freq_hz, Fs resolution) {
    if (resolution < 1) throw std::invalid_argument("resolution must be >= 1 fs");
    Fs lo = 1, hi = period_of(freq_hz) / 4;
    if (visible_at(pfd, freq_hz, lo)) return 0;
    if (!visible_at(pfd, freq_hz, hi)) return hi;
    while (hi - lo > resolution) {
        Fs mid = lo + (hi - lo) / 2;
        if (visible_at(pfd, freq_hz, mid)) hi = mid;
        else lo = mid;
    }
    return hi;
}

BlindZoneResult measure_blind_zone(const PfdImpl& pfd, double freq_hz, Fs step, Fs span) {
    if (freq_hz <= 0) throw std::invalid_argument("frequency must be > 0");
    if (step < 1) throw std::invalid_argument("step must be >= 1 fs");
    const Fs T = period_of(freq_hz);
    const Fs q = T / 4;
    if (span <= 0) span = q;
    const Fs settle = std::max<Fs>(20 * pfd.max_delay(), q);

    std::vector<Fs> offsets;
    // Probes sit mid-step so none coincides with the edge that starts the reset.
    for (Fs s = step / 2 + (step % 2); s < span; s += step) offsets.push_back(s);
    std::vector<char> missed(offsets.size(), 0);
    parallel_for(offsets.size(), 0, [&](std::size_t i) {
        const Fs s = offsets[i];
        Stimulus stim;
        auto edge = [&](const char* net, Fs t, Logic v) { stim.edges.push_back({net, t, v}); };
        // Sequence that leaves a tri-state PFD idle from any state.
        Fs t = q;
        for (int k = 0; k < 2; ++k) {
            edge("Ref", t, Logic::One);
            edge("Ref", t + q, Logic::Zero);
            t += 2 * q;
        }
        edge("Div", t, Logic::One);
        edge("Div", t + q, Logic::Zero);
        t += 2 * q;
        // Ref leads; the Div edge starts a reset; a Ref probe lands s later.
        const Fs a = t, b = t + q;
        edge("Ref", a, Logic::One);
        edge("Ref", a + q / 2, Logic::Zero);
        edge("Div", b, Logic::One);
        edge("Ref", b + s, Logic::One);
        const Fs sample = b + s + settle;
        edge("Div", sample + q, Logic::Zero);
        std::stable_sort(stim.edges.begin(), stim.edges.end(),
                         [](const EdgeSpec& x, const EdgeSpec& y) { return x.time < y.time; });
        auto tr = pfd.run(stim, sample + 1);
        missed[i] = tr.waves.value_at(pfd.up_net(), sample) != Logic::One;
    });
    BlindZoneResult r;
    r.step = step;
    for (std::size_t i = 0; i < offsets.size(); ++i)
        if (missed[i]) r.missed_offsets.push_back(offsets[i]);
    r.window = static_cast<Fs>(r.missed_offsets.size()) * step;
    return r;
}

// ---------------------------------------------------------------------------
// Pulse widths

WidthStats width_stats(const std::vector<Pulse>& pulses, bool visible_only) {
    WidthStats s;
    double sum = 0, sq = 0;
    for (const auto& p : pulses) {
        if (visible_only && !p.visible) continue;
        double w = static_cast<double>(p.width());
        sum += w;
        sq += w * w;
        ++s.count;
    }
    if (s.count == 0) return s;
    s.mean = sum / static_cast<double>(s.count);
    s.std = std::sqrt(std::max(0.0, sq / static_cast<double>(s.count) - s.mean * s.mean));
    return s;
}

std::map<std::string, WidthStats> pulse_width_stats(const WaveformSet& w, const std::vector<std::string>& nets,
                                                    Fs after) {
    std::map<std::string, WidthStats> out;
    for (const auto& net : nets) {
        bool done = false;
        auto iv = high_intervals(w.trace(net), w.horizon(), done);
        if (!done) iv.pop_back();
        std::vector<Pulse> pulses;
        for (const auto& i : iv)
            if (i.lo >= after) pulses.push_back({i.lo, i.hi, i.hi - i.lo, true});
        out[net] = width_stats(pulses, false);
    }
    return out;
}

WidthStats pulse_width_at(const PfdImpl& pfd, double phi, double freq_hz, int cycles) {
    auto tr = run_phase(pfd, freq_hz, phase_to_time(phi, freq_hz), cycles);
    return width_stats(phi >= 0 ? tr.up : tr.down);
}

// ---------------------------------------------------------------------------
// Monte Carlo

double Histogram::bin_lo(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / counts.size(); }
double Histogram::bin_hi(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i + 1) / counts.size(); }

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
    Histogram h;
    h.counts.assign(bins, 0);
    if (values.empty()) return h;
    auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    h.lo = std::floor(*mn);
    h.hi = std::ceil(*mx);
    if (h.hi <= h.lo) h.hi = h.lo + 1;
    for (double v : values) {
        auto i = static_cast<std::size_t>((v - h.lo) / (h.hi - h.lo) * static_cast<double>(bins));
        h.counts[std::min(i, bins - 1)]++;
    }
    return h;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

McReport monte_carlo(const PfdImpl& pfd, const McOptions& o) {
    if (o.samples < 1) throw std::invalid_argument("monte carlo needs at least one sample");
    if (o.rel_sigma < 0) throw std::invalid_argument("rel_sigma must be >= 0");
    McReport r;
    r.samples = o.samples;
    r.up.assign(o.samples, 0);
    r.down.assign(o.samples, 0);
    const double phi = std::abs(o.phi);
    parallel_for(o.samples, o.threads, [&](std::size_t i) {
        std::mt19937_64 rng(o.seed ^ static_cast<std::uint64_t>(i));
        auto p = pfd.perturbed(rng, o.rel_sigma / 3.0);
        r.up[i] = pulse_width_at(p, phi, o.freq, o.cycles).mean;
        r.down[i] = pulse_width_at(p, -phi, o.freq, o.cycles).mean;
    });
    mean_std(r.up, r.mean_up, r.std_up);
    mean_std(r.down, r.mean_down, r.std_down);
    r.hist_up = make_histogram(r.up, o.bins);
    r.hist_down = make_histogram(r.down, o.bins);
    return r;
}

// ---------------------------------------------------------------------------
// PVT

double PvtModel::scale(double vdd, double temp_c) const {
    const double dv = vdd - v_nominal, dt = temp_c - t_nominal;
    return 1.0 + a * dv + b * dt + c * dv * dt + e * dt * dt;
}

const PvtPoint& PvtGrid::at(double temp, double vdd) const {
    for (const auto& p : points)
        if (std::abs(p.temp - temp) < 1e-9 && std::abs(p.vdd - vdd) < 1e-9) return p;
    throw std::out_of_range("no PVT point at the requested corner");
}

std::vector<double> default_pvt_temps() { return {-25, 0, 25, 50, 75, 100, 125}; }
std::vector<double> default_pvt_vdds() { return {0.9, 1.0, 1.1}; }

PvtGrid pvt_sweep(const PfdImpl& pfd, const PvtModel& pvt, const std::vector<double>& temps,
                  const std::vector<double>& vdds, double phi, double freq_hz, unsigned threads) {
    if (temps.empty() || vdds.empty()) throw std::invalid_argument("PVT grid must be nonempty");
    PvtGrid g;
    g.temps = temps;
    g.vdds = vdds;
    g.points.resize(temps.size() * vdds.size());
    parallel_for(g.points.size(), threads, [&](std::size_t i) {
        const double t = temps[i / vdds.size()], v = vdds[i % vdds.size()];
        const double s = pvt.scale(v, t);
        // Delays stretch with s, and so does every edge the charge pump sees.
        double w = pulse_width_at(pfd.scaled(s), phi, freq_hz).mean * s;
        g.points[i] = {t, v, s, w};
    });
    return g;
}

// ---------------------------------------------------------------------------
// Scaling and activity

double dennard_scale(double power_w, double from_nm, double to_nm) {
    if (!(from_nm > 0) || !(to_nm > 0)) throw std::invalid_argument("technology nodes must be > 0");
    const double k = to_nm / from_nm;
    return power_w * k * k;
}

ActivityReport activity_report(const WaveformSet& w, const std::map<std::string, double>& weights) {
    ActivityReport r;
    for (std::size_t i = 0; i < w.names().size(); ++i) {
        const auto& name = w.names()[i];
        std::uint64_t n = 0;
        std::optional<Logic> prev;
        for (const auto& t : w.trace(i)) {
            if (prev && *prev != Logic::Unknown && t.value != Logic::Unknown && *prev != t.value) ++n;
            prev = t.value;
        }
        r.toggles[name] = n;
        auto it = weights.find(name);
        r.weighted_total += (it == weights.end() ? 1.0 : it->second) * static_cast<double>(n);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Calibration

namespace {

PfdImpl reference_impl(const ReferencePfdOptions& o) {
    return PfdImpl::switch_level(SimModel::compile(build_reference_pfd(o)));
}

}  // namespace

CalibrationResult calibrate_reference(const CalibrationTarget& target, ReferencePfdOptions o) {
    o.output_buffers = true;
    const Fs lead = phase_to_time(target.phi, target.freq);
    // Linear first guess: dead zone ~ fall - d, width ~ lead + d - fall + rise.
    o.buffer_fall = target.dead_zone + o.device_delay;
    o.buffer_rise = std::max<Fs>(0, target.width - lead - o.device_delay + o.buffer_fall);
    CalibrationResult r;
    for (r.iterations = 1; r.iterations <= target.max_iterations; ++r.iterations) {
        auto impl = reference_impl(o);
        r.dead_zone = measure_dead_zone(impl, target.freq, 1);
        r.width = pulse_width_at(impl, target.phi, target.freq).mean;
        r.options = o;
        const Fs dz_err = target.dead_zone - r.dead_zone;
        const Fs w_err = static_cast<Fs>(std::llround(static_cast<double>(target.width) - r.width));
        if (std::abs(dz_err) <= target.tolerance && std::abs(w_err) <= target.tolerance) {
            r.converged = true;
            return r;
        }
        o.buffer_fall = std::max<Fs>(0, o.buffer_fall + dz_err);
        o.buffer_rise = std::max<Fs>(0, o.buffer_rise + w_err + dz_err);
    }
    r.iterations = target.max_iterations;
    return r;
}

ReferencePfdOptions calibrated_reference_options() {
    ReferencePfdOptions o;
    o.output_buffers = true;
    o.buffer_fall = 50'000;
    o.buffer_rise = 37'700;
    return o;
}

PfdImpl calibrated_reference() { return reference_impl(calibrated_reference_options()); }

}  // namespace pfdlab
