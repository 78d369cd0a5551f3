#include "pfdlab/pfd_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pfdlab {

void PfdConfig::check() const {
    if (t_setup < 0 || t_reset < 0 || t_out_rise < 0 || t_out_fall < 0 || blind_window < 0 || min_effective_pulse < 0)
        throw std::invalid_argument("PFD timing parameters must be >= 0");
}

PfdConfig PfdConfig::comparison_preset(double freq_hz) {
    PfdConfig c;
    c.blind_window = period_of(freq_hz) / 10;
    return c;
}

const char* to_string(PfdMode mode) {
    switch (mode) {
    case PfdMode::Null: return "NULL";
    case PfdMode::UpActive: return "UP_ACTIVE";
    case PfdMode::DownActive: return "DOWN_ACTIVE";
    case PfdMode::Resetting: return "RESETTING";
    }
    return "?";
}

namespace {

bool is_sub_threshold(Fs effective, const PfdConfig& cfg) { return effective <= 0 || effective < cfg.threshold(); }

void release(PfdState& s, const PfdConfig& cfg, Fs at, std::vector<OutputTransition>& out) {
    const Fs fall = at + cfg.t_out_fall;
    Fs up_eff = std::max<Fs>(0, s.down_rise - s.up_rise);
    Fs down_eff = std::max<Fs>(0, s.up_rise - s.down_rise);
    out.push_back({fall, PfdOutput::Up, false, is_sub_threshold(up_eff, cfg), up_eff});
    out.push_back({fall, PfdOutput::Down, false, is_sub_threshold(down_eff, cfg), down_eff});
    s.up = s.down = false;
    s.mode = PfdMode::Null;
    s.pending_reset_at.reset();
}

void edge(PfdState& s, const PfdConfig& cfg, PfdEventKind kind, Fs t, std::vector<OutputTransition>& out,
          bool& missed) {
    if (s.last_reset_start && t - *s.last_reset_start < cfg.blind_window) {
        missed = true;
        return;
    }
    if (s.mode == PfdMode::Resetting) {
        if (std::find(s.deferred.begin(), s.deferred.end(), kind) == s.deferred.end()) s.deferred.push_back(kind);
        return;
    }
    const bool ref = kind == PfdEventKind::RefEdge;
    const PfdMode own = ref ? PfdMode::UpActive : PfdMode::DownActive;
    const PfdMode other = ref ? PfdMode::DownActive : PfdMode::UpActive;
    if (s.mode == own) return;

    const Fs rise = t + cfg.t_out_rise;
    if (ref) {
        s.up = true;
        s.up_rise = rise;
    } else {
        s.down = true;
        s.down_rise = rise;
    }
    out.push_back({rise, ref ? PfdOutput::Up : PfdOutput::Down, true, false, 0});
    if (s.mode == PfdMode::Null) {
        s.mode = own;
    } else if (s.mode == other) {
        s.mode = PfdMode::Resetting;
        s.pending_reset_at = t + cfg.t_reset;
        s.last_reset_start = t;
    }
}

void fire_timer(PfdState& s, const PfdConfig& cfg, std::vector<OutputTransition>& out, bool& missed) {
    const Fs at = *s.pending_reset_at;
    release(s, cfg, at, out);
    auto deferred = std::move(s.deferred);
    s.deferred.clear();
    for (auto kind : deferred) edge(s, cfg, kind, at, out, missed);
}

}  // namespace

PfdStepResult pfd_step(const PfdState& state, const PfdConfig& cfg, const PfdEvent& event) {
    if (event.time < state.last_event)
        throw ContractViolation("PFD event at " + std::to_string(event.time) + " fs precedes previous event at " +
                                std::to_string(state.last_event) + " fs");
    PfdStepResult r{state, {}, false};
    auto& s = r.state;
    s.last_event = event.time;
    // A reset due at or before this event completes first.
    while (s.pending_reset_at && *s.pending_reset_at <= event.time) fire_timer(s, cfg, r.transitions, r.missed_edge);
    if (event.kind != PfdEventKind::Timer) edge(s, cfg, event.kind, event.time, r.transitions, r.missed_edge);
    return r;
}

namespace {

struct Collector {
    PfdTrace trace;
    std::optional<Fs> open_up, open_down;

    Fs last_up = 0, last_down = 0;

    void take(OutputTransition tr, Fs t_end) {
        auto& open = tr.output == PfdOutput::Up ? open_up : open_down;
        auto& last = tr.output == PfdOutput::Up ? last_up : last_down;
        // Output stages are in order: a rise never overtakes the previous fall.
        tr.time = std::max(tr.time, last);
        last = tr.time;
        auto& pulses = tr.output == PfdOutput::Up ? trace.up : trace.down;
        if (tr.time <= t_end) {
            auto i = *trace.waves.find(tr.output == PfdOutput::Up ? "Up" : "Down");
            trace.waves.record(i, tr.time, tr.level ? Logic::One : Logic::Zero);
        }
        if (tr.level) {
            open = tr.time;
        } else if (open) {
            if (tr.time <= t_end) pulses.push_back({*open, tr.time, tr.effective, !tr.sub_threshold});
            open.reset();
        }
    }
};

}  // namespace

PfdTrace simulate_pfd(const PfdConfig& cfg, std::span<const Fs> ref_edges, std::span<const Fs> div_edges, Fs t_end) {
    cfg.check();
    struct Ev {
        Fs time;
        PfdEventKind kind;
    };
    std::vector<Ev> events;
    events.reserve(ref_edges.size() + div_edges.size());
    for (Fs t : ref_edges)
        if (t <= t_end) events.push_back({t, PfdEventKind::RefEdge});
    for (Fs t : div_edges)
        if (t <= t_end) events.push_back({t, PfdEventKind::DivEdge});
    std::stable_sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
        return a.time != b.time ? a.time < b.time : a.kind < b.kind;
    });

    Collector c;
    c.trace.waves = WaveformSet({"Down", "Up"}, t_end);
    c.trace.waves.record(*c.trace.waves.find("Up"), 0, Logic::Zero);
    c.trace.waves.record(*c.trace.waves.find("Down"), 0, Logic::Zero);
    PfdState s;
    auto step = [&](PfdEvent ev) {
        auto r = pfd_step(s, cfg, ev);
        s = std::move(r.state);
        if (r.missed_edge) c.trace.missed_edges.push_back(ev.time);
        for (const auto& tr : r.transitions) c.take(tr, t_end);
    };
    for (const auto& e : events) step({e.kind, e.time});
    while (s.pending_reset_at && *s.pending_reset_at <= t_end) step({PfdEventKind::Timer, *s.pending_reset_at});
    return std::move(c.trace);
}

PfdTrace simulate_pfd(const PfdConfig& cfg, const Stimulus& stim, Fs t_end) {
    auto edges = expand_edges(stim, t_end);
    std::vector<Fs> ref, div;
    for (const auto& e : edges) {
        if (e.value != Logic::One) continue;
        if (e.net == "Ref") ref.push_back(e.time);
        else if (e.net == "Div") div.push_back(e.time);
        else throw std::invalid_argument("behavioral PFD inputs are Ref and Div, not '" + e.net + "'");
    }
    auto trace = simulate_pfd(cfg, ref, div, t_end);

    std::vector<std::string> names = trace.waves.names();
    names.push_back("Ref");
    names.push_back("Div");
    WaveformSet waves(names, t_end);
    for (const char* n : {"Ref", "Div"}) waves.record(*waves.find(n), 0, Logic::Zero);
    for (const auto& e : edges) waves.record(*waves.find(e.net), e.time, e.value);
    for (const char* n : {"Up", "Down"})
        for (auto tr : trace.waves.trace(n)) waves.record(*waves.find(n), tr.time, tr.value);
    trace.waves = std::move(waves);
    return trace;
}

double net_charge_per_cycle(const PfdConfig& cfg, double delta_phi, double freq_hz, double icp) {
    if (std::abs(delta_phi) > kPi + 1e-12) throw std::invalid_argument("|delta_phi| must be <= pi");
    if (freq_hz <= 0) throw std::invalid_argument("frequency must be > 0");
    const double width = std::abs(delta_phi) / kTwoPi / freq_hz;
    if (width < to_seconds(cfg.threshold()) || width == 0.0) return 0.0;
    return (delta_phi < 0 ? -1.0 : 1.0) * width * icp;
}

}  // namespace pfdlab
