#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "pfdlab/pfd_model.hpp"
#include "pfdlab/units.hpp"

namespace pfdlab {

enum class LoopMode { PLL, DLL };

const char* to_string(LoopMode mode);

struct LoopFilter {
    double r = 10e3;    // ohm
    double c1 = 10e-12; // F, integrating capacitor in series with R
    std::optional<double> c2; // F, shunt capacitor on the control node
};

struct LoopConfig {
    LoopMode mode = LoopMode::PLL;
    double f_ref = 1e9;
    int divider_n = 1;
    double icp_up = 50e-6;
    double icp_down = 50e-6;
    double leakage = 0;  // A drawn from the control node
    LoopFilter filter;
    double f0 = 0.9e9;    // VCO free-running frequency, Hz
    double kvco = 500e6;  // Hz/V
    double d0 = 1.2e-9;   // delay line at v = 0, s
    double kdl = 0.5e-9;  // s/V; delay = d0 - kdl * v
    double v_init = 0;
    double vdd = 1.0;
    PfdConfig pfd;
    int lock_cycles = 50;
    /// Lock tolerance in seconds of edge offset; unset uses the PFD
    /// dead zone plus 1% of the reference period.
    std::optional<double> lock_tolerance;

    void check() const;
    double lock_tolerance_s() const;
};

/// In-flight PFD output change seen by the charge pump.
struct CpTransition {
    Fs time = 0;
    PfdOutput output = PfdOutput::Up;
    bool level = false;
};

struct LoopState {
    Fs t = 0;
    double v_ctrl = 0;
    double v_c1 = 0;      // integrating capacitor
    double v_c2 = 0;      // shunt capacitor (= control node) when present
    double vco_phase = 0; // radians (PLL)
    Fs next_ref_edge = 0;
    Fs next_div_edge = 0; // -1 when none is due
    PfdState pfd_state;

    bool up = false, down = false;                 // PFD outputs at the pump
    bool up_confirmed = false, down_confirmed = false;
    std::optional<Fs> up_confirm_at, down_confirm_at;
    std::vector<CpTransition> pending;              // sorted by time
    std::deque<Fs> delayed_edges;                   // DLL delay-line output
    std::uint64_t ref_count = 0, div_count = 0;
    std::uint64_t clamp_events = 0;

    double current(const LoopConfig& cfg) const;
};

enum class LoopEventKind { Confirm, Timer, Output, Div, Ref };

struct LoopEvent {
    LoopEventKind kind = LoopEventKind::Ref;
    Fs time = 0;
};

LoopState loop_init(const LoopConfig& cfg);

/// Advances to the earliest pending event and applies it.
LoopState loop_advance(const LoopState& state, const LoopConfig& cfg, LoopEvent* processed = nullptr);

struct VSample {
    Fs t = 0;
    double v = 0;
};

struct LockReport {
    bool locked = false;
    Fs lock_time = 0;
    double steady_phase_error = 0; // radians; positive when Ref leads
    double final_freq = 0;         // Hz, output of the VCO (PLL) or delay line (DLL)
    std::uint64_t cycles = 0;
    std::uint64_t clamp_events = 0;
    std::vector<VSample> v_ctrl_trace;  // v_ctrl just before every Ref edge
    std::vector<double> phase_errors;   // radians, one per resolved Ref edge
};

/// Runs until lock is held for cfg.lock_cycles consecutive Ref edges or
/// max_cycles, then cfg.lock_cycles more edges for the steady-state figures.
LockReport run_lock(const LoopConfig& cfg, int max_cycles);

/// Runs exactly `cycles` Ref edges; lock is still detected and reported.
LockReport run_loop(const LoopConfig& cfg, int cycles);

/// Same loop integrated on a fixed grid (default 1 ps) with every
/// event snapped to the grid; the test oracle for the closed form.
LockReport run_fixed_step(const LoopConfig& cfg, int cycles, Fs dt = 1'000);

std::string lock_trace_csv(const LockReport& r);
std::string lock_report_json(const LockReport& r, const LoopConfig& cfg);

}  // namespace pfdlab
