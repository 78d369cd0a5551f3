#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pfdlab/netlist.hpp"
#include "pfdlab/pfd_model.hpp"
#include "pfdlab/switch_sim.hpp"
#include "pfdlab/units.hpp"

namespace pfdlab {

struct PulseTrace {
    std::vector<Pulse> up;
    std::vector<Pulse> down;
    WaveformSet waves;
    /// False when an output went UNKNOWN inside the inspected window.
    bool settled = true;
};

/// A PFD under test: either the behavioral state machine or a compiled
/// switch-level netlist whose Up/Down nets come from up_down_nets().
class PfdImpl {
public:
    static PfdImpl behavioral(PfdConfig cfg);
    static PfdImpl switch_level(SimModel model, RunOptions options = {});

    bool is_behavioral() const { return !model_; }
    const PfdConfig& config() const { return cfg_; }
    const SimModel& model() const { return *model_; }
    const RunOptions& run_options() const { return options_; }
    const std::string& up_net() const { return up_; }
    const std::string& down_net() const { return down_; }

    /// Largest switching delay (behavioral: the largest timing parameter).
    Fs max_delay() const;

    /// Pulses after `from` (rise >= from) on Up and Down.
    PulseTrace run(const Stimulus& stim, Fs t_end, Fs from = 0) const;

    /// Every delay multiplied by s.
    PfdImpl scaled(double s) const;
    /// Every delay multiplied by an independent N(1, sigma) factor.
    PfdImpl perturbed(std::mt19937_64& rng, double sigma) const;

private:
    PfdConfig cfg_;
    std::optional<SimModel> model_;
    RunOptions options_;
    std::string up_ = "Up", down_ = "Down";
};

/// Two equal-frequency clocks with Div lagging Ref by delta (negative:
/// Div leads), warm-up cycles, then a measurement window of `cycles` periods.
struct PhaseRun {
    Stimulus stim;
    Fs window_start = 0;
    Fs window_end = 0;
    Fs t_end = 0;
};

inline constexpr int kWarmupCycles = 2;

PhaseRun phase_stimulus(double freq_hz, Fs delta, int cycles, int warmup = kWarmupCycles);
Fs phase_to_time(double phi, double freq_hz);

PulseTrace run_phase(const PfdImpl& pfd, double freq_hz, Fs delta, int cycles);

struct TransferPoint {
    double delta_phi = 0;
    double output = 0;
    bool settled = true;
};

struct TransferCurve {
    double freq = 0;
    std::vector<TransferPoint> points;
};

TransferCurve transfer_sweep(const PfdImpl& pfd, double freq_hz, int points, int cycles = 16, unsigned threads = 0);

/// True when a Ref lead of delta produces a charge-pump-visible pulse.
bool visible_at(const PfdImpl& pfd, double freq_hz, Fs delta);
Fs measure_dead_zone(const PfdImpl& pfd, double freq_hz, Fs resolution = 1);

struct BlindZoneResult {
    Fs window = 0;
    Fs step = 0;
    std::vector<Fs> missed_offsets;  // probe offsets after reset start that were lost
};

/// Probes a Ref edge at offsets [0, span) after a reset starts and totals
/// the offsets at which the edge is lost. span defaults to period/4.
BlindZoneResult measure_blind_zone(const PfdImpl& pfd, double freq_hz, Fs step = 1'000, Fs span = 0);

struct WidthStats {
    double mean = 0;  // fs
    double std = 0;   // fs, population
    std::size_t count = 0;
};

std::map<std::string, WidthStats> pulse_width_stats(const WaveformSet& w, const std::vector<std::string>& nets,
                                                    Fs after = 0);
WidthStats width_stats(const std::vector<Pulse>& pulses, bool visible_only = true);

/// Mean visible width of the leading output (Up for phi > 0, Down for phi < 0).
WidthStats pulse_width_at(const PfdImpl& pfd, double phi, double freq_hz, int cycles = 8);

struct Histogram {
    double lo = 0;
    double hi = 0;
    std::vector<std::size_t> counts;

    double bin_lo(std::size_t i) const;
    double bin_hi(std::size_t i) const;
};

Histogram make_histogram(const std::vector<double>& values, std::size_t bins);

struct McReport {
    std::size_t samples = 0;
    double mean_up = 0, mean_down = 0;  // fs
    double std_up = 0, std_down = 0;    // fs
    Histogram hist_up, hist_down;
    std::vector<double> up, down;  // per-sample mean widths, sample order
};

struct McOptions {
    double rel_sigma = 0.10;  // plus-minus at 3 sigma
    std::size_t samples = 5000;
    std::uint64_t seed = 0;
    double phi = 0.2 * kPi;
    double freq = 1e9;
    int cycles = 4;
    std::size_t bins = 40;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Sample i draws every delay factor from mt19937_64(seed ^ i); Up widths
/// come from a +phi run and Down widths from the mirrored -phi run.
McReport monte_carlo(const PfdImpl& pfd, const McOptions& options);

struct PvtModel {
    double v_nominal = 1.0;
    double t_nominal = 25.0;
    double a = 0.763259494;
    double b = 1.59994725e-05;
    double c = -1.33570411e-02;
    double e = 9.56445148e-06;
    double t_min = -25.0, t_max = 125.0;
    double v_min = 0.9, v_max = 1.1;

    /// Multiplier on device delays and pulse widths; exactly 1 at nominal.
    double scale(double vdd, double temp_c) const;
};

struct PvtPoint {
    double temp = 0;
    double vdd = 0;
    double scale = 1;
    double width = 0;  // fs
};

struct PvtGrid {
    std::vector<double> temps, vdds;
    std::vector<PvtPoint> points;  // temp-major

    const PvtPoint& at(double temp, double vdd) const;
    double width(double temp, double vdd) const { return at(temp, vdd).width; }
};

std::vector<double> default_pvt_temps();
std::vector<double> default_pvt_vdds();

PvtGrid pvt_sweep(const PfdImpl& pfd, const PvtModel& pvt, const std::vector<double>& temps,
                  const std::vector<double>& vdds, double phi, double freq_hz, unsigned threads = 0);

double dennard_scale(double power_w, double from_nm, double to_nm);

struct ActivityReport {
    std::map<std::string, std::uint64_t> toggles;
    double weighted_total = 0;
};

ActivityReport activity_report(const WaveformSet& w, const std::map<std::string, double>& weights = {});

struct CalibrationTarget {
    double freq = 1e9;
    Fs dead_zone = 40'000;
    double phi = 0.2 * kPi;
    Fs width = 97'700;
    Fs tolerance = 50;
    int max_iterations = 30;
};

struct CalibrationResult {
    ReferencePfdOptions options;
    Fs dead_zone = 0;
    double width = 0;
    int iterations = 0;
    bool converged = false;
};

/// Tunes the first buffer stage of the reference PFD: its pull-down delay
/// sets the dead zone, its pull-up delay the pulse width.
CalibrationResult calibrate_reference(const CalibrationTarget& target = {}, ReferencePfdOptions start = {});

/// Committed result of calibrate_reference() for the default target.
ReferencePfdOptions calibrated_reference_options();
PfdImpl calibrated_reference();

/// Runs indexed jobs on a worker pool; results land by index, so any
/// reduction done afterwards in index order is thread-count independent.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn);

unsigned resolve_threads(unsigned requested);

}  // namespace pfdlab

#include "pfdlab/detail/parallel.hpp"
