#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfdlab/switch_sim.hpp"
#include "pfdlab/units.hpp"

namespace pfdlab {

struct PfdConfig {
    Fs t_setup = 40'000;
    Fs t_reset = 0;
    Fs t_out_rise = 0;
    Fs t_out_fall = 0;
    Fs blind_window = 0;
    Fs min_effective_pulse = 0;

    /// Threshold below which a pulse is invisible to the charge pump.
    Fs threshold() const { return t_setup > min_effective_pulse ? t_setup : min_effective_pulse; }
    void check() const;
    bool operator==(const PfdConfig&) const = default;

    /// Conventional design whose reset path blinds it for a tenth of a period.
    static PfdConfig comparison_preset(double freq_hz);
};

enum class PfdMode { Null, UpActive, DownActive, Resetting };
enum class PfdEventKind { RefEdge, DivEdge, Timer };
enum class PfdOutput { Up, Down };

const char* to_string(PfdMode mode);

struct PfdEvent {
    PfdEventKind kind = PfdEventKind::RefEdge;
    Fs time = 0;
};

struct PfdState {
    PfdMode mode = PfdMode::Null;
    bool up = false;
    bool down = false;
    std::optional<Fs> pending_reset_at;

    Fs last_event = 0;
    std::optional<Fs> last_reset_start;
    Fs up_rise = 0;
    Fs down_rise = 0;
    /// Edges that arrived during a reset but outside the blind window;
    /// they take effect when the reset releases.
    std::vector<PfdEventKind> deferred;
};

struct OutputTransition {
    Fs time = 0;
    PfdOutput output = PfdOutput::Up;
    bool level = false;
    /// Set on falling transitions: the completed pulse was shorter than the
    /// charge-pump threshold (or never stood alone).
    bool sub_threshold = false;
    Fs effective = 0;
};

struct PfdStepResult {
    PfdState state;
    std::vector<OutputTransition> transitions;
    bool missed_edge = false;
};

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

PfdStepResult pfd_step(const PfdState& state, const PfdConfig& cfg, const PfdEvent& event);

struct Pulse {
    Fs rise = 0;
    Fs fall = 0;
    /// Time the output was high while the other output was low.
    Fs effective = 0;
    bool visible = false;

    Fs width() const { return fall - rise; }
};

struct PfdTrace {
    std::vector<Pulse> up;
    std::vector<Pulse> down;
    std::vector<Fs> missed_edges;
    /// Ref, Div, Up, Down.
    WaveformSet waves;
};

/// Drives the state machine with rising-edge times (each list nondecreasing).
PfdTrace simulate_pfd(const PfdConfig& cfg, std::span<const Fs> ref_edges, std::span<const Fs> div_edges, Fs t_end);

/// Rising edges of every REF/DIV clock in `stim`, plus explicit rising edges.
PfdTrace simulate_pfd(const PfdConfig& cfg, const Stimulus& stim, Fs t_end);

/// Signed charge per cycle in coulombs for a steady phase offset.
double net_charge_per_cycle(const PfdConfig& cfg, double delta_phi, double freq_hz, double icp);

}  // namespace pfdlab
