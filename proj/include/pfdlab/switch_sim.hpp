#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfdlab/netlist.hpp"
#include "pfdlab/units.hpp"

namespace pfdlab {

enum class Logic : std::uint8_t { Zero, One, Unknown };
enum class Origin : std::uint8_t { Driven, Stored };

char to_char(Logic v);
Logic logic_from_char(char c);  // '0', '1', 'X'/'x'

struct LogicValue {
    Logic value = Logic::Unknown;
    Origin origin = Origin::Stored;
    bool operator==(const LogicValue&) const = default;
};

struct DelayConfig {
    Fs default_delay = 10'000;
    /// Per-device overrides by name; take precedence over netlist attributes.
    std::map<std::string, Fs> overrides;
};

class ValidationFailure : public std::runtime_error {
public:
    explicit ValidationFailure(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Immutable compiled form of a netlist; safe to share between concurrent runs.
class SimModel {
public:
    static SimModel compile(const Netlist& netlist, const DelayConfig& delays = {});

    const Netlist& netlist() const { return netlist_; }
    std::span<const Fs> delays() const { return delays_; }
    Fs delay(DeviceId id) const { return delays_[index(id)]; }
    Fs max_delay() const;
    const std::vector<ChannelComponent>& components() const { return components_; }

    /// Component holding `net` on a drain/source terminal, if any.
    std::optional<std::size_t> component_of(NetId net) const;
    /// Components whose devices read `net` at a gate or use it as a boundary terminal.
    std::span<const std::size_t> fanout(NetId net) const { return fanout_[index(net)]; }
    /// Rank of each net when sorted by name; ties of simultaneous events resolve by it.
    std::uint32_t name_rank(NetId net) const { return name_rank_[index(net)]; }

    /// Same topology with a replacement delay vector (size == device count).
    SimModel with_delays(std::vector<Fs> delays) const;

private:
    SimModel() = default;
    void index_topology();

    Netlist netlist_;
    std::vector<Fs> delays_;
    std::vector<ChannelComponent> components_;
    std::vector<long> component_of_;
    std::vector<std::vector<std::size_t>> fanout_;
    std::vector<std::uint32_t> name_rank_;
};

struct ClockSpec {
    std::string net;
    Fs period = 0;
    /// Time of the first rising edge; the clock is low before it.
    Fs phase = 0;
    double duty = 0.5;
};

struct EdgeSpec {
    std::string net;
    Fs time = 0;
    Logic value = Logic::Zero;
};

struct Stimulus {
    std::vector<ClockSpec> clocks;
    std::vector<EdgeSpec> edges;
};

/// Clocks expanded into explicit edges up to t_end, merged with the
/// explicit edges and stably sorted by time.
std::vector<EdgeSpec> expand_edges(const Stimulus& stim, Fs t_end);

struct Transition {
    Fs time = 0;
    Logic value = Logic::Unknown;
    bool operator==(const Transition&) const = default;
};

class WaveformSet {
public:
    WaveformSet() = default;
    /// Names are kept sorted; trace indices follow that order.
    WaveformSet(std::vector<std::string> names, Fs horizon);

    const std::vector<std::string>& names() const { return names_; }
    Fs horizon() const { return horizon_; }
    void set_horizon(Fs h) { horizon_ = h; }

    std::optional<std::size_t> find(std::string_view net) const;
    std::span<const Transition> trace(std::size_t i) const { return traces_[i]; }
    std::span<const Transition> trace(std::string_view net) const;  // throws std::out_of_range
    /// Value of `net` at time t (after any transition at exactly t).
    Logic value_at(std::string_view net, Fs t) const;

    /// Appends; a second entry at the same time replaces the first, and a
    /// repeated value is dropped, so traces stay strictly increasing.
    void record(std::size_t i, Fs time, Logic value);

    bool operator==(const WaveformSet&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<Transition>> traces_;
    Fs horizon_ = 0;
};

class OscillationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    /// Zero-delay iterations permitted at a single timestamp.
    std::size_t oscillation_bound = 1000;
    /// Re-check after every timestep that STORED nets have no conducting rail path.
    bool verify_storage = false;
    /// Values that replace the all-UNKNOWN power-on state.
    std::map<std::string, Logic> initial_state;
};

struct RunStats {
    std::uint64_t events = 0;
    std::uint64_t solves = 0;
};

WaveformSet run(const SimModel& model, const Stimulus& stim, Fs t_end, const RunOptions& options = {},
                RunStats* stats = nullptr);

/// Resolves one channel-connected component given the current value of
/// every net. Returned vector is parallel to component.nets.
std::vector<LogicValue> solve_ccc(const SimModel& model, std::size_t component, std::span<const LogicValue> net_states);

enum class WaveFormat { CSV, VCD };

std::string export_waveform(const WaveformSet& w, WaveFormat format);
/// Inverse of the CSV export. The CSV carries no horizon; when omitted it
/// is taken as the last transition time.
WaveformSet parse_waveform_csv(std::string_view csv, std::optional<Fs> horizon = std::nullopt);

}  // namespace pfdlab
