#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfdlab/units.hpp"

namespace pfdlab {

enum class NetKind { Signal, SupplyHigh, SupplyLow, Input, Output };
enum class Polarity { PMOS, NMOS };

const char* to_string(NetKind kind);
const char* to_string(Polarity polarity);

/// Dense index into Netlist::nets.
enum class NetId : std::uint32_t {};
/// Dense index into Netlist::devices.
enum class DeviceId : std::uint32_t {};

constexpr std::size_t index(NetId id) { return static_cast<std::size_t>(id); }
constexpr std::size_t index(DeviceId id) { return static_cast<std::size_t>(id); }

struct Net {
    std::string name;
    NetKind kind = NetKind::Signal;

    bool is_supply() const { return kind == NetKind::SupplyHigh || kind == NetKind::SupplyLow; }
    bool operator==(const Net&) const = default;
};

struct Device {
    std::string name;  // includes the leading 'M'
    Polarity polarity = Polarity::NMOS;
    NetId drain{};
    NetId gate{};
    NetId source{};
    /// Intrinsic switching delay; unset means "use the compile-time default".
    std::optional<Fs> delay;

    bool operator==(const Device&) const = default;
};

class Netlist {
public:
    std::vector<Net> nets;
    std::vector<Device> devices;
    std::map<std::string, std::string> metadata;

    /// Adds a net or, if the name exists, returns the existing id after
    /// upgrading a plain Signal to the requested kind.
    NetId add_net(std::string name, NetKind kind = NetKind::Signal);
    DeviceId add_device(std::string name, Polarity polarity, std::string_view drain, std::string_view gate,
                        std::string_view source, std::optional<Fs> delay = std::nullopt);

    std::optional<NetId> find_net(std::string_view name) const;
    std::optional<DeviceId> find_device(std::string_view name) const;
    NetId net_id(std::string_view name) const;  // throws std::out_of_range

    const Net& net(NetId id) const { return nets[index(id)]; }
    const Device& device(DeviceId id) const { return devices[index(id)]; }

    std::optional<NetId> supply_high() const;
    std::optional<NetId> supply_low() const;
    std::vector<NetId> nets_of_kind(NetKind kind) const;

    bool operator==(const Netlist&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message);

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Parses the line-oriented SPICE subset:
///
///   * comment
///   .supply vdd <net> | .supply gnd <net>
///   .input <net>...   | .output <net>...   | .node <net>...
///   .meta <key> <value...>
///   M<name> <drain> <gate> <source> <PMOS|NMOS> [delay=<int>fs]
///   .end
///
/// Every net a device touches must be declared by one of the directives
/// before the device line.
Netlist parse_netlist(std::string_view text);

/// Canonical text form; parse_netlist(serialize_netlist(n)) == n.
std::string serialize_netlist(const Netlist& netlist);

enum class Severity { Error, Warning };

struct Violation {
    Severity severity = Severity::Error;
    std::string rule;    // "floating-gate", "undriven-output", "missing-supply", "symmetry", ...
    std::string subject; // net or device name
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const;  // no Error-severity entries
    bool empty() const { return violations.empty(); }
};

ValidationReport validate(const Netlist& netlist);

/// Checks that the device graph maps onto itself under the given net
/// relabeling (an involution such as Ref<->Div, X<->Y, ...). Devices are
/// matched by (polarity, drain, gate, source) with drain/source unordered.
bool is_mirror_symmetric(const Netlist& netlist, const std::map<std::string, std::string>& relabel);

struct ReferencePfdOptions {
    /// Append an inverter pair on each of X and Y driving nets Up and Down.
    bool output_buffers = false;
    /// Written as an explicit attribute on every core device; the input
    /// inverters MN1/MN6 get 1.5x so the evaluation pulse outlasts one stage.
    Fs device_delay = 10'000;
    /// First buffer stage (MN11/MN13 pull-down, MP11/MP13 pull-up). The
    /// second stage uses device_delay.
    Fs buffer_fall = 10'000;
    Fs buffer_rise = 10'000;
};

/// The 20-transistor TSPC phase frequency detector: inputs Ref, Div;
/// outputs X (Up) and Y (Down), or Up/Down when buffered. The metadata
/// keys "up" and "down" name the output nets.
Netlist build_reference_pfd(const ReferencePfdOptions& options = {});

/// Net relabeling that swaps the two halves of the reference PFD
/// (buffer nets included).
std::map<std::string, std::string> reference_pfd_mirror();

/// Up/Down output nets: metadata "up"/"down" when present, else the first
/// two outputs in declaration order.
std::pair<std::string, std::string> up_down_nets(const Netlist& netlist);

struct ChannelComponent {
    std::vector<DeviceId> devices;
    std::vector<NetId> nets;  // non-supply, non-input nets only
};

/// Devices are in one component iff linked through drain/source nets.
/// Supply and input nets are boundaries: they never merge components.
std::vector<ChannelComponent> channel_connected_components(const Netlist& netlist);

}  // namespace pfdlab
