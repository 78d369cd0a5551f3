#include <stdexcept>
#include <utility>

#include "pfdlab/netlist.hpp"

namespace pfdlab {

namespace {

struct Half {
    const char* in;
    const char* w1;
    const char* w2;
    const char* out;
    const char* other_out;
    const char* k_pull;   // series node of the W1 pull-up stack
    const char* k_eval;   // series node of the W2 discharge stack
    const char* k_reset;  // series node of the output reset stack
    int base;
};

constexpr Half kUp{"Ref", "W1", "W2", "X", "Y", "k1", "k2", "k4", 0};
constexpr Half kDown{"Div", "W3", "W4", "Y", "X", "k6", "k7", "k9", 5};

std::string name(char kind, int n) { return std::string("M") + kind + std::to_string(n); }

void add_half(Netlist& n, const Half& h, Fs d) {
    const auto P = Polarity::PMOS;
    const auto N = Polarity::NMOS;
    const int b = h.base;
    // Delayed inverter: W1 = not(in), falling 1.5 stages late.
    n.add_device(name('P', b + 1), P, h.k_pull, h.in, "VDD", d);
    n.add_device(name('P', b + 2), P, h.w1, h.in, h.k_pull, d);
    n.add_device(name('N', b + 1), N, h.w1, h.in, "GND", d + d / 2);
    // W2 drops while in and W1 are both high: a pulse on the rising edge.
    n.add_device(name('P', b + 3), P, h.w2, h.w1, "VDD", d);
    n.add_device(name('N', b + 2), N, h.w2, h.w1, h.k_eval, d);
    n.add_device(name('N', b + 3), N, h.k_eval, h.in, "GND", d);
    n.add_device(name('P', b + 5), P, h.w2, h.in, "VDD", d);
    // Output: set by the pulse, cleared once the other side is also set.
    n.add_device(name('P', b + 4), P, h.out, h.w2, "VDD", d);
    n.add_device(name('N', b + 5), N, h.out, h.other_out, h.k_reset, d);
    n.add_device(name('N', b + 4), N, h.k_reset, h.w2, "GND", d);
}

void add_buffer(Netlist& n, const char* in, const char* mid, const char* out, int first, const ReferencePfdOptions& o) {
    n.add_device(name('P', first), Polarity::PMOS, mid, in, "VDD", o.buffer_rise);
    n.add_device(name('N', first), Polarity::NMOS, mid, in, "GND", o.buffer_fall);
    n.add_device(name('P', first + 1), Polarity::PMOS, out, mid, "VDD", o.device_delay);
    n.add_device(name('N', first + 1), Polarity::NMOS, out, mid, "GND", o.device_delay);
}

constexpr std::pair<const char*, const char*> kCorePairs[] = {
    {"Ref", "Div"}, {"W1", "W3"}, {"W2", "W4"}, {"X", "Y"}, {"k1", "k6"}, {"k2", "k7"}, {"k4", "k9"}};
constexpr std::pair<const char*, const char*> kBufferPairs[] = {{"Xb", "Yb"}, {"Up", "Down"}};

}  // namespace

std::map<std::string, std::string> reference_pfd_mirror() {
    std::map<std::string, std::string> m;
    auto add = [&](const auto& pairs) {
        for (auto [a, b] : pairs) {
            m[a] = b;
            m[b] = a;
        }
    };
    add(kCorePairs);
    add(kBufferPairs);
    return m;
}

Netlist build_reference_pfd(const ReferencePfdOptions& o) {
    if (o.device_delay < 0 || o.buffer_fall < 0 || o.buffer_rise < 0)
        throw std::invalid_argument("reference PFD delays must be >= 0");
    Netlist n;
    n.add_net("VDD", NetKind::SupplyHigh);
    n.add_net("GND", NetKind::SupplyLow);
    n.add_net("Ref", NetKind::Input);
    n.add_net("Div", NetKind::Input);
    const auto xy = o.output_buffers ? NetKind::Signal : NetKind::Output;
    n.add_net("X", xy);
    n.add_net("Y", xy);
    if (o.output_buffers) {
        n.add_net("Up", NetKind::Output);
        n.add_net("Down", NetKind::Output);
    }
    for (const char* s : {"W1", "W2", "W3", "W4", "k1", "k2", "k4", "k6", "k7", "k9"}) n.add_net(s);
    add_half(n, kUp, o.device_delay);
    add_half(n, kDown, o.device_delay);
    if (o.output_buffers) {
        n.add_net("Xb");
        n.add_net("Yb");
        add_buffer(n, "X", "Xb", "Up", 11, o);
        add_buffer(n, "Y", "Yb", "Down", 13, o);
        n.metadata["up"] = "Up";
        n.metadata["down"] = "Down";
    } else {
        n.metadata["up"] = "X";
        n.metadata["down"] = "Y";
    }
    std::string mirror;
    auto add_pairs = [&](const auto& pairs) {
        for (auto [a, b] : pairs) mirror += std::string(mirror.empty() ? "" : " ") + a + ":" + b;
    };
    add_pairs(kCorePairs);
    if (o.output_buffers) add_pairs(kBufferPairs);
    n.metadata["mirror"] = mirror;
    return n;
}

std::pair<std::string, std::string> up_down_nets(const Netlist& netlist) {
    auto up = netlist.metadata.find("up");
    auto down = netlist.metadata.find("down");
    if (up != netlist.metadata.end() && down != netlist.metadata.end()) return {up->second, down->second};
    auto outs = netlist.nets_of_kind(NetKind::Output);
    if (outs.size() < 2) throw std::invalid_argument("netlist needs two outputs for Up/Down");
    return {netlist.net(outs[0]).name, netlist.net(outs[1]).name};
}

}  // namespace pfdlab
