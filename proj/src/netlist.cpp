#include "pfdlab/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace pfdlab {

const char* to_string(NetKind kind) {
    switch (kind) {
        case NetKind::Signal: return "signal";
        case NetKind::SupplyHigh: return "supply_high";
        case NetKind::SupplyLow: return "supply_low";
        case NetKind::Input: return "input";
        case NetKind::Output: return "output";
    }
    return "?";
}

const char* to_string(Polarity polarity) { return polarity == Polarity::PMOS ? "PMOS" : "NMOS"; }

NetId Netlist::add_net(std::string name, NetKind kind) {
    if (auto existing = find_net(name)) {
        auto& n = nets[index(*existing)];
        if (n.kind == NetKind::Signal) n.kind = kind;
        return *existing;
    }
    nets.push_back(Net{std::move(name), kind});
    return NetId(nets.size() - 1);
}

DeviceId Netlist::add_device(std::string name, Polarity polarity, std::string_view drain, std::string_view gate,
                             std::string_view source, std::optional<Fs> delay) {
    devices.push_back(Device{std::move(name), polarity, net_id(drain), net_id(gate), net_id(source), delay});
    return DeviceId(devices.size() - 1);
}

std::optional<NetId> Netlist::find_net(std::string_view name) const {
    for (std::size_t i = 0; i < nets.size(); ++i)
        if (nets[i].name == name) return NetId(i);
    return std::nullopt;
}

std::optional<DeviceId> Netlist::find_device(std::string_view name) const {
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (devices[i].name == name) return DeviceId(i);
    return std::nullopt;
}

NetId Netlist::net_id(std::string_view name) const {
    if (auto id = find_net(name)) return *id;
    throw std::out_of_range("unknown net '" + std::string(name) + "'");
}

std::optional<NetId> Netlist::supply_high() const {
    auto v = nets_of_kind(NetKind::SupplyHigh);
    if (v.size() != 1) return std::nullopt;
    return v.front();
}

std::optional<NetId> Netlist::supply_low() const {
    auto v = nets_of_kind(NetKind::SupplyLow);
    if (v.size() != 1) return std::nullopt;
    return v.front();
}

std::vector<NetId> Netlist::nets_of_kind(NetKind kind) const {
    std::vector<NetId> out;
    for (std::size_t i = 0; i < nets.size(); ++i)
        if (nets[i].kind == kind) out.push_back(NetId(i));
    return out;
}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

bool valid_identifier(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '[' || c == ']' || c == '/';
    });
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Netlist run() {
        std::size_t pos = 0;
        std::size_t line_no = 0;
        bool ended = false;
        while (pos <= text_.size() && !ended) {
            std::size_t eol = text_.find('\n', pos);
            if (eol == std::string_view::npos) eol = text_.size();
            ++line_no;
            ended = parse_line(text_.substr(pos, eol - pos), line_no);
            pos = eol + 1;
        }
        last_line_ = line_no;
        if (!high_) throw ParseError(last_line_, 1, "missing '.supply vdd' declaration");
        if (!low_) throw ParseError(last_line_, 1, "missing '.supply gnd' declaration");
        return std::move(netlist_);
    }

private:
    // Returns true on `.end`.
    bool parse_line(std::string_view line, std::size_t line_no) {
        auto toks = tokenize(line);
        if (toks.empty() || toks[0].text.front() == '*') return false;
        const auto& head = toks[0];
        if (head.text == ".end") return true;
        if (head.text == ".supply") {
            parse_supply(toks, line_no);
        } else if (head.text == ".input") {
            declare(toks, line_no, NetKind::Input);
        } else if (head.text == ".output") {
            declare(toks, line_no, NetKind::Output);
        } else if (head.text == ".node") {
            declare(toks, line_no, NetKind::Signal);
        } else if (head.text == ".meta") {
            if (toks.size() < 2) throw ParseError(line_no, head.column, "'.meta' needs a key");
            std::string value;
            if (toks.size() > 2) {
                auto start = toks[2].column - 1;
                auto stop = toks.back().column - 1 + toks.back().text.size();
                value = std::string(line.substr(start, stop - start));
            }
            netlist_.metadata[std::string(toks[1].text)] = value;
        } else if (head.text.front() == 'M' || head.text.front() == 'm') {
            parse_device(toks, line_no);
        } else {
            throw ParseError(line_no, head.column, "unrecognized statement '" + std::string(head.text) + "'");
        }
        return false;
    }

    void parse_supply(const std::vector<Token>& toks, std::size_t line_no) {
        if (toks.size() != 3) throw ParseError(line_no, toks[0].column, "expected '.supply <vdd|gnd> <net>'");
        bool high = toks[1].text == "vdd";
        if (!high && toks[1].text != "gnd")
            throw ParseError(line_no, toks[1].column, "supply kind must be 'vdd' or 'gnd'");
        auto& slot = high ? high_ : low_;
        if (slot) throw ParseError(line_no, toks[0].column, "duplicate '.supply " + std::string(toks[1].text) + "'");
        slot = true;
        declare_one(toks[2], line_no, high ? NetKind::SupplyHigh : NetKind::SupplyLow);
    }

    void declare(const std::vector<Token>& toks, std::size_t line_no, NetKind kind) {
        if (toks.size() < 2) throw ParseError(line_no, toks[0].column, "expected at least one net name");
        for (std::size_t i = 1; i < toks.size(); ++i) declare_one(toks[i], line_no, kind);
    }

    void declare_one(const Token& tok, std::size_t line_no, NetKind kind) {
        if (!valid_identifier(tok.text))
            throw ParseError(line_no, tok.column, "invalid net name '" + std::string(tok.text) + "'");
        if (netlist_.find_net(tok.text))
            throw ParseError(line_no, tok.column, "net '" + std::string(tok.text) + "' declared twice");
        netlist_.nets.push_back(Net{std::string(tok.text), kind});
    }

    NetId resolve(const Token& tok, std::size_t line_no) {
        auto id = netlist_.find_net(tok.text);
        if (!id) throw ParseError(line_no, tok.column, "undeclared net '" + std::string(tok.text) + "'");
        return *id;
    }

    void parse_device(const std::vector<Token>& toks, std::size_t line_no) {
        if (toks.size() < 5 || toks.size() > 6)
            throw ParseError(line_no, toks[0].column,
                             "expected 'M<name> <drain> <gate> <source> <PMOS|NMOS> [delay=<int>fs]'");
        if (toks[0].text.size() < 2 || !valid_identifier(toks[0].text))
            throw ParseError(line_no, toks[0].column, "invalid device name '" + std::string(toks[0].text) + "'");
        if (netlist_.find_device(toks[0].text))
            throw ParseError(line_no, toks[0].column, "duplicate device name '" + std::string(toks[0].text) + "'");
        Device d;
        d.name = std::string(toks[0].text);
        d.drain = resolve(toks[1], line_no);
        d.gate = resolve(toks[2], line_no);
        d.source = resolve(toks[3], line_no);
        if (toks[4].text == "PMOS") {
            d.polarity = Polarity::PMOS;
        } else if (toks[4].text == "NMOS") {
            d.polarity = Polarity::NMOS;
        } else {
            throw ParseError(line_no, toks[4].column, "polarity must be PMOS or NMOS");
        }
        if (toks.size() == 6) {
            auto attr = toks[5].text;
            constexpr std::string_view kKey = "delay=";
            bool ok = attr.size() > kKey.size() + 2 && attr.substr(0, kKey.size()) == kKey &&
                      attr.substr(attr.size() - 2) == "fs";
            auto digits = ok ? attr.substr(kKey.size(), attr.size() - kKey.size() - 2) : std::string_view{};
            ok = ok && !digits.empty() &&
                 std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; });
            if (!ok) throw ParseError(line_no, toks[5].column, "expected 'delay=<int>fs'");
            d.delay = std::stoll(std::string(digits));
        }
        netlist_.devices.push_back(std::move(d));
    }

    std::string_view text_;
    Netlist netlist_;
    bool high_ = false;
    bool low_ = false;
    std::size_t last_line_ = 0;
};

const char* directive_for(NetKind kind) {
    switch (kind) {
        case NetKind::Signal: return ".node";
        case NetKind::Input: return ".input";
        case NetKind::Output: return ".output";
        default: return nullptr;
    }
}

}  // namespace

Netlist parse_netlist(std::string_view text) { return Parser(text).run(); }

std::string serialize_netlist(const Netlist& netlist) {
    std::ostringstream os;
    for (const auto& [key, value] : netlist.metadata) {
        os << ".meta " << key;
        if (!value.empty()) os << ' ' << value;
        os << '\n';
    }
    // Consecutive nets of the same kind share a directive so that the
    // declaration order (and therefore every NetId) survives a round trip.
    std::size_t i = 0;
    while (i < netlist.nets.size()) {
        const auto kind = netlist.nets[i].kind;
        if (kind == NetKind::SupplyHigh || kind == NetKind::SupplyLow) {
            os << ".supply " << (kind == NetKind::SupplyHigh ? "vdd " : "gnd ") << netlist.nets[i].name << '\n';
            ++i;
            continue;
        }
        os << directive_for(kind);
        while (i < netlist.nets.size() && netlist.nets[i].kind == kind) os << ' ' << netlist.nets[i++].name;
        os << '\n';
    }
    for (const auto& d : netlist.devices) {
        os << d.name << ' ' << netlist.net(d.drain).name << ' ' << netlist.net(d.gate).name << ' '
           << netlist.net(d.source).name << ' ' << to_string(d.polarity);
        if (d.delay) os << " delay=" << *d.delay << "fs";
        os << '\n';
    }
    os << ".end\n";
    return os.str();
}

bool ValidationReport::ok() const {
    return std::none_of(violations.begin(), violations.end(),
                        [](const Violation& v) { return v.severity == Severity::Error; });
}

namespace {

std::map<std::string, std::string> parse_mirror_spec(const std::string& spec) {
    std::map<std::string, std::string> out;
    std::istringstream is(spec);
    std::string pair;
    while (is >> pair) {
        auto colon = pair.find(':');
        if (colon == std::string::npos) continue;
        auto a = pair.substr(0, colon), b = pair.substr(colon + 1);
        out[a] = b;
        out[b] = a;
    }
    return out;
}

}  // namespace

ValidationReport validate(const Netlist& netlist) {
    ValidationReport report;
    auto add = [&](Severity s, std::string rule, std::string subject, std::string message) {
        report.violations.push_back({s, std::move(rule), std::move(subject), std::move(message)});
    };

    auto highs = netlist.nets_of_kind(NetKind::SupplyHigh);
    auto lows = netlist.nets_of_kind(NetKind::SupplyLow);
    if (highs.size() != 1)
        add(Severity::Error, "missing-supply", "vdd",
            "expected exactly one supply_high net, found " + std::to_string(highs.size()));
    if (lows.size() != 1)
        add(Severity::Error, "missing-supply", "gnd",
            "expected exactly one supply_low net, found " + std::to_string(lows.size()));

    std::vector<bool> channel_driven(netlist.nets.size(), false);
    std::set<std::string> names;
    for (const auto& d : netlist.devices) {
        if (!names.insert(d.name).second) add(Severity::Error, "duplicate-device", d.name, "device name repeated");
        channel_driven[index(d.drain)] = true;
        channel_driven[index(d.source)] = true;
        if (d.drain == d.gate) add(Severity::Error, "drain-equals-gate", d.name, "drain and gate share a net");
        if (d.delay && *d.delay < 0) add(Severity::Error, "negative-delay", d.name, "delay must be >= 0");
        for (NetId n : {d.drain, d.gate, d.source})
            if (index(n) >= netlist.nets.size())
                add(Severity::Error, "dangling-reference", d.name, "terminal references a missing net");
    }

    std::vector<bool> gate_reported(netlist.nets.size(), false);
    for (const auto& d : netlist.devices) {
        const auto& g = netlist.net(d.gate);
        bool has_driver = g.is_supply() || g.kind == NetKind::Input || channel_driven[index(d.gate)];
        if (!has_driver && !gate_reported[index(d.gate)]) {
            gate_reported[index(d.gate)] = true;
            add(Severity::Error, "floating-gate", g.name, "gate net has no driver and is not an input");
        }
    }
    for (NetId out : netlist.nets_of_kind(NetKind::Output))
        if (!channel_driven[index(out)])
            add(Severity::Error, "undriven-output", netlist.net(out).name, "output net is not driven by any device");

    if (auto it = netlist.metadata.find("mirror"); it != netlist.metadata.end()) {
        auto relabel = parse_mirror_spec(it->second);
        if (!is_mirror_symmetric(netlist, relabel))
            add(Severity::Warning, "symmetry", "netlist",
                "halves are not isomorphic under the declared mirror relabeling");
    }
    return report;
}

bool is_mirror_symmetric(const Netlist& netlist, const std::map<std::string, std::string>& relabel) {
    auto map_name = [&](const std::string& n) {
        auto it = relabel.find(n);
        return it == relabel.end() ? n : it->second;
    };
    using Key = std::tuple<Polarity, std::string, std::string, std::string>;
    auto key_of = [](Polarity p, std::string drain, std::string gate, std::string source) {
        if (source < drain) std::swap(drain, source);
        return Key{p, std::move(drain), std::move(gate), std::move(source)};
    };
    std::multiset<Key> original, mirrored;
    for (const auto& d : netlist.devices) {
        const auto& dn = netlist.net(d.drain).name;
        const auto& gn = netlist.net(d.gate).name;
        const auto& sn = netlist.net(d.source).name;
        original.insert(key_of(d.polarity, dn, gn, sn));
        mirrored.insert(key_of(d.polarity, map_name(dn), map_name(gn), map_name(sn)));
    }
    return original == mirrored;
}

std::vector<ChannelComponent> channel_connected_components(const Netlist& netlist) {
    const std::size_t n = netlist.nets.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto boundary = [&](NetId id) {
        const auto& net = netlist.net(id);
        return net.is_supply() || net.kind == NetKind::Input;
    };
    for (const auto& d : netlist.devices)
        if (!boundary(d.drain) && !boundary(d.source)) parent[find(index(d.drain))] = find(index(d.source));

    // Component ids in order of first appearance over devices, so output is
    // deterministic and follows netlist order.
    std::vector<long> comp_of_root(n, -1);
    std::vector<ChannelComponent> out;
    std::vector<bool> net_placed(n, false);
    for (std::size_t i = 0; i < netlist.devices.size(); ++i) {
        const auto& d = netlist.devices[i];
        std::optional<std::size_t> anchor;
        for (NetId t : {d.drain, d.source})
            if (!boundary(t)) anchor = index(t);
        if (!anchor) {
            // Device strung between two boundary nets: it forms its own group.
            out.push_back(ChannelComponent{{DeviceId(i)}, {}});
            continue;
        }
        auto root = find(*anchor);
        if (comp_of_root[root] < 0) {
            comp_of_root[root] = static_cast<long>(out.size());
            out.emplace_back();
        }
        auto& comp = out[static_cast<std::size_t>(comp_of_root[root])];
        comp.devices.push_back(DeviceId(i));
        for (NetId t : {d.drain, d.source}) {
            if (!boundary(t) && !net_placed[index(t)]) {
                net_placed[index(t)] = true;
                comp.nets.push_back(t);
            }
        }
    }
    return out;
}

}  // namespace pfdlab
