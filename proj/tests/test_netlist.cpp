#include <gtest/gtest.h>

#include <random>
#include <set>

#include "pfdlab/netlist.hpp"

using namespace pfdlab;

namespace {

const char* kInverter = R"(* inverter
.supply vdd VDD
.supply gnd GND
.input A
.output Y
MP1 Y A VDD PMOS
MN1 Y A GND NMOS
.end
)";

const char* kTwoInverters = R"(.supply vdd VDD
.supply gnd GND
.input A
.node M
.output Y
MP1 M A VDD PMOS
MN1 M A GND NMOS
MP2 Y M VDD PMOS
MN2 Y M GND NMOS
)";

// Count of channel-connected groups by repeated pairwise merging until
// nothing changes; deliberately unlike the union-find in the library.
std::size_t brute_force_components(const Netlist& n) {
    auto boundary = [&](NetId id) {
        const auto& net = n.net(id);
        return net.is_supply() || net.kind == NetKind::Input;
    };
    std::vector<std::set<std::size_t>> groups;
    for (std::size_t i = 0; i < n.devices.size(); ++i) {
        std::set<std::size_t> g;
        for (NetId t : {n.devices[i].drain, n.devices[i].source})
            if (!boundary(t)) g.insert(index(t));
        groups.push_back(g);
    }
    std::vector<bool> alive(groups.size(), true);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t a = 0; a < groups.size(); ++a) {
            for (std::size_t b = a + 1; b < groups.size(); ++b) {
                if (!alive[a] || !alive[b]) continue;
                bool shared = false;
                for (auto x : groups[b]) shared = shared || groups[a].count(x);
                if (shared) {
                    groups[a].insert(groups[b].begin(), groups[b].end());
                    alive[b] = false;
                    changed = true;
                }
            }
        }
    }
    return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), true));
}

Netlist random_netlist(std::mt19937_64& rng) {
    Netlist n;
    n.add_net("VDD", NetKind::SupplyHigh);
    n.add_net("GND", NetKind::SupplyLow);
    std::uniform_int_distribution<int> count(1, 6);
    int inputs = count(rng), nodes = count(rng), outputs = count(rng);
    for (int i = 0; i < inputs; ++i) n.add_net("in" + std::to_string(i), NetKind::Input);
    for (int i = 0; i < nodes; ++i) n.add_net("n" + std::to_string(i), NetKind::Signal);
    for (int i = 0; i < outputs; ++i) n.add_net("out" + std::to_string(i), NetKind::Output);
    std::uniform_int_distribution<std::size_t> net(0, n.nets.size() - 1);
    std::uniform_int_distribution<int> devices(1, 30), coin(0, 1), delay(0, 50'000);
    int nd = devices(rng);
    for (int i = 0; i < nd; ++i) {
        std::size_t d = net(rng), g = net(rng), s = net(rng);
        while (g == d) g = net(rng);
        std::optional<Fs> del;
        if (coin(rng)) del = delay(rng);
        n.add_device("M" + std::to_string(i), coin(rng) ? Polarity::PMOS : Polarity::NMOS, n.nets[d].name,
                     n.nets[g].name, n.nets[s].name, del);
    }
    if (coin(rng)) n.metadata["note"] = "generated netlist " + std::to_string(nd);
    return n;
}

}  // namespace

TEST(Parse, Inverter) {
    auto n = parse_netlist(kInverter);
    EXPECT_EQ(n.devices.size(), 2u);
    EXPECT_EQ(n.nets.size(), 4u);
    EXPECT_TRUE(n.supply_high().has_value());
    EXPECT_TRUE(n.supply_low().has_value());
    EXPECT_EQ(n.device(*n.find_device("MP1")).polarity, Polarity::PMOS);
    EXPECT_TRUE(validate(n).empty());
}

TEST(Parse, ReferenceRoundTripHasTwentyDevices) {
    auto n = parse_netlist(serialize_netlist(build_reference_pfd()));
    EXPECT_EQ(n.devices.size(), 20u);
    EXPECT_EQ(n, build_reference_pfd());
}

TEST(Parse, UndeclaredNetNamesNetAndLine) {
    const char* text = ".supply vdd VDD\n.supply gnd GND\n.input A\nMN1 W9 A GND NMOS\n";
    try {
        parse_netlist(text);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
        EXPECT_NE(std::string(e.what()).find("W9"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    }
}

TEST(Parse, Errors) {
    EXPECT_THROW(parse_netlist(".supply vdd VDD\n.input A\nMN1 A A VDD NMOS\n"), ParseError);  // no gnd
    EXPECT_THROW(parse_netlist(".supply vdd VDD\n.supply gnd GND\n.input A\n.output Y\n"
                               "MN1 Y A GND NMOS\nMN1 Y A GND NMOS\n"),
                 ParseError);  // duplicate device
    EXPECT_THROW(parse_netlist(".supply vdd VDD\n.supply gnd GND\n.input A\n.output Y\nMN1 Y A GND FET\n"), ParseError);
    EXPECT_THROW(parse_netlist(".supply vdd VDD\n.supply gnd GND\n.bogus\n"), ParseError);
    EXPECT_THROW(parse_netlist(".supply vdd VDD\n.supply gnd GND\n.input A\n.output Y\nMN1 Y A GND NMOS delay=x\n"),
                 ParseError);
}

TEST(Parse, DelayAttribute) {
    auto n = parse_netlist(".supply vdd VDD\n.supply gnd GND\n.input A\n.output Y\nMN1 Y A GND NMOS delay=1234fs\n");
    ASSERT_TRUE(n.devices[0].delay.has_value());
    EXPECT_EQ(*n.devices[0].delay, 1234);
}

TEST(Parse, RoundTripProperty) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        auto n = random_netlist(rng);
        auto text = serialize_netlist(n);
        auto back = parse_netlist(text);
        ASSERT_EQ(back, n) << text;
        ASSERT_EQ(serialize_netlist(back), text);
    }
}

TEST(Validate, ReferenceIsClean) {
    EXPECT_TRUE(validate(build_reference_pfd()).empty());
    ReferencePfdOptions o;
    o.output_buffers = true;
    EXPECT_TRUE(validate(build_reference_pfd(o)).empty());
}

TEST(Validate, FloatingGate) {
    auto n = parse_netlist(".supply vdd VDD\n.supply gnd GND\n.node G\n.output Y\nMP1 Y G VDD PMOS\nMN1 Y G GND NMOS\n");
    auto r = validate(n);
    ASSERT_FALSE(r.ok());
    bool found = false;
    for (const auto& v : r.violations) found = found || (v.rule == "floating-gate" && v.subject == "G");
    EXPECT_TRUE(found);
}

TEST(Validate, UndrivenOutputAndMissingSupply) {
    Netlist n;
    n.add_net("A", NetKind::Input);
    n.add_net("Y", NetKind::Output);
    auto r = validate(n);
    std::set<std::string> rules;
    for (const auto& v : r.violations) rules.insert(v.rule);
    EXPECT_TRUE(rules.count("missing-supply"));
    EXPECT_TRUE(rules.count("undriven-output"));
}

TEST(Validate, BrokenMirrorWarns) {
    auto n = build_reference_pfd();
    // Rewire one reset device of the Down half so the halves differ.
    auto& d = n.devices[index(*n.find_device("MN10"))];
    d.gate = n.net_id("W3");
    auto r = validate(n);
    EXPECT_TRUE(r.ok());
    bool warned = false;
    for (const auto& v : r.violations) warned = warned || (v.rule == "symmetry" && v.severity == Severity::Warning);
    EXPECT_TRUE(warned);
}

TEST(Reference, TwentyDevicesTenEach) {
    auto n = build_reference_pfd();
    ASSERT_EQ(n.devices.size(), 20u);
    auto pmos = std::count_if(n.devices.begin(), n.devices.end(),
                              [](const Device& d) { return d.polarity == Polarity::PMOS; });
    EXPECT_EQ(pmos, 10);
}

TEST(Reference, MirrorIsomorphic) {
    EXPECT_TRUE(is_mirror_symmetric(build_reference_pfd(), reference_pfd_mirror()));
    ReferencePfdOptions o;
    o.output_buffers = true;
    EXPECT_TRUE(is_mirror_symmetric(build_reference_pfd(o), reference_pfd_mirror()));
    // A relabeling that only swaps the inputs is not a symmetry.
    EXPECT_FALSE(is_mirror_symmetric(build_reference_pfd(), {{"Ref", "Div"}, {"Div", "Ref"}}));
}

TEST(Reference, Deterministic) {
    EXPECT_EQ(serialize_netlist(build_reference_pfd()), serialize_netlist(build_reference_pfd()));
}

TEST(Reference, UpDownNets) {
    EXPECT_EQ(up_down_nets(build_reference_pfd()), std::make_pair(std::string("X"), std::string("Y")));
    ReferencePfdOptions o;
    o.output_buffers = true;
    EXPECT_EQ(up_down_nets(build_reference_pfd(o)), std::make_pair(std::string("Up"), std::string("Down")));
}

TEST(Components, InverterIsOne) {
    auto c = channel_connected_components(parse_netlist(kInverter));
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].devices.size(), 2u);
}

TEST(Components, CascadeIsTwo) {
    EXPECT_EQ(channel_connected_components(parse_netlist(kTwoInverters)).size(), 2u);
}

TEST(Components, ReferenceMatchesBruteForce) {
    for (bool buffers : {false, true}) {
        ReferencePfdOptions o;
        o.output_buffers = buffers;
        auto n = build_reference_pfd(o);
        EXPECT_EQ(channel_connected_components(n).size(), brute_force_components(n));
    }
}

TEST(Components, PartitionProperty) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto n = random_netlist(rng);
        auto comps = channel_connected_components(n);
        std::vector<int> seen(n.devices.size(), 0);
        for (const auto& c : comps)
            for (auto d : c.devices) ++seen[index(d)];
        for (int s : seen) ASSERT_EQ(s, 1);
        ASSERT_EQ(comps.size(), brute_force_components(n));
    }
}
