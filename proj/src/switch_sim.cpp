#include "pfdlab/switch_sim.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>

namespace pfdlab {

char to_char(Logic v) {
    switch (v) {
        case Logic::Zero: return '0';
        case Logic::One: return '1';
        case Logic::Unknown: return 'X';
    }
    return 'X';
}

Logic logic_from_char(char c) {
    switch (c) {
        case '0': return Logic::Zero;
        case '1': return Logic::One;
        case 'X':
        case 'x': return Logic::Unknown;
        default: throw std::invalid_argument(std::string("invalid logic value '") + c + "'");
    }
}

namespace {

std::string summarize(const ValidationReport& report) {
    std::string msg = "netlist failed validation:";
    for (const auto& v : report.violations)
        if (v.severity == Severity::Error) msg += " [" + v.rule + " " + v.subject + "]";
    return msg;
}

}  // namespace

ValidationFailure::ValidationFailure(ValidationReport report)
    : std::runtime_error(summarize(report)), report_(std::move(report)) {}

SimModel SimModel::compile(const Netlist& netlist, const DelayConfig& config) {
    auto report = validate(netlist);
    if (!report.ok()) throw ValidationFailure(std::move(report));
    if (config.default_delay < 0) throw std::invalid_argument("default delay must be >= 0");

    SimModel m;
    m.netlist_ = netlist;
    m.delays_.reserve(netlist.devices.size());
    for (const auto& d : netlist.devices) {
        Fs delay = config.default_delay;
        if (d.delay) delay = *d.delay;
        if (auto it = config.overrides.find(d.name); it != config.overrides.end()) delay = it->second;
        if (delay < 0) throw std::invalid_argument("negative delay for device " + d.name);
        m.delays_.push_back(delay);
    }
    for (const auto& [name, _] : config.overrides)
        if (!netlist.find_device(name)) throw std::invalid_argument("delay override for unknown device " + name);
    m.index_topology();
    return m;
}

void SimModel::index_topology() {
    components_ = channel_connected_components(netlist_);
    const auto n = netlist_.nets.size();
    component_of_.assign(n, -1);
    fanout_.assign(n, {});
    for (std::size_t c = 0; c < components_.size(); ++c) {
        for (NetId net : components_[c].nets) component_of_[index(net)] = static_cast<long>(c);
        for (DeviceId dev : components_[c].devices) {
            const auto& d = netlist_.device(dev);
            fanout_[index(d.gate)].push_back(c);
            for (NetId t : {d.drain, d.source}) {
                const auto& net = netlist_.net(t);
                if (net.is_supply() || net.kind == NetKind::Input) fanout_[index(t)].push_back(c);
            }
        }
    }
    for (auto& f : fanout_) {
        std::sort(f.begin(), f.end());
        f.erase(std::unique(f.begin(), f.end()), f.end());
    }
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return netlist_.nets[a].name < netlist_.nets[b].name; });
    name_rank_.assign(n, 0);
    for (std::uint32_t r = 0; r < n; ++r) name_rank_[order[r]] = r;
}

Fs SimModel::max_delay() const { return delays_.empty() ? 0 : *std::max_element(delays_.begin(), delays_.end()); }

std::optional<std::size_t> SimModel::component_of(NetId net) const {
    auto c = component_of_[index(net)];
    if (c < 0) return std::nullopt;
    return static_cast<std::size_t>(c);
}

SimModel SimModel::with_delays(std::vector<Fs> delays) const {
    if (delays.size() != delays_.size()) throw std::invalid_argument("delay vector size mismatch");
    if (std::any_of(delays.begin(), delays.end(), [](Fs d) { return d < 0; }))
        throw std::invalid_argument("delays must be >= 0");
    SimModel copy = *this;
    copy.delays_ = std::move(delays);
    return copy;
}

// ---------------------------------------------------------------------------
// Component resolution

namespace {

enum class Conduction : std::uint8_t { Off, On, Maybe, Unset };

Conduction conduction(Polarity p, Logic gate) {
    if (gate == Logic::Unknown) return Conduction::Maybe;
    bool on = (p == Polarity::NMOS) == (gate == Logic::One);
    return on ? Conduction::On : Conduction::Off;
}

// Reusable scratch space so the hot path does not allocate per solve.
struct SolveScratch {
    std::vector<std::size_t> parent;
    std::vector<std::uint8_t> flags;  // bit0 high, bit1 low, bit2 unknown source
    std::vector<long> local_of;  // NetId -> local index, -1 if not in component
};

constexpr std::uint8_t kHigh = 1, kLow = 2, kUnknownSource = 4;

struct Outcome {
    Logic value;
    Origin origin;
};

std::uint8_t boundary_flags(const Net& net, Logic v) {
    if (net.kind == NetKind::SupplyHigh) return kHigh;
    if (net.kind == NetKind::SupplyLow) return kLow;
    return v == Logic::One ? kHigh : v == Logic::Zero ? kLow : kUnknownSource;
}

// Resolves every net of the component using devices whose conduction is On
// (and Maybe, when include_maybe). `out` is parallel to comp.nets.
void resolve(const SimModel& model, const ChannelComponent& comp, std::span<const LogicValue> states,
             std::span<const Conduction> cond, bool include_maybe, SolveScratch& s, std::vector<Outcome>& out) {
    const auto& nl = model.netlist();
    const std::size_t k = comp.nets.size();
    s.parent.resize(k);
    std::iota(s.parent.begin(), s.parent.end(), std::size_t{0});
    s.flags.assign(k, 0);
    auto find = [&](std::size_t x) {
        while (s.parent[x] != x) x = s.parent[x] = s.parent[s.parent[x]];
        return x;
    };

    for (std::size_t i = 0; i < comp.devices.size(); ++i) {
        auto c = cond[i];
        if (c == Conduction::Off || (c == Conduction::Maybe && !include_maybe)) continue;
        const auto& d = nl.device(comp.devices[i]);
        long a = s.local_of[index(d.drain)], b = s.local_of[index(d.source)];
        if (a >= 0 && b >= 0) {
            auto ra = find(static_cast<std::size_t>(a)), rb = find(static_cast<std::size_t>(b));
            if (ra != rb) {
                s.parent[ra] = rb;
                s.flags[rb] |= s.flags[ra];
            }
        }
    }
    // Boundary terminals attach after unions so flags land on final roots.
    for (std::size_t i = 0; i < comp.devices.size(); ++i) {
        auto c = cond[i];
        if (c == Conduction::Off || (c == Conduction::Maybe && !include_maybe)) continue;
        const auto& d = nl.device(comp.devices[i]);
        long a = s.local_of[index(d.drain)], b = s.local_of[index(d.source)];
        if (a >= 0 && b < 0) s.flags[find(static_cast<std::size_t>(a))] |= boundary_flags(nl.net(d.source), states[index(d.source)].value);
        if (b >= 0 && a < 0) s.flags[find(static_cast<std::size_t>(b))] |= boundary_flags(nl.net(d.drain), states[index(d.drain)].value);
    }
    out.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        auto r = find(i);
        auto f = s.flags[r];
        if (f != 0) {
            if ((f & kUnknownSource) || (f & (kHigh | kLow)) == (kHigh | kLow)) {
                out[i] = {Logic::Unknown, Origin::Driven};
            } else {
                out[i] = {(f & kHigh) ? Logic::One : Logic::Zero, Origin::Driven};
            }
        } else {
            out[i] = {states[index(comp.nets[i])].value, Origin::Stored};
        }
    }
}

void solve_into(const SimModel& model, std::size_t ci, std::span<const LogicValue> states,
                std::span<const Conduction> cond, SolveScratch& s, std::vector<Outcome>& definite,
                std::vector<Outcome>& possible, std::vector<LogicValue>& result) {
    const auto& comp = model.components()[ci];
    for (std::size_t i = 0; i < comp.nets.size(); ++i) s.local_of[index(comp.nets[i])] = static_cast<long>(i);
    resolve(model, comp, states, cond, false, s, definite);
    bool any_maybe = std::any_of(cond.begin(), cond.end(), [](Conduction c) { return c == Conduction::Maybe; });
    if (any_maybe) resolve(model, comp, states, cond, true, s, possible);
    result.resize(comp.nets.size());
    for (std::size_t i = 0; i < comp.nets.size(); ++i) {
        auto def = definite[i];
        if (any_maybe && possible[i].value != def.value) {
            auto origin = (def.origin == Origin::Driven || possible[i].origin == Origin::Driven) ? Origin::Driven
                                                                                                  : Origin::Stored;
            result[i] = {Logic::Unknown, origin};
        } else {
            result[i] = {def.value, def.origin};
        }
    }
    for (NetId n : comp.nets) s.local_of[index(n)] = -1;
}

}  // namespace

std::vector<LogicValue> solve_ccc(const SimModel& model, std::size_t component,
                                  std::span<const LogicValue> net_states) {
    const auto& comp = model.components().at(component);
    const auto& nl = model.netlist();
    if (net_states.size() != nl.nets.size()) throw std::invalid_argument("net_states must cover every net");
    std::vector<Conduction> cond;
    for (DeviceId d : comp.devices) {
        const auto& dev = nl.device(d);
        cond.push_back(conduction(dev.polarity, net_states[index(dev.gate)].value));
    }
    SolveScratch s;
    s.local_of.assign(nl.nets.size(), -1);
    std::vector<Outcome> a, b;
    std::vector<LogicValue> out;
    solve_into(model, component, net_states, cond, s, a, b, out);
    return out;
}

// ---------------------------------------------------------------------------
// WaveformSet

WaveformSet::WaveformSet(std::vector<std::string> names, Fs horizon) : names_(std::move(names)), horizon_(horizon) {
    std::sort(names_.begin(), names_.end());
    traces_.resize(names_.size());
}

std::optional<std::size_t> WaveformSet::find(std::string_view net) const {
    auto it = std::lower_bound(names_.begin(), names_.end(), net);
    if (it == names_.end() || *it != net) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::span<const Transition> WaveformSet::trace(std::string_view net) const {
    auto i = find(net);
    if (!i) throw std::out_of_range("no waveform for net '" + std::string(net) + "'");
    return traces_[*i];
}

Logic WaveformSet::value_at(std::string_view net, Fs t) const {
    auto tr = trace(net);
    auto it = std::upper_bound(tr.begin(), tr.end(), t, [](Fs x, const Transition& e) { return x < e.time; });
    if (it == tr.begin()) return Logic::Unknown;
    return std::prev(it)->value;
}

void WaveformSet::record(std::size_t i, Fs time, Logic value) {
    auto& tr = traces_[i];
    if (!tr.empty() && tr.back().time == time) {
        tr.back().value = value;
        if (tr.size() >= 2 && tr[tr.size() - 2].value == value) tr.pop_back();
        return;
    }
    if (!tr.empty() && tr.back().value == value) return;
    tr.push_back({time, value});
}

// ---------------------------------------------------------------------------
// Event-driven run

namespace {

struct Event {
    Fs time;
    std::uint32_t rank;   // net name rank
    std::uint64_t serial; // matches Pending::serial unless superseded
    std::uint32_t net;
    Logic value;
    bool external;

    bool operator>(const Event& o) const {
        if (time != o.time) return time > o.time;
        if (rank != o.rank) return rank > o.rank;
        return serial > o.serial;
    }
};

struct Pending {
    bool active = false;
    Logic value = Logic::Unknown;
    Fs time = 0;
    std::uint64_t serial = 0;
};

std::vector<EdgeSpec> expand_stimulus(const Netlist& nl, const Stimulus& stim, Fs t_end) {
    auto check = [&](const std::string& net) {
        auto id = nl.find_net(net);
        if (!id || nl.net(*id).kind != NetKind::Input)
            throw std::invalid_argument("stimulus net '" + net + "' is not a declared input");
    };
    for (const auto& c : stim.clocks) check(c.net);
    for (const auto& e : stim.edges) check(e.net);
    return expand_edges(stim, t_end);
}

}  // namespace

std::vector<EdgeSpec> expand_edges(const Stimulus& stim, Fs t_end) {
    std::vector<EdgeSpec> edges;
    for (const auto& c : stim.clocks) {
        if (c.period <= 0) throw std::invalid_argument("clock period must be > 0");
        if (!(c.duty > 0.0 && c.duty < 1.0)) throw std::invalid_argument("clock duty must be in (0, 1)");
        if (c.phase < 0) throw std::invalid_argument("clock phase must be >= 0");
        Fs high = static_cast<Fs>(static_cast<double>(c.period) * c.duty + 0.5);
        if (high <= 0 || high >= c.period) throw std::invalid_argument("clock duty rounds to a degenerate pulse");
        for (Fs t = c.phase; t <= t_end; t += c.period) {
            edges.push_back({c.net, t, Logic::One});
            if (t + high <= t_end) edges.push_back({c.net, t + high, Logic::Zero});
        }
    }
    std::map<std::string, Fs> last;
    for (const auto& e : stim.edges) {
        if (e.time < 0) throw std::invalid_argument("edge time must be >= 0");
        if (auto it = last.find(e.net); it != last.end() && e.time <= it->second)
            throw std::invalid_argument("edge times must be strictly increasing per net (" + e.net + ")");
        last[e.net] = e.time;
        edges.push_back(e);
    }
    std::stable_sort(edges.begin(), edges.end(), [](const EdgeSpec& a, const EdgeSpec& b) { return a.time < b.time; });
    return edges;
}

namespace {

class Engine {
public:
    Engine(const SimModel& model, const RunOptions& options) : model_(model), nl_(model.netlist()), options_(options) {
        const auto n = nl_.nets.size();
        state_.assign(n, LogicValue{});
        pending_.assign(n, Pending{});
        scratch_.local_of.assign(n, -1);
        const auto& comps = model_.components();
        cond_.resize(comps.size());
        for (std::size_t c = 0; c < comps.size(); ++c) cond_[c].assign(comps[c].devices.size(), Conduction::Unset);
        dirty_.assign(comps.size(), false);
        std::vector<std::string> names;
        for (const auto& net : nl_.nets) names.push_back(net.name);
        wave_ = WaveformSet(std::move(names), 0);
        wave_index_.resize(n);
        for (std::size_t i = 0; i < n; ++i) wave_index_[i] = *wave_.find(nl_.nets[i].name);
    }

    WaveformSet run(const Stimulus& stim, Fs t_end, RunStats* stats) {
        if (t_end <= 0) throw std::invalid_argument("t_end must be > 0");
        wave_.set_horizon(t_end);

        for (std::size_t i = 0; i < nl_.nets.size(); ++i) {
            const auto& net = nl_.nets[i];
            if (net.kind == NetKind::SupplyHigh) state_[i] = {Logic::One, Origin::Driven};
            else if (net.kind == NetKind::SupplyLow) state_[i] = {Logic::Zero, Origin::Driven};
            else if (net.kind == NetKind::Input) state_[i] = {Logic::Zero, Origin::Driven};
            else state_[i] = {Logic::Unknown, Origin::Stored};
        }
        for (const auto& [name, v] : options_.initial_state) {
            auto id = nl_.find_net(name);
            if (!id) throw std::invalid_argument("initial state for unknown net '" + name + "'");
            if (nl_.net(*id).is_supply()) throw std::invalid_argument("supply nets cannot be initialized");
            state_[index(*id)].value = v;
        }
        for (const auto& e : expand_stimulus(nl_, stim, t_end)) {
            auto id = index(nl_.net_id(e.net));
            if (e.time == 0) {
                state_[id].value = e.value;
                continue;
            }
            push({e.time, model_.name_rank(NetId(id)), next_serial_++, static_cast<std::uint32_t>(id), e.value, true});
        }
        for (std::size_t i = 0; i < nl_.nets.size(); ++i) wave_.record(wave_index_[i], 0, state_[i].value);

        // Power-on: every component resolves once at t = 0.
        std::fill(dirty_.begin(), dirty_.end(), true);
        Fs now = 0;
        std::size_t iterations_at_now = 0;
        settle(now);

        while (!queue_.empty() && queue_.top().time <= t_end) {
            Fs t = queue_.top().time;
            if (t == now) {
                if (++iterations_at_now > options_.oscillation_bound)
                    throw OscillationError("more than " + std::to_string(options_.oscillation_bound) +
                                           " zero-delay iterations at t=" + std::to_string(t) + " fs");
            } else {
                now = t;
                iterations_at_now = 0;
            }
            while (!queue_.empty() && queue_.top().time == t) {
                Event e = queue_.top();
                queue_.pop();
                if (!e.external) {
                    auto& p = pending_[e.net];
                    if (!p.active || p.serial != e.serial) continue;
                    p.active = false;
                }
                apply(e.net, e.value, t);
                ++events_;
            }
            settle(t);
            if (options_.verify_storage) verify_storage(t);
        }
        if (stats) {
            stats->events = events_;
            stats->solves = solves_;
        }
        return std::move(wave_);
    }

private:
    void push(const Event& e) { queue_.push(e); }

    void apply(std::uint32_t net, Logic value, Fs t) {
        if (state_[net].value == value) return;
        state_[net].value = value;
        wave_.record(wave_index_[net], t, value);
        for (auto c : model_.fanout(NetId(net))) dirty_[c] = true;
        if (auto c = model_.component_of(NetId(net))) dirty_[*c] = true;
    }

    void settle(Fs t) {
        const auto& comps = model_.components();
        for (std::size_t c = 0; c < comps.size(); ++c) {
            if (!dirty_[c]) continue;
            dirty_[c] = false;
            solve_and_schedule(c, t);
        }
    }

    void solve_and_schedule(std::size_t ci, Fs t) {
        ++solves_;
        const auto& comp = model_.components()[ci];
        auto& cond = cond_[ci];
        Fs changed_delay = -1;
        Fs active_delay = 0;
        for (std::size_t i = 0; i < comp.devices.size(); ++i) {
            const auto& d = nl_.device(comp.devices[i]);
            auto c = conduction(d.polarity, state_[index(d.gate)].value);
            Fs delay = model_.delay(comp.devices[i]);
            if (c != cond[i] && c != Conduction::Off) changed_delay = std::max(changed_delay, delay);
            if (c != Conduction::Off) active_delay = std::max(active_delay, delay);
            cond[i] = c;
        }
        // Devices that just turned on set the delay; a turn-off or a pure
        // boundary change (input driving a channel terminal) travels through
        // the devices still conducting.
        Fs delay = changed_delay >= 0 ? changed_delay : active_delay;

        solve_into(model_, ci, state_, cond, scratch_, definite_, possible_, result_);
        for (std::size_t i = 0; i < comp.nets.size(); ++i) {
            auto net = index(comp.nets[i]);
            auto target = result_[i];
            state_[net].origin = target.origin;
            auto& p = pending_[net];
            if (target.value == state_[net].value) {
                // A driven return cancels a shorter pulse; a node that merely
                // lost its path keeps a definite transition already in flight.
                if (target.origin == Origin::Driven || p.value == Logic::Unknown) p.active = false;
                continue;
            }
            if (p.active && p.value == target.value) continue;
            p = {true, target.value, t + delay, next_serial_++};
            push({p.time, model_.name_rank(NetId(net)), p.serial, static_cast<std::uint32_t>(net), p.value, false});
        }
    }

    void verify_storage(Fs t) {
        const auto& comps = model_.components();
        for (std::size_t ci = 0; ci < comps.size(); ++ci) {
            solve_into(model_, ci, state_, cond_[ci], scratch_, definite_, possible_, result_);
            for (std::size_t i = 0; i < comps[ci].nets.size(); ++i) {
                auto net = index(comps[ci].nets[i]);
                if (state_[net].origin == Origin::Stored && definite_[i].origin == Origin::Driven)
                    throw std::logic_error("storage soundness violated on net " + nl_.nets[net].name + " at t=" +
                                           std::to_string(t));
            }
        }
    }

    const SimModel& model_;
    const Netlist& nl_;
    const RunOptions& options_;
    std::vector<LogicValue> state_;
    std::vector<Pending> pending_;
    std::vector<std::vector<Conduction>> cond_;
    std::vector<bool> dirty_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t next_serial_ = 0;
    std::uint64_t events_ = 0;
    std::uint64_t solves_ = 0;
    SolveScratch scratch_;
    std::vector<Outcome> definite_, possible_;
    std::vector<LogicValue> result_;
    WaveformSet wave_;
    std::vector<std::size_t> wave_index_;
};

}  // namespace

WaveformSet run(const SimModel& model, const Stimulus& stim, Fs t_end, const RunOptions& options, RunStats* stats) {
    Engine engine(model, options);
    return engine.run(stim, t_end, stats);
}

// ---------------------------------------------------------------------------
// Export

namespace {

// VCD identifier codes: printable ASCII 33..126, little-endian base 94.
std::string vcd_code(std::size_t i) {
    std::string s;
    do {
        s.push_back(static_cast<char>(33 + i % 94));
        i /= 94;
    } while (i > 0);
    return s;
}

char vcd_char(Logic v) { return v == Logic::Unknown ? 'x' : to_char(v); }

struct Row {
    Fs time;
    std::size_t net;
    Logic value;
};

std::vector<Row> sorted_rows(const WaveformSet& w) {
    std::vector<Row> rows;
    for (std::size_t i = 0; i < w.names().size(); ++i)
        for (const auto& tr : w.trace(i)) rows.push_back({tr.time, i, tr.value});
    // Names are sorted, so net index order is name order.
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.time != b.time ? a.time < b.time : a.net < b.net;
    });
    return rows;
}

}  // namespace

std::string export_waveform(const WaveformSet& w, WaveFormat format) {
    std::ostringstream os;
    auto rows = sorted_rows(w);
    if (format == WaveFormat::CSV) {
        os << "time_fs,net,value\n";
        for (const auto& r : rows) os << r.time << ',' << w.names()[r.net] << ',' << to_char(r.value) << '\n';
        return os.str();
    }
    os << "$date pfdlab $end\n";
    os << "$version pfdlab switch-level simulator $end\n";
    os << "$timescale 1fs $end\n";
    os << "$scope module top $end\n";
    for (std::size_t i = 0; i < w.names().size(); ++i)
        os << "$var wire 1 " << vcd_code(i) << ' ' << w.names()[i] << " $end\n";
    os << "$upscope $end\n";
    os << "$enddefinitions $end\n";
    std::size_t k = 0;
    bool first = true;
    while (k < rows.size()) {
        Fs t = rows[k].time;
        os << '#' << t << '\n';
        if (first && t == 0) os << "$dumpvars\n";
        while (k < rows.size() && rows[k].time == t) {
            os << vcd_char(rows[k].value) << vcd_code(rows[k].net) << '\n';
            ++k;
        }
        if (first && t == 0) os << "$end\n";
        first = false;
    }
    os << '#' << w.horizon() << '\n';
    return os.str();
}

WaveformSet parse_waveform_csv(std::string_view csv, std::optional<Fs> horizon) {
    std::vector<Row> rows;
    std::vector<std::string> names;
    std::map<std::string, std::size_t> ids;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    Fs last_time = 0;
    while (pos < csv.size()) {
        auto eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) eol = csv.size();
        auto line = csv.substr(pos, eol - pos);
        pos = eol + 1;
        if (line_no++ == 0) {
            if (line != "time_fs,net,value") throw std::invalid_argument("waveform CSV: bad header");
            continue;
        }
        if (line.empty()) continue;
        auto c1 = line.find(','), c2 = line.rfind(',');
        if (c1 == std::string_view::npos || c2 == c1 || c2 + 2 != line.size())
            throw std::invalid_argument("waveform CSV: malformed row " + std::to_string(line_no));
        Fs t = std::stoll(std::string(line.substr(0, c1)));
        std::string net(line.substr(c1 + 1, c2 - c1 - 1));
        auto [it, inserted] = ids.emplace(net, names.size());
        if (inserted) names.push_back(net);
        rows.push_back({t, it->second, logic_from_char(line[c2 + 1])});
        last_time = std::max(last_time, t);
    }
    WaveformSet w(names, horizon.value_or(last_time));
    for (const auto& r : rows) w.record(*w.find(names[r.net]), r.time, r.value);
    return w;
}

}  // namespace pfdlab
