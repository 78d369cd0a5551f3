#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "pfdlab/loop_sim.hpp"
#include "pfdlab/measure.hpp"
#include "pfdlab/netlist.hpp"
#include "pfdlab/pfd_model.hpp"
#include "pfdlab/switch_sim.hpp"

namespace pfdlab::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string num(double v) { return fmt("%.9g", v); }

Fs time_arg(const std::string& name, const std::string& text) {
    try {
        return parse_time(text);
    } catch (const std::exception& e) {
        throw UsageError("--" + name + ": " + e.what());
    }
}

double phase_arg(const std::string& name, const std::string& text) {
    try {
        return parse_phase(text);
    } catch (const std::exception& e) {
        throw UsageError("--" + name + ": " + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes through a temporary file and renames, so a partial file is never visible.
void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        o << content;
        o.flush();
        if (!o) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

unsigned env_threads() {
    const char* v = std::getenv("PFDLAB_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw UsageError("PFDLAB_THREADS must be a positive integer");
    return static_cast<unsigned>(n);
}

Netlist load_netlist(const std::string& path) { return parse_netlist(read_file(path)); }

// ---- shared flag groups ----------------------------------------------------

struct Output {
    std::string dir = "pfdlab-out";

    void add(CLI::App* app) { app->add_option("--out", dir, "Output directory (created if absent)"); }
    fs::path file(const std::string& name) const { return fs::path(dir) / name; }
};

struct ModelFlags {
    std::string model = "switch";
    std::string netlist;
    std::string reference = "calibrated";
    std::string preset;
    std::string tsetup = "40ps", treset = "0", tout_rise = "0", tout_fall = "0", blind = "0", min_pulse = "0";
    double preset_freq = 1e9;

    void add_behavioral(CLI::App* app) {
        app->add_option("--tsetup", tsetup, "Charge-pump threshold of the behavioral PFD");
        app->add_option("--treset", treset, "Reset path delay");
        app->add_option("--tout-rise", tout_rise, "Output rise delay");
        app->add_option("--tout-fall", tout_fall, "Output fall delay");
        app->add_option("--blind-window", blind, "Edges this soon after a reset starts are lost");
        app->add_option("--min-pulse", min_pulse, "Minimum effective pulse seen by the pump");
    }

    void add(CLI::App* app) {
        app->add_option("--model", model, "behavioral or switch")->check(CLI::IsMember({"behavioral", "switch"}));
        app->add_option("--netlist", netlist, "Switch-level netlist file (default: built-in reference)");
        app->add_option("--reference", reference, "Built-in reference variant")
            ->check(CLI::IsMember({"calibrated", "unbuffered"}));
        app->add_option("--preset", preset, "Behavioral preset")->check(CLI::IsMember({"comparison"}));
        add_behavioral(app);
    }

    PfdConfig config(double freq) const {
        PfdConfig c;
        if (preset == "comparison") c = PfdConfig::comparison_preset(freq);
        c.t_setup = time_arg("tsetup", tsetup);
        c.t_reset = time_arg("treset", treset);
        c.t_out_rise = time_arg("tout-rise", tout_rise);
        c.t_out_fall = time_arg("tout-fall", tout_fall);
        if (preset.empty() || blind != "0") c.blind_window = time_arg("blind-window", blind);
        c.min_effective_pulse = time_arg("min-pulse", min_pulse);
        c.check();
        return c;
    }

    PfdImpl build(double freq) const {
        if (model == "behavioral") return PfdImpl::behavioral(config(freq));
        if (!preset.empty()) throw UsageError("--preset applies to the behavioral model only");
        if (!netlist.empty()) return PfdImpl::switch_level(SimModel::compile(load_netlist(netlist)));
        if (reference == "unbuffered") return PfdImpl::switch_level(SimModel::compile(build_reference_pfd()));
        return calibrated_reference();
    }

    std::string describe() const {
        if (model == "behavioral") return preset.empty() ? "behavioral" : "behavioral/" + preset;
        return netlist.empty() ? "switch/" + reference : "switch/" + netlist;
    }
};

struct StimulusFlags {
    std::vector<std::string> clocks, edges, init;
    std::string tend;
    double freq = 1e9;
    std::string phi = "0.2pi";
    int cycles = 8;

    void add(CLI::App* app) {
        app->add_option("--clock", clocks, "NET:PERIOD[:PHASE[:DUTY]] (repeatable)");
        app->add_option("--edge", edges, "NET@TIME=0|1|X (repeatable)");
        app->add_option("--init", init, "NET=0|1|X initial value (repeatable)");
        app->add_option("--tend", tend, "Simulation horizon");
        app->add_option("--freq", freq, "Ref/Div frequency when no --clock is given");
        app->add_option("--phi", phi, "Div lag when no --clock is given");
        app->add_option("--cycles", cycles, "Measured periods when no --clock is given");
    }

    static std::vector<std::string> split(const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : s) {
            if (c == sep) {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        parts.push_back(cur);
        return parts;
    }

    static Logic logic_arg(const std::string& flag, const std::string& v) {
        if (v.size() != 1 || std::string("01Xx").find(v[0]) == std::string::npos)
            throw UsageError("--" + flag + ": value must be 0, 1 or X");
        return logic_from_char(v[0]);
    }

    std::pair<Stimulus, Fs> build() const {
        Stimulus s;
        Fs horizon = 0;
        if (clocks.empty() && edges.empty()) {
            if (!(freq > 0)) throw UsageError("--freq must be > 0");
            auto pr = phase_stimulus(freq, phase_to_time(phase_arg("phi", phi), freq), cycles);
            s = pr.stim;
            horizon = pr.t_end;
        }
        for (const auto& c : clocks) {
            auto p = split(c, ':');
            if (p.size() < 2 || p.size() > 4 || p[0].empty()) throw UsageError("--clock expects NET:PERIOD[:PHASE[:DUTY]]");
            ClockSpec k;
            k.net = p[0];
            k.period = time_arg("clock", p[1]);
            if (p.size() > 2) k.phase = time_arg("clock", p[2]);
            if (p.size() > 3) {
                try {
                    k.duty = std::stod(p[3]);
                } catch (const std::exception&) {
                    throw UsageError("--clock: bad duty '" + p[3] + "'");
                }
            }
            horizon = std::max(horizon, k.phase + 10 * k.period);
            s.clocks.push_back(k);
        }
        for (const auto& e : edges) {
            auto at = e.find('@'), eq = e.find('=');
            if (at == std::string::npos || eq == std::string::npos || eq < at || at == 0)
                throw UsageError("--edge expects NET@TIME=VALUE");
            EdgeSpec ed{e.substr(0, at), time_arg("edge", e.substr(at + 1, eq - at - 1)),
                        logic_arg("edge", e.substr(eq + 1))};
            horizon = std::max(horizon, ed.time + 1'000'000);
            s.edges.push_back(ed);
        }
        if (!tend.empty()) horizon = time_arg("tend", tend);
        if (horizon <= 0) throw UsageError("--tend must be > 0");
        return {s, horizon};
    }

    RunOptions run_options() const {
        RunOptions o;
        for (const auto& i : init) {
            auto eq = i.find('=');
            if (eq == std::string::npos || eq == 0) throw UsageError("--init expects NET=VALUE");
            o.initial_state[i.substr(0, eq)] = logic_arg("init", i.substr(eq + 1));
        }
        return o;
    }
};

/// Applies a flat JSON object of long-option names to options the command
/// line left unset.
void apply_config(CLI::App* app, const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw UsageError("--config: " + std::string(e.what()));
    }
    if (!j.is_object()) throw UsageError("--config: expected a JSON object");
    auto scalar = [](const json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) return num(v.get<double>());
        throw UsageError("--config: unsupported value " + v.dump());
    };
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = app->get_option_no_throw("--" + key);
        if (!opt || key == "config") throw UsageError("--config: unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        if (value.is_array()) {
            for (const auto& v : value) opt->add_result(scalar(v));
        } else {
            opt->add_result(scalar(value));
        }
        opt->run_callback();
    }
}

// ---- commands ---------------------------------------------------------------

int cmd_parse(const std::string& file, bool emit, std::ostream& out) {
    Netlist n = load_netlist(file);
    if (emit) {
        out << serialize_netlist(n);
        return 0;
    }
    out << file << ": " << n.nets.size() << " nets, " << n.devices.size() << " devices, "
        << channel_connected_components(n).size() << " channel-connected components\n";
    return 0;
}

int cmd_validate(const std::string& file, std::ostream& out) {
    Netlist n = file.empty() ? build_reference_pfd(calibrated_reference_options()) : load_netlist(file);
    auto report = validate(n);
    for (const auto& v : report.violations)
        out << (v.severity == Severity::Error ? "error" : "warning") << ' ' << v.rule << ' ' << v.subject << ": "
            << v.message << '\n';
    if (report.empty()) out << "ok\n";
    return report.ok() ? 0 : 1;
}

Netlist netlist_or_reference(const std::string& file) {
    return file.empty() ? build_reference_pfd(calibrated_reference_options()) : load_netlist(file);
}

int cmd_run(const std::string& file, const StimulusFlags& sf, const std::string& format, bool verify,
            const Output& o, std::ostream& out) {
    auto [stim, t_end] = sf.build();
    auto opts = sf.run_options();
    opts.verify_storage = verify;
    RunStats stats;
    auto w = run(SimModel::compile(netlist_or_reference(file)), stim, t_end, opts, &stats);
    const bool vcd = format == "vcd";
    auto path = o.file(vcd ? "waves.vcd" : "waves.csv");
    write_atomic(path, export_waveform(w, vcd ? WaveFormat::VCD : WaveFormat::CSV));
    std::size_t transitions = 0;
    for (std::size_t i = 0; i < w.names().size(); ++i) transitions += w.trace(i).size();
    out << "wrote " << path.string() << " (" << w.names().size() << " nets, " << transitions << " transitions, "
        << stats.events << " events)\n";
    return 0;
}

int cmd_transfer(const ModelFlags& mf, double freq, int points, int cycles, const Output& o, std::ostream& out) {
    if (points < 2) throw UsageError("--points must be >= 2");
    auto pfd = mf.build(freq);
    auto curve = transfer_sweep(pfd, freq, points, cycles, env_threads());
    std::string csv = "delta_phi_rad,output,settled\n";
    bool settled = true;
    for (const auto& p : curve.points) {
        csv += num(p.delta_phi) + ',' + num(p.output) + ',' + (p.settled ? "1" : "0") + '\n';
        settled = settled && p.settled;
    }
    json j;
    j["model"] = mf.describe();
    j["freq_hz"] = freq;
    j["points"] = points;
    j["cycles"] = cycles;
    j["normalization"] = "duty";
    j["all_settled"] = settled;
    write_atomic(o.file("transfer.csv"), csv);
    write_atomic(o.file("transfer.json"), j.dump(2) + "\n");
    out << "wrote " << o.file("transfer.csv").string() << " (" << points << " points, duty-normalized)\n";
    return 0;
}

int cmd_deadzone(const ModelFlags& mf, double freq, const std::string& resolution, std::ostream& out) {
    auto pfd = mf.build(freq);
    out << format_ps(measure_dead_zone(pfd, freq, time_arg("resolution", resolution))) << '\n';
    return 0;
}

int cmd_blindzone(const ModelFlags& mf, const std::vector<double>& freqs, const std::string& step, std::ostream& out) {
    for (double f : freqs) {
        auto pfd = mf.build(f);
        auto r = measure_blind_zone(pfd, f, time_arg("step", step));
        out << num(f / 1e9) << " GHz: " << format_ps(r.window) << '\n';
    }
    return 0;
}

std::string histogram_csv(const Histogram& h) {
    std::string s = "bin_lo_fs,bin_hi_fs,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        s += num(h.bin_lo(i)) + ',' + num(h.bin_hi(i)) + ',' + std::to_string(h.counts[i]) + '\n';
    return s;
}

int cmd_montecarlo(const ModelFlags& mf, McOptions mo, const std::string& phi, const Output& o, std::ostream& out) {
    mo.phi = phase_arg("phi", phi);
    mo.threads = env_threads();
    auto pfd = mf.build(mo.freq);
    auto r = monte_carlo(pfd, mo);
    json j;
    j["model"] = mf.describe();
    j["samples"] = r.samples;
    j["rel_sigma_3sigma"] = mo.rel_sigma;
    j["seed"] = mo.seed;
    j["phi_rad"] = mo.phi;
    j["freq_hz"] = mo.freq;
    j["mean_up_fs"] = r.mean_up;
    j["std_up_fs"] = r.std_up;
    j["mean_down_fs"] = r.mean_down;
    j["std_down_fs"] = r.std_down;
    std::string samples = "sample,up_fs,down_fs\n";
    for (std::size_t i = 0; i < r.up.size(); ++i)
        samples += std::to_string(i) + ',' + num(r.up[i]) + ',' + num(r.down[i]) + '\n';
    write_atomic(o.file("montecarlo.json"), j.dump(2) + "\n");
    write_atomic(o.file("mc_hist_up.csv"), histogram_csv(r.hist_up));
    write_atomic(o.file("mc_hist_down.csv"), histogram_csv(r.hist_down));
    write_atomic(o.file("mc_samples.csv"), samples);
    out << "up " << fmt("%.2f", r.mean_up / 1e3) << " ps (std " << fmt("%.3f", r.std_up / 1e3) << "), down "
        << fmt("%.2f", r.mean_down / 1e3) << " ps (std " << fmt("%.3f", r.std_down / 1e3) << "), " << r.samples
        << " samples\n";
    return 0;
}

int cmd_pvt(const ModelFlags& mf, double freq, const std::string& phi, const std::vector<double>& temps,
            const std::vector<double>& vdds, const Output& o, std::ostream& out) {
    auto pfd = mf.build(freq);
    PvtModel m;
    auto g = pvt_sweep(pfd, m, temps, vdds, phase_arg("phi", phi), freq, env_threads());
    std::string csv = "temp_c,vdd_v,scale,width_fs\n";
    json pts = json::array();
    for (const auto& p : g.points) {
        csv += num(p.temp) + ',' + num(p.vdd) + ',' + num(p.scale) + ',' + num(p.width) + '\n';
        pts.push_back({{"temp_c", p.temp}, {"vdd_v", p.vdd}, {"scale", p.scale}, {"width_fs", p.width}});
    }
    json j;
    j["model"] = mf.describe();
    j["coefficients"] = {{"a", m.a}, {"b", m.b}, {"c", m.c}, {"e", m.e}};
    j["points"] = pts;
    write_atomic(o.file("pvt.csv"), csv);
    write_atomic(o.file("pvt.json"), j.dump(2) + "\n");
    out << "temp_c";
    for (double v : vdds) out << "  " << fmt("%.2f V", v);
    out << '\n';
    for (double t : temps) {
        out << fmt("%6.0f", t);
        for (double v : vdds) out << "  " << fmt("%5.1f ps", g.width(t, v) / 1e3);
        out << '\n';
    }
    return 0;
}

struct LoopFlags {
    std::string mode = "pll";
    int max_cycles = 5000;
    LoopConfig cfg;
    std::optional<double> c2;
    std::string tolerance;

    void add(CLI::App* app) {
        app->add_option("--mode", mode, "pll or dll")->check(CLI::IsMember({"pll", "dll"}));
        app->add_option("--max-cycles", max_cycles, "Reference cycles before giving up");
        app->add_option("--fref", cfg.f_ref, "Reference frequency (Hz)");
        app->add_option("--n", cfg.divider_n, "Feedback divider");
        app->add_option("--icp-up", cfg.icp_up, "Up current (A)");
        app->add_option("--icp-down", cfg.icp_down, "Down current (A)");
        app->add_option("--leakage", cfg.leakage, "Leakage from the control node (A)");
        app->add_option("--r", cfg.filter.r, "Filter resistor (ohm)");
        app->add_option("--c1", cfg.filter.c1, "Integrating capacitor (F)");
        app->add_option("--c2", c2, "Shunt capacitor (F)");
        app->add_option("--f0", cfg.f0, "VCO free-running frequency (Hz)");
        app->add_option("--kvco", cfg.kvco, "VCO gain (Hz/V)");
        app->add_option("--d0", cfg.d0, "Delay line at 0 V (s)");
        app->add_option("--kdl", cfg.kdl, "Delay line gain (s/V)");
        app->add_option("--vinit", cfg.v_init, "Initial control voltage (V)");
        app->add_option("--vdd", cfg.vdd, "Control voltage ceiling (V)");
        app->add_option("--lock-cycles", cfg.lock_cycles, "Consecutive in-tolerance cycles for lock");
        app->add_option("--tolerance", tolerance, "Lock tolerance as an edge offset");
    }
};

int cmd_lock(LoopFlags lf, const ModelFlags& mf, const Output& o, std::ostream& out) {
    LoopConfig cfg = lf.cfg;
    cfg.mode = lf.mode == "dll" ? LoopMode::DLL : LoopMode::PLL;
    cfg.filter.c2 = lf.c2;
    cfg.pfd = mf.config(cfg.f_ref);
    if (!lf.tolerance.empty()) cfg.lock_tolerance = to_seconds(time_arg("tolerance", lf.tolerance));
    auto r = run_lock(cfg, lf.max_cycles);
    write_atomic(o.file("lock.csv"), lock_trace_csv(r));
    write_atomic(o.file("lock.json"), lock_report_json(r, cfg));
    if (r.locked)
        out << to_string(cfg.mode) << " locked at " << fmt("%.3f", static_cast<double>(r.lock_time) / 1e6)
            << " ns, steady phase error " << fmt("%.4f", r.steady_phase_error) << " rad, final frequency "
            << num(r.final_freq) << " Hz\n";
    else
        out << to_string(cfg.mode) << " did not lock in " << r.cycles << " cycles\n";
    if (r.clamp_events) out << "warning: control voltage clamped " << r.clamp_events << " times\n";
    return 0;
}

int cmd_dennard(double power, double from, double to, std::ostream& out) {
    out << num(dennard_scale(power, from, to)) << " W\n";
    return 0;
}

int cmd_activity(const std::string& waves, const std::string& file, const StimulusFlags& sf,
                 const std::vector<std::string>& weights, const Output& o, std::ostream& out) {
    WaveformSet w;
    if (!waves.empty()) {
        w = parse_waveform_csv(read_file(waves));
    } else {
        auto [stim, t_end] = sf.build();
        w = run(SimModel::compile(netlist_or_reference(file)), stim, t_end, sf.run_options());
    }
    std::map<std::string, double> wmap;
    for (const auto& s : weights) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--weight expects NET=WEIGHT");
        try {
            wmap[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("--weight: bad number in '" + s + "'");
        }
    }
    auto rep = activity_report(w, wmap);
    std::string csv = "net,toggles\n";
    json j;
    for (const auto& [net, n] : rep.toggles) {
        csv += net + ',' + std::to_string(n) + '\n';
        j["toggles"][net] = n;
        out << net << ' ' << n << '\n';
    }
    j["weighted_total"] = rep.weighted_total;
    write_atomic(o.file("activity.csv"), csv);
    write_atomic(o.file("activity.json"), j.dump(2) + "\n");
    out << "weighted total " << num(rep.weighted_total) << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"pfdlab: switch-level and behavioral PFD laboratory", "pfdlab"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    Output output;
    ModelFlags model;
    StimulusFlags stim;
    LoopFlags loop;
    McOptions mc;
    std::string config, file, waves, format = "csv", resolution = "1fs", step = "1ps", phi = "0.2pi", pvt_phi = "0.1pi";
    bool emit = false, verify = false;
    double freq = 1e9, power = 0, from_nm = 0, to_nm = 0;
    int points = 201, cycles = 16;
    std::vector<double> freqs{1e9, 2e9, 3e9};
    std::vector<double> temps = default_pvt_temps(), vdds = default_pvt_vdds();
    std::vector<std::string> weights;

    auto sub = [&](const char* name, const char* desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->add_option("--config", config, "JSON file of option defaults; flags take precedence");
        return s;
    };

    auto* parse = sub("parse", "Parse a netlist and report its size");
    parse->add_option("netlist", file, "Netlist file")->required();
    parse->add_flag("--emit", emit, "Print the canonical form");

    auto* val = sub("validate", "Run electrical rule checks (default: built-in reference)");
    val->add_option("netlist", file, "Netlist file");

    auto* runc = sub("run", "Switch-level simulation to a waveform file");
    runc->add_option("netlist", file, "Netlist file (default: built-in calibrated reference)");
    stim.add(runc);
    runc->add_option("--format", format, "csv or vcd")->check(CLI::IsMember({"csv", "vcd"}));
    runc->add_flag("--verify-storage", verify, "Check stored nets after every timestep");
    output.add(runc);

    auto* tr = sub("transfer", "Phase transfer characteristic");
    model.add(tr);
    tr->add_option("--freq", freq, "Input frequency (Hz)");
    tr->add_option("--points", points, "Sweep points over [-pi, pi]");
    tr->add_option("--cycles", cycles, "Measured periods per point");
    output.add(tr);

    auto* dz = sub("deadzone", "Smallest phase offset that reaches the charge pump");
    model.add(dz);
    dz->add_option("--freq", freq, "Input frequency (Hz)");
    dz->add_option("--resolution", resolution, "Bisection resolution");

    auto* bz = sub("blindzone", "Window after a reset in which an edge is lost");
    model.add(bz);
    bz->add_option("--freq", freqs, "Input frequencies (Hz)");
    bz->add_option("--step", step, "Probe spacing");

    auto* mcc = sub("montecarlo", "Delay variation study of pulse widths");
    model.add(mcc);
    mcc->add_option("--samples", mc.samples, "Sample count");
    mcc->add_option("--sigma", mc.rel_sigma, "Relative delay spread at 3 sigma");
    mcc->add_option("--phi", phi, "Phase offset");
    mcc->add_option("--freq", mc.freq, "Input frequency (Hz)");
    mcc->add_option("--seed", mc.seed, "Random seed");
    mcc->add_option("--bins", mc.bins, "Histogram bins");
    mcc->add_option("--cycles", mc.cycles, "Measured periods per sample");
    output.add(mcc);

    auto* pvt = sub("pvt", "Pulse width over supply and temperature");
    model.add(pvt);
    pvt->add_option("--freq", freq, "Input frequency (Hz)");
    pvt->add_option("--phi", pvt_phi, "Phase offset");
    pvt->add_option("--temps", temps, "Temperatures (C)");
    pvt->add_option("--vdds", vdds, "Supply voltages (V)");
    output.add(pvt);

    auto* lock = sub("lock", "PLL or DLL acquisition");
    loop.add(lock);
    model.add_behavioral(lock);
    output.add(lock);

    auto* den = sub("dennard", "Scale power between process nodes");
    den->add_option("--power", power, "Power (W)")->required();
    den->add_option("--from", from_nm, "Source node (nm)")->required();
    den->add_option("--to", to_nm, "Target node (nm)")->required();

    auto* act = sub("activity", "Toggle counts as a switching-activity proxy");
    act->add_option("--waves", waves, "Waveform CSV (skips simulation)");
    act->add_option("netlist", file, "Netlist file (default: built-in calibrated reference)");
    stim.add(act);
    act->add_option("--weight", weights, "NET=WEIGHT (repeatable)");
    output.add(act);

    CLI::App* chosen = nullptr;
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        for (auto* s : app.get_subcommands()) chosen = s;
        if (!config.empty()) apply_config(chosen, config);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        CLI::App* ctx = chosen;
        if (!ctx)
            for (auto* s : app.get_subcommands()) ctx = s;
        err << (ctx ? ctx->help() : app.help());
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        const std::string name = chosen->get_name();
        if (name == "parse") return cmd_parse(file, emit, out);
        if (name == "validate") return cmd_validate(file, out);
        if (name == "run") return cmd_run(file, stim, format, verify, output, out);
        if (name == "transfer") return cmd_transfer(model, freq, points, cycles, output, out);
        if (name == "deadzone") return cmd_deadzone(model, freq, resolution, out);
        if (name == "blindzone") return cmd_blindzone(model, freqs, step, out);
        if (name == "montecarlo") return cmd_montecarlo(model, mc, phi, output, out);
        if (name == "pvt") return cmd_pvt(model, freq, pvt_phi, temps, vdds, output, out);
        if (name == "lock") return cmd_lock(loop, model, output, out);
        if (name == "dennard") return cmd_dennard(power, from_nm, to_nm, out);
        if (name == "activity") return cmd_activity(waves, file, stim, weights, output, out);
        err << "error: unhandled subcommand " << name << '\n';
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        err << (file.empty() ? std::string("<input>") : file) << ": " << e.what() << '\n';
        return 1;
    } catch (const ValidationFailure& e) {
        err << "error: netlist failed validation\n";
        for (const auto& v : e.report().violations)
            if (v.severity == Severity::Error) err << "  " << v.rule << ' ' << v.subject << ": " << v.message << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace pfdlab::cli
