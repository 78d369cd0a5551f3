#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfdlab/measure.hpp"

using namespace pfdlab;

namespace {

PfdImpl behavioral(Fs t_setup = 40'000) {
    PfdConfig c;
    c.t_setup = t_setup;
    return PfdImpl::behavioral(c);
}

PfdImpl unbuffered() { return PfdImpl::switch_level(SimModel::compile(build_reference_pfd())); }

double transfer_point(const PfdImpl& pfd, double freq, Fs delta, int cycles) {
    auto tr = run_phase(pfd, freq, delta, cycles);
    double up = 0, down = 0;
    for (const auto& p : tr.up)
        if (p.visible) up += static_cast<double>(p.effective);
    for (const auto& p : tr.down)
        if (p.visible) down += static_cast<double>(p.effective);
    return (up - down) / (cycles * static_cast<double>(period_of(freq))) / 0.5;
}

}  // namespace

TEST(DeadZone, BehavioralTracksSetup) {
    for (Fs ts : {0, 10'000, 40'000, 100'000}) {
        Fs dz = measure_dead_zone(behavioral(ts), 1e9, 1);
        EXPECT_LE(std::llabs(dz - ts), 1) << ts;
    }
    EXPECT_EQ(measure_dead_zone(behavioral(0), 1e9, 1), 0);
}

TEST(DeadZone, CalibratedSwitchLevel) {
    Fs dz = measure_dead_zone(calibrated_reference(), 1e9, 1);
    EXPECT_LE(std::llabs(dz - 40'000), 2'000);
}

TEST(Calibration, CommittedConstantsAreTheFixedPoint) {
    auto r = calibrate_reference();
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.options.buffer_fall, calibrated_reference_options().buffer_fall);
    EXPECT_EQ(r.options.buffer_rise, calibrated_reference_options().buffer_rise);
    EXPECT_NEAR(r.width, 97'700, 50);
}

TEST(BlindZone, BehavioralAndPreset) {
    for (double f : {1e9, 2e9, 3e9}) {
        EXPECT_EQ(measure_blind_zone(behavioral(), f).window, 0) << f;
        auto preset = PfdImpl::behavioral(PfdConfig::comparison_preset(f));
        EXPECT_LE(std::llabs(measure_blind_zone(preset, f).window - period_of(f) / 10), 1'000) << f;
    }
    auto one = PfdImpl::behavioral(PfdConfig::comparison_preset(1e9));
    EXPECT_EQ(measure_blind_zone(one, 1e9).window, 100'000);
    auto two = PfdImpl::behavioral(PfdConfig::comparison_preset(2e9));
    EXPECT_EQ(measure_blind_zone(two, 2e9).window, 50'000);
}

TEST(Transfer, IdealPoints) {
    auto c = transfer_sweep(behavioral(), 1e9, 201);
    ASSERT_EQ(c.points.size(), 201u);
    EXPECT_EQ(c.points[100].output, 0.0);
    EXPECT_NEAR(c.points[150].delta_phi, kPi / 2, 1e-12);
    EXPECT_NEAR(c.points[150].output, 0.5, 1e-3);
    EXPECT_NEAR(c.points[200].output, 1.0, 2e-2);
}

TEST(Transfer, AntisymmetricMonotone) {
    for (const auto& pfd : {behavioral(), calibrated_reference()}) {
        auto c = transfer_sweep(pfd, 1e9, 201);
        for (std::size_t i = 0; i < 201; ++i) {
            ASSERT_LT(std::abs(c.points[i].output + c.points[200 - i].output), 0.01) << i;
            ASSERT_TRUE(c.points[i].settled);
            if (i > 0) {
                ASSERT_GT(c.points[i].delta_phi, c.points[i - 1].delta_phi);
                ASSERT_GE(c.points[i].output, c.points[i - 1].output - 1e-9) << i;
            }
        }
    }
}

// Between 15 and 19 ps of lag the lagging half's reset window (X and W4
// both high) is 5 ps, shorter than the 10 ps switch delay, so its output
// latches high and the sweep reads zero there.
TEST(Transfer, UnbufferedResetRace) {
    auto pfd = unbuffered();
    for (Fs d : {14'000, 20'000}) {
        EXPECT_GT(transfer_point(pfd, 1e9, d, 8), 0) << d;
        EXPECT_LT(transfer_point(pfd, 1e9, -d, 8), 0) << d;
    }
    for (Fs d : {15'000, 17'000, 19'000}) {
        EXPECT_EQ(transfer_point(pfd, 1e9, d, 8), 0) << d;
        EXPECT_EQ(transfer_point(pfd, 1e9, -d, 8), 0) << d;
        EXPECT_TRUE(run_phase(pfd, 1e9, d, 4).down.empty());
    }
}

TEST(Transfer, TwoPiPeriodic) {
    const Fs T = period_of(1e9);
    for (const auto& pfd : {behavioral(), unbuffered()}) {
        for (double phi : {-0.7 * kPi, -0.2 * kPi, 0.3 * kPi, 0.8 * kPi}) {
            Fs d = phase_to_time(phi, 1e9);
            const double base = transfer_point(pfd, 1e9, d, 8);
            EXPECT_NEAR(transfer_point(pfd, 1e9, d + T, 8), base, 1e-9) << phi;
            EXPECT_NEAR(transfer_point(pfd, 1e9, d - T, 8), base, 1e-9) << phi;
        }
    }
}

TEST(Transfer, ThreadCountIndependent) {
    auto a = transfer_sweep(unbuffered(), 1e9, 41, 16, 1);
    auto b = transfer_sweep(unbuffered(), 1e9, 41, 16, 4);
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].output, b.points[i].output);
}

TEST(Transfer, RejectsEvenPointCount) {
    EXPECT_THROW(transfer_sweep(behavioral(), 1e9, 200), std::invalid_argument);
}

TEST(PulseWidth, IdealWidths) {
    EXPECT_NEAR(pulse_width_at(behavioral(), 0.1 * kPi, 1e9).mean, 50'000, 1);
    EXPECT_NEAR(pulse_width_at(behavioral(), 0.2 * kPi, 1e9).mean, 100'000, 1);
    EXPECT_NEAR(pulse_width_at(behavioral(), -0.2 * kPi, 1e9).mean, 100'000, 1);
    EXPECT_EQ(pulse_width_at(behavioral(), 0.2 * kPi, 1e9).std, 0.0);
}

TEST(PulseWidth, StatsOnWaveform) {
    WaveformSet w({"A", "B"}, 1'000'000);
    w.record(0, 0, Logic::Zero);
    w.record(1, 0, Logic::Zero);
    for (Fs t : {100'000, 300'000, 500'000}) {
        w.record(1, t, Logic::One);
        w.record(1, t + 40'000 + (t / 100'000) * 1'000, Logic::Zero);
    }
    auto s = pulse_width_stats(w, {"A", "B"});
    EXPECT_EQ(s["A"].count, 0u);
    EXPECT_EQ(s["B"].count, 3u);
    EXPECT_NEAR(s["B"].mean, 43'000, 1e-9);
    EXPECT_NEAR(s["B"].std, std::sqrt((4e6 + 0 + 4e6) / 3.0), 1e-6);
    EXPECT_EQ(pulse_width_stats(w, {"B"}, 200'000)["B"].count, 2u);
}

TEST(Histogram, CountsSum) {
    std::vector<double> v{1, 2, 2, 3, 4, 4, 4, 10};
    auto h = make_histogram(v, 4);
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), v.size());
    EXPECT_DOUBLE_EQ(h.bin_lo(0), 1);
    EXPECT_DOUBLE_EQ(h.bin_hi(3), 10);
}

TEST(MonteCarlo, ZeroSigmaHasZeroSpread) {
    McOptions o;
    o.rel_sigma = 0;
    o.samples = 20;
    auto r = monte_carlo(calibrated_reference(), o);
    EXPECT_EQ(r.std_up, 0.0);
    EXPECT_EQ(r.std_down, 0.0);
    EXPECT_NEAR(r.mean_up, 97'700, 50);
}

TEST(MonteCarlo, DeterministicAcrossThreads) {
    McOptions o;
    o.samples = 200;
    o.seed = 7;
    o.threads = 1;
    auto a = monte_carlo(calibrated_reference(), o);
    o.threads = 5;
    auto b = monte_carlo(calibrated_reference(), o);
    EXPECT_EQ(a.up, b.up);
    EXPECT_EQ(a.down, b.down);
    EXPECT_EQ(a.mean_up, b.mean_up);
    EXPECT_EQ(a.hist_up.counts, b.hist_up.counts);
    o.seed = 8;
    auto c = monte_carlo(calibrated_reference(), o);
    EXPECT_NE(a.up, c.up);
}

TEST(MonteCarlo, MeanConverges) {
    McOptions o;
    o.samples = 500;
    auto a = monte_carlo(calibrated_reference(), o);
    o.samples = 1000;
    auto b = monte_carlo(calibrated_reference(), o);
    EXPECT_LT(std::abs(b.mean_up - a.mean_up), 3 * a.std_up / std::sqrt(500.0));
    EXPECT_LT(std::abs(b.mean_down - a.mean_down), 3 * a.std_down / std::sqrt(500.0));
    EXPECT_GT(a.std_up, 0);
}

TEST(Pvt, NominalIsExactlyOne) {
    PvtModel m;
    EXPECT_EQ(m.scale(1.0, 25.0), 1.0);
    auto g = pvt_sweep(behavioral(), m, {25}, {1.0}, 0.1 * kPi, 1e9);
    EXPECT_NEAR(g.width(25, 1.0), 50'000, 1);
}

TEST(Pvt, CornerEnvelope) {
    PvtModel m;
    auto g = pvt_sweep(behavioral(), m, default_pvt_temps(), default_pvt_vdds(), 0.1 * kPi, 1e9);
    double ratio = 0;
    for (double t : g.temps) ratio += g.width(t, 1.1) / g.width(t, 0.9);
    ratio /= static_cast<double>(g.temps.size());
    EXPECT_NEAR(ratio, 1.10, 0.02);
    EXPECT_NEAR(g.width(100, 1.0) / g.width(25, 1.0), 1.055, 0.01);
    EXPECT_NEAR(g.width(-25, 0.9), 44'000, 1'000);
    EXPECT_NEAR(g.width(125, 1.1), 52'000, 1'000);
}

TEST(Pvt, SwitchLevelTracksScale) {
    PvtModel m;
    auto g = pvt_sweep(unbuffered(), m, {-25, 25, 125}, {0.9, 1.0, 1.1}, 0.1 * kPi, 1e9);
    const double nominal = g.width(25, 1.0);
    EXPECT_EQ(g.at(25, 1.0).scale, 1.0);
    auto pts = g.points;
    std::sort(pts.begin(), pts.end(), [](const PvtPoint& a, const PvtPoint& b) { return a.scale < b.scale; });
    for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GE(pts[i].width, pts[i - 1].width) << pts[i].temp;
    for (const auto& p : g.points) {
        if (p.scale > 1) {
            EXPECT_GT(p.width, nominal * p.scale);
        } else if (p.scale < 1) {
            EXPECT_LT(p.width, nominal * p.scale);
        }
    }
}

TEST(Dennard, Examples) {
    EXPECT_DOUBLE_EQ(dennard_scale(4.41e-6, 28, 28), 4.41e-6);
    EXPECT_NEAR(dennard_scale(1.0, 180, 28), 0.0242, 1e-4);
    EXPECT_NEAR(dennard_scale(1.0, 65, 28), 0.1856, 1e-4);
    EXPECT_THROW(dennard_scale(1.0, 0, 28), std::invalid_argument);
}

TEST(Dennard, Multiplicative) {
    for (double a : {180.0, 90.0, 45.0})
        for (double b : {65.0, 32.0})
            for (double c : {28.0, 7.0})
                EXPECT_NEAR(dennard_scale(dennard_scale(2.5e-6, a, b), b, c), dennard_scale(2.5e-6, a, c), 1e-18);
}

TEST(Activity, StaticAndClock) {
    WaveformSet w({"A"}, 1'000'000);
    w.record(0, 0, Logic::Zero);
    EXPECT_EQ(activity_report(w).toggles["A"], 0u);

    Stimulus s;
    s.clocks.push_back({"Ref", 1'000'000, 0, 0.5});
    s.edges.push_back({"Div", 0, Logic::Zero});
    auto m = SimModel::compile(build_reference_pfd());
    auto clk = run(m, s, 10'000'000);
    // The first rise at t=0 leaves the power-on UNKNOWN, which is not a toggle;
    // the rise at t_end is.
    EXPECT_EQ(activity_report(clk).toggles["Ref"], 20u);
    auto r = activity_report(clk, {{"Ref", 2.0}});
    EXPECT_GE(r.weighted_total, 38.0);
}

TEST(Activity, ClockFromLowIsTwentyToggles) {
    Stimulus s;
    s.clocks.push_back({"Ref", 1'000'000, 500'000, 0.5});
    s.edges.push_back({"Ref", 0, Logic::Zero});
    auto edges = expand_edges(s, 10'500'000 - 1);
    WaveformSet w({"Ref"}, 10'500'000);
    for (const auto& e : edges) w.record(0, e.time, e.value);
    EXPECT_EQ(activity_report(w).toggles["Ref"], 20u);
}

TEST(Activity, ScalesWithFrequency) {
    auto m = SimModel::compile(build_reference_pfd());
    auto total = [&](double f) {
        auto ps = phase_stimulus(f, phase_to_time(0.2 * kPi, f), 1);
        auto w = run(m, ps.stim, 30'000'000);
        return activity_report(w).weighted_total;
    };
    const double ratio = total(3e9) / total(1e9);
    EXPECT_NEAR(ratio, 3.0, 0.15);
}
