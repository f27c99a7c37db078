#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "qpi/error.hpp"
#include "qpi/forward.hpp"
#include "qpi/phase.hpp"
#include "test_support.hpp"

namespace qpi::forward {
namespace {

SystemParams unit_params(double base_rate = 1000.0)
{
    SystemParams p;
    p.base_rate = base_rate;
    p.system_visibility = 1.0;
    return p;
}

TEST(DetectionRate, Examples)
{
    EXPECT_DOUBLE_EQ(detection_rate(0.0, 0.0, 0.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(detection_rate(1.234, 1.0, 0.7, 1.0), 1.0);
    // 1 + 0.67*cos(0.3pi), cos(0.3pi) = 0.5877852522924731
    const double expected = 1.0 + 0.67 * 0.5877852522924731;
    EXPECT_NEAR(detection_rate(0.3 * kPi, 0.0, 0.0, 0.67), expected, 1e-15);
    EXPECT_NEAR(detection_rate(0.3 * kPi, 0.0, 0.0, 0.67), 1.3938, 1e-4);
}

TEST(DetectionRate, RangeAndErrors)
{
    for (double phase = -4.0; phase < 4.0; phase += 0.37) {
        const double r = detection_rate(phase, 0.3, 0.2, 0.8);
        EXPECT_GE(r, 1.0 - 0.8 * 0.7 - 1e-15);
        EXPECT_LE(r, 1.0 + 0.8 * 0.7 + 1e-15);
    }
    EXPECT_THROW(detection_rate(0, -0.1, 0, 1), ValidationError);
    EXPECT_THROW(detection_rate(0, 0, 0, 1.1), ValidationError);
}

TEST(SimulateFrame, UniformSampleNoiseless)
{
    const auto sample = ComplexSample::blank({8, 8, 43.0});
    const auto frame = simulate_frame(sample, unit_params(), 0.0, 0.5, 1);
    const std::array<double, 4> expected{2.0, 1.0, 0.0, 1.0};
    for (int k = 0; k < 4; ++k)
        for (double v : frame.channels[k].values())
            EXPECT_NEAR(v, 1000.0 * expected[k], 1e-9);
}

TEST(SimulateFrame, GlobalPhasePi)
{
    const auto sample = ComplexSample::blank({8, 8, 43.0});
    const auto frame = simulate_frame(sample, unit_params(), kPi, 0.5, 1);
    const std::array<double, 4> expected{0.0, 1.0, 2.0, 1.0};
    for (int k = 0; k < 4; ++k)
        EXPECT_NEAR(frame.channels[k](3, 3), 1000.0 * expected[k], 1e-9);
}

TEST(SimulateFrame, GainsAndOffsets)
{
    SystemParams p = unit_params();
    p.system_visibility = 0.5;
    p.channel_gains = {1.0, 0.8, 1.2, 0.9};
    p.channel_offsets = {0.0, 5.0, 3.0, 7.0};
    auto sample = ComplexSample::blank({4, 4, 1.0});
    sample.phase(1, 2) = 0.4;
    const auto frame = simulate_frame(sample, p, 0.0, 1.0, 0);
    const auto ideal = testing::ideal_channels(0.4, 0.0, 0.5, 1000.0);
    for (int k = 0; k < 4; ++k)
        EXPECT_NEAR(frame.channels[k](1, 2), p.channel_gains[k] * ideal[k] + p.channel_offsets[k],
                    1e-9);
}

TEST(SimulateFrame, OpposingChannelsSumToTwiceBase)
{
    SystemParams p = unit_params(321.0);
    p.system_visibility = 0.67;
    auto sample = ComplexSample::blank({16, 16, 1.0});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-kPi, kPi), l(0.0, 1.0);
    for (double& v : sample.phase.values())
        v = u(rng);
    for (double& v : sample.loss.values())
        v = l(rng);
    const auto frame = simulate_frame(sample, p, 0.37, 1.0, 0);
    for (std::size_t i = 0; i < sample.phase.size(); ++i) {
        EXPECT_NEAR(frame.channels[0].values()[i] + frame.channels[2].values()[i], 2.0 * 321.0,
                    1e-9 * 642.0);
        EXPECT_NEAR(frame.channels[1].values()[i] + frame.channels[3].values()[i], 2.0 * 321.0,
                    1e-9 * 642.0);
    }
}

TEST(SimulateFrame, DimensionMismatch)
{
    ComplexSample s{ScalarField(4, 4), ScalarField(5, 4)};
    EXPECT_THROW(simulate_frame(s, unit_params(), 0.0, 1.0, 0), ValidationError);
}

TEST(SimulateFrame, PoissonMeanWithinThreeSigma)
{
    // base_rate * exposure = 1e4 counts on the (2,1,0,1)*base pattern's channel 1.
    SystemParams p = unit_params(1.0e4);
    p.noise = NoiseModel::poisson;
    const auto sample = ComplexSample::blank({100, 100, 1.0});
    const auto frame = simulate_frame(sample, p, 0.0, 1.0, 42);
    const auto v = frame.channels[1].values();
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    const double sigma_of_mean = std::sqrt(1.0e4) / std::sqrt(static_cast<double>(v.size()));
    EXPECT_NEAR(mean, 1.0e4, 3.0 * sigma_of_mean);
    for (double c : v)
        EXPECT_EQ(c, std::floor(c)); // integer counts at exposure 1
}

TEST(SimulateFrame, PoissonIsSeedDeterministic)
{
    SystemParams p = unit_params(500.0);
    p.noise = NoiseModel::poisson;
    const auto sample = ComplexSample::blank({32, 32, 1.0});
    const auto a = simulate_frame(sample, p, 0.0, 0.5, 9, 3);
    const auto b = simulate_frame(sample, p, 0.0, 0.5, 9, 3);
    const auto c = simulate_frame(sample, p, 0.0, 0.5, 10, 3);
    const auto d = simulate_frame(sample, p, 0.0, 0.5, 9, 4);
    bool differs_seed = false, differs_frame = false;
    for (int k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < a.channels[k].size(); ++i) {
            EXPECT_EQ(a.channels[k].values()[i], b.channels[k].values()[i]);
            differs_seed |= a.channels[k].values()[i] != c.channels[k].values()[i];
            differs_frame |= a.channels[k].values()[i] != d.channels[k].values()[i];
        }
    EXPECT_TRUE(differs_seed);
    EXPECT_TRUE(differs_frame);
}

TEST(DelaySweep, SinglePointMatchesFrame)
{
    SystemParams p = unit_params();
    const auto sample = ComplexSample::blank({6, 6, 43.0});
    const std::vector<double> delays{0.0};
    const auto sweep = simulate_delay_sweep(p, sample, delays, 0.5);
    ASSERT_EQ(sweep.size(), 1u);
    const auto frame = simulate_frame(sample, p, 0.0, 0.5, p.rng_seed, 0);
    ASSERT_TRUE(sweep[0].delay_um);
    EXPECT_EQ(*sweep[0].delay_um, 0.0);
    for (int k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < frame.channels[k].size(); ++i)
            EXPECT_EQ(sweep[0].channels[k].values()[i], frame.channels[k].values()[i]);
}

TEST(DelaySweep, OnePeriodIsOneCosineCycle)
{
    SystemParams p = unit_params();
    p.system_visibility = 0.67;
    const double kappa = p.effective_delay_to_phase();
    const double period = kTwoPi / kappa;
    std::vector<double> delays;
    for (int i = 0; i <= 16; ++i)
        delays.push_back(period * i / 16.0);
    const auto sweep = simulate_delay_sweep(p, ComplexSample::blank({4, 4, 1.0}), delays);
    EXPECT_NEAR(sweep.front().channels[0](0, 0), sweep.back().channels[0](0, 0), 1e-9);
    for (std::size_t i = 0; i < delays.size(); ++i)
        EXPECT_NEAR(sweep[i].channels[0](0, 0),
                    1000.0 * (1.0 + 0.67 * std::cos(kTwoPi * i / 16.0)), 1e-9);
}

TEST(DelaySweep, HalfPeriodApartSumsToTwiceBase)
{
    SystemParams p = unit_params();
    p.system_visibility = 0.67;
    p.channel_gains[0] = 1.3;
    p.channel_offsets[0] = 4.0;
    const double kappa = p.effective_delay_to_phase();
    const std::vector<double> delays{0.123, 0.123 + kPi / kappa};
    const auto sweep = simulate_delay_sweep(p, ComplexSample::blank({4, 4, 1.0}), delays);
    EXPECT_NEAR(sweep[0].channels[0](1, 1) + sweep[1].channels[0](1, 1),
                2.0 * 1000.0 * 1.3 + 2.0 * 4.0, 1e-9);
}

TEST(DelaySweep, EmptyRejected)
{
    EXPECT_THROW(simulate_delay_sweep(unit_params(), ComplexSample::blank({4, 4, 1.0}), {}),
                 ValidationError);
}

TEST(PhaseMask, DefaultIncrementIsPointThreePi)
{
    const MaskSpec spec;
    const auto mask = make_phase_mask(spec, {256, 256, 43.0});
    ASSERT_EQ(mask.plateaus.size(), 9u);
    EXPECT_NEAR(spec.thickness_of_step(1) - spec.thickness_of_step(0), 0.16375, 1e-12);
    for (int i = 1; i < 9; ++i)
        EXPECT_NEAR(mask.plateaus[i].phase_rad - mask.plateaus[i - 1].phase_rad, 0.3 * kPi, 1e-9);
}

TEST(PhaseMask, ResistIndexIncrement)
{
    MaskSpec spec;
    spec.effective_index = 1.49;
    const auto mask = make_phase_mask(spec, {256, 256, 43.0});
    // 2*pi*0.49*0.16375/1.557 by hand
    EXPECT_NEAR(mask.plateaus[1].phase_rad - mask.plateaus[0].phase_rad, 0.3238, 1e-4);
    EXPECT_NEAR(mask.plateaus[1].phase_rad - mask.plateaus[0].phase_rad,
                kTwoPi * 0.49 * 0.16375 / 1.557, 1e-12);
}

TEST(PhaseMask, DegenerateMaskIsUniform)
{
    MaskSpec spec;
    spec.thickness_max_um = spec.thickness_min_um;
    const auto mask = make_phase_mask(spec, {256, 256, 43.0});
    for (const auto& p : mask.plateaus)
        EXPECT_EQ(p.phase_rad, mask.plateaus[0].phase_rad);
}

TEST(PhaseMask, PlateausAreExactlyConstantAndLossFree)
{
    MaskSpec spec;
    spec.marker = true;
    const auto mask = make_phase_mask(spec, {256, 256, 43.0});
    for (const auto& p : mask.plateaus) {
        EXPECT_EQ(p.cell.width, 35); // 1500 um / 43 um/px
        for (int y = p.cell.y0; y < p.cell.y0 + p.cell.height; ++y)
            for (int x = p.cell.x0; x < p.cell.x0 + p.cell.width; ++x)
                ASSERT_EQ(mask.sample.phase(x, y), p.phase_rad);
    }
    for (double l : mask.sample.loss.values())
        EXPECT_EQ(l, 0.0);
    ASSERT_TRUE(mask.marker);
    EXPECT_LT(mask.marker->x0 + mask.marker->width, mask.footprint.x0);
    EXPECT_EQ(mask.sample.phase(mask.marker->x0, mask.marker->y0), mask.plateaus[8].phase_rad);
}

TEST(PhaseMask, Layouts)
{
    MaskSpec spec;
    // serpentine:  0 1 2 / 5 4 3 / 6 7 8
    EXPECT_EQ(mask_step_at(spec, 1, 0), 5);
    EXPECT_EQ(mask_step_at(spec, 2, 2), 8);
    spec.layout = MaskLayout::spiral;
    // spiral:      0 1 2 / 7 8 3 / 6 5 4
    const int expected[3][3] = {{0, 1, 2}, {7, 8, 3}, {6, 5, 4}};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            EXPECT_EQ(mask_step_at(spec, r, c), expected[r][c]);
}

TEST(PhaseMask, GridExceedingField)
{
    EXPECT_THROW(make_phase_mask(MaskSpec{}, {64, 64, 43.0}), ValidationError);
    MaskSpec bad;
    bad.effective_index = 1.0;
    EXPECT_THROW(make_phase_mask(bad, {256, 256, 43.0}), ValidationError);
}

TimelineSpec drying(double rate_top, double rate_bottom, int frames)
{
    TimelineSpec spec;
    spec.frames = frames;
    spec.frame_interval_s = 0.5;
    spec.drying.region = {4, 4, 8, 8};
    spec.drying.phase_top = 10.0 * kPi;
    spec.drying.phase_bottom = 10.0 * kPi;
    spec.drying.rate_top = rate_top;
    spec.drying.rate_bottom = rate_bottom;
    return spec;
}

TEST(Timeline, ZeroRateIsStatic)
{
    const auto base = ComplexSample::blank({16, 16, 1.0});
    const auto frames = make_timeline(drying(0.0, 0.0, 4), base);
    ASSERT_EQ(frames.size(), 4u);
    for (const auto& f : frames)
        for (std::size_t i = 0; i < f.phase.size(); ++i)
            EXPECT_EQ(f.phase.values()[i], frames[0].phase.values()[i]);
}

TEST(Timeline, LinearDepletionReachesZero)
{
    const double r = kPi;                 // rad/s
    const int frames = 21;                // t = 0 .. 10 s in 0.5 s steps
    const auto base = ComplexSample::blank({16, 16, 1.0});
    const auto tl = make_timeline(drying(r, r, frames), base);
    EXPECT_NEAR(tl[0].phase(6, 6), 10.0 * kPi, 1e-12);
    EXPECT_NEAR(tl[10].phase(6, 6), 10.0 * kPi - r * 5.0, 1e-12);
    EXPECT_EQ(tl[20].phase(6, 6), 0.0); // t = 10pi/r
    EXPECT_EQ(tl[5].phase(0, 0), 0.0);  // outside the film
}

TEST(Timeline, AccumulatedChangeOrdersByRow)
{
    TimelineSpec spec = drying(kPi, kPi, 30);
    spec.drying.phase_top = 2.0 * kPi;
    spec.drying.phase_bottom = 10.0 * kPi;
    const auto tl = make_timeline(spec, ComplexSample::blank({16, 16, 1.0}));
    const double top_change = tl.front().phase(6, 4) - tl.back().phase(6, 4);
    const double mid_change = tl.front().phase(6, 8) - tl.back().phase(6, 8);
    const double bottom_change = tl.front().phase(6, 11) - tl.back().phase(6, 11);
    EXPECT_LT(top_change, mid_change);
    EXPECT_LT(mid_change, bottom_change);
}

TEST(Timeline, ScriptedAndErrors)
{
    const auto base = ComplexSample::blank({4, 4, 1.0});
    TimelineSpec spec;
    spec.kind = TimelineKind::scripted;
    spec.frames = 2;
    spec.scripted_deltas = {ScalarField(4, 4, 1.0, 0.5), ScalarField(4, 4, 1.0, -0.5)};
    const auto tl = make_timeline(spec, base);
    EXPECT_EQ(tl[1].phase(2, 2), -0.5);
    spec.frames = 3;
    EXPECT_THROW(make_timeline(spec, base), ValidationError);
    EXPECT_THROW(make_timeline(drying(-1.0, 0.0, 2), ComplexSample::blank({16, 16, 1.0})),
                 ValidationError);
}

} // namespace
} // namespace qpi::forward
