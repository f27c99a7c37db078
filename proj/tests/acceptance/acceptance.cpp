// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "qpi/calib.hpp"
#include "qpi/dynamics.hpp"
#include "qpi/forward.hpp"
#include "qpi/phase.hpp"
#include "qpi/recon.hpp"
#include "qpi/unwrap.hpp"
#include "test_support.hpp"

using namespace qpi;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmtd(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Line {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares y = a*x + b, written out directly.
Line regress(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    Line l;
    l.slope = sxy / sxx;
    l.intercept = my - l.slope * mx;
    l.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return l;
}

std::array<Roi, 4> four(const Roi& r)
{
    return {r, r, r, r};
}

calib::ChannelCalibration calibrate_sweep(const std::vector<QuadratureFrame>& sweep,
                                          const SystemParams& p, const FieldGeometry& g)
{
    calib::CalibrationOptions o;
    o.delay_to_phase = p.effective_delay_to_phase();
    o.sweep_rois = four(Roi::centered(g, 100, 100));
    o.crop_rois = four(Roi::full(g));
    return calib::calibrate(sweep, o);
}

std::vector<double> sweep_delays(const SystemParams& p, int n, double periods)
{
    const double period = kTwoPi / p.effective_delay_to_phase();
    std::vector<double> d;
    for (int i = 0; i < n; ++i)
        d.push_back(periods * period * i / (n - 1));
    return d;
}

// 1. Noiseless 256x256 round trip.
Outcome exact_round_trip()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> phase(-kPi, kPi), loss(0.0, 0.9);
    auto sample = ComplexSample::blank({256, 256, 43.0});
    for (auto& v : sample.phase.values())
        v = wrap_phase(phase(rng));
    for (auto& v : sample.loss.values())
        v = loss(rng);
    SystemParams p;
    p.system_visibility = 0.67;
    const auto frame = forward::simulate_frame(sample, p, 0.0, 0.5, 0);
    const auto& c = frame.channels;
    const auto ph = recon::quadrature_phase(c[0], c[1], c[2], c[3]);
    const auto vis = recon::quadrature_visibility(c[0], c[1], c[2], c[3]);
    double perr = 0.0, verr = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < sample.phase.size(); ++i) {
        if (!ph.valid.at(i))
            continue;
        ++valid;
        perr = std::max(perr, testing::angular_distance(ph.values.values()[i], sample.phase.values()[i]));
        verr = std::max(verr, std::abs(vis.values.values()[i] - 0.67 * (1.0 - sample.loss.values()[i])));
    }
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = perr < 1e-9 && verr < 1e-9 && valid == sample.phase.size() && t < 1.0;
    o.detail = "phase err " + fmtd("%.3g", perr) + " rad, visibility err " + fmtd("%.3g", verr) +
               ", valid " + std::to_string(valid) + "/65536, " + fmtd("%.2f", t) + " s (< 1 s)";
    return o;
}

// 2. Gains/offsets recovered from a noiseless sweep; corrected channels agree.
Outcome calibration_recovery()
{
    SystemParams p;
    p.channel_gains = {1.0, 0.8, 1.2, 0.9};
    p.channel_offsets = {0.0, 5.0, 3.0, 7.0};
    const FieldGeometry g{128, 128, 43.0};
    const auto sweep = forward::simulate_delay_sweep(p, ComplexSample::blank(g), sweep_delays(p, 32, 2.5));
    const auto cal = calibrate_sweep(sweep, p, g);

    double worst_fit = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double a0 = p.base_rate * p.channel_gains[k] + p.channel_offsets[k];
        const double a1 = p.base_rate * p.channel_gains[k] * p.system_visibility;
        const auto& f = cal.channels[k].fit;
        worst_fit = std::max({worst_fit, std::abs(f.offset - a0) / a0, std::abs(f.amplitude - a1) / a1,
                              testing::angular_distance(f.phase_origin, k * kPi / 2.0)});
    }

    // Refit the corrected roi means of every channel.
    const auto ig = calib::extract_interferogram(sweep, four(Roi::centered(g, 100, 100)));
    std::array<calib::SinusoidFit, 4> refit;
    for (int k = 0; k < 4; ++k) {
        std::vector<double> m = ig.means[k];
        for (double& v : m)
            v = cal.channels[k].alpha * v + cal.channels[k].beta;
        refit[k] = calib::fit_sinusoid(ig.delays, m, p.effective_delay_to_phase());
    }
    double spread = 0.0;
    for (int k = 1; k < 4; ++k)
        spread = std::max({spread, std::abs(refit[k].offset - refit[0].offset) / refit[0].offset,
                           std::abs(refit[k].amplitude - refit[0].amplitude) / refit[0].amplitude});
    Outcome o;
    o.pass = worst_fit < 1e-6 && spread < 1e-6;
    o.detail = "worst fit deviation " + fmtd("%.3g", worst_fit) + " (< 1e-6), corrected spread " +
               fmtd("%.3g", spread) + " (< 1e-6)";
    return o;
}

// 3. Quality metrics on Poisson sweeps, 10 seeds.
Outcome quality_metrics()
{
    const auto t0 = Clock::now();
    SystemParams p;
    p.base_rate = 2e4; // 1e4 counts per pixel over 0.5 s
    p.system_visibility = 0.67;
    p.noise = NoiseModel::poisson;
    const FieldGeometry g{128, 128, 43.0};
    double min_r2 = 1.0, worst_mean = 0.0, max_std = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        p.rng_seed = seed;
        const auto sweep =
            forward::simulate_delay_sweep(p, ComplexSample::blank(g), sweep_delays(p, 32, 2.5), 0.5);
        const auto cal = calibrate_sweep(sweep, p, g);
        const auto q = calib::quality_report(sweep, cal);
        min_r2 = std::min(min_r2, q.r_squared);
        worst_mean = std::max(worst_mean, std::abs(q.visibility_mean - 0.67));
        max_std = std::max(max_std, q.visibility_std);
        ok = ok && q.r_squared >= 0.999 && std::abs(q.visibility_mean - 0.67) <= 0.01 &&
             q.visibility_std <= 0.02;
    }
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = ok && t < 30.0;
    o.detail = "min r2 " + fmtd("%.8f", min_r2) + " (>= 0.999), max |vis_mean-0.67| " +
               fmtd("%.4f", worst_mean) + " (<= 0.01), max vis_std " + fmtd("%.4f", max_std) +
               " (<= 0.02), " + fmtd("%.1f", t) + " s (< 30 s)";
    return o;
}

// 4. Nine-step phase mask through the full pipeline.
Outcome phase_mask()
{
    const auto t0 = Clock::now();
    const FieldGeometry g{256, 256, 43.0};
    SystemParams p;
    p.base_rate = 2e4;
    p.channel_gains = {1.0, 0.8, 1.2, 0.9};
    p.channel_offsets = {0.0, 5.0, 3.0, 7.0};
    p.noise = NoiseModel::poisson;
    p.rng_seed = 4;

    const auto sweep = forward::simulate_delay_sweep(p, ComplexSample::blank(g), sweep_delays(p, 32, 2.5), 0.5);
    const auto cal = calibrate_sweep(sweep, p, g);

    const forward::MaskSpec spec;
    const auto mask = forward::make_phase_mask(spec, g);
    const auto frame = forward::simulate_frame(mask.sample, p, 0.4, 0.5, p.rng_seed, 1000);
    recon::ReconOptions opt;
    opt.sigma = 1.5;
    opt.unwrap = true;
    opt.reference_roi = Roi{8, 8, 40, 40};
    const auto r = recon::reconstruct(frame, cal, opt);

    std::vector<double> truth, measured;
    const int margin = 6;
    for (const auto& pl : mask.plateaus) {
        const Roi inner{pl.cell.x0 + margin, pl.cell.y0 + margin, pl.cell.width - 2 * margin,
                        pl.cell.height - 2 * margin};
        truth.push_back(pl.phase_rad);
        measured.push_back(field_stats(*r.unwrapped, inner, r.valid).mean);
    }
    const Line l = regress(truth, measured);
    const double t = seconds_since(t0);
    Outcome o;
    o.pass = l.r_squared >= 0.98 && std::abs(l.slope - 1.0) <= 0.05 && t < 10.0;
    o.detail = "r2 " + fmtd("%.8f", l.r_squared) + " (>= 0.98), slope " + fmtd("%.4f", l.slope) +
               " (1 +/- 0.05), " + fmtd("%.2f", t) + " s (< 10 s)";
    return o;
}

// 5. Wrapped 10*pi Gaussian dome.
Outcome unwrap_dome()
{
    const auto t0 = Clock::now();
    const int n = 256;
    ScalarField truth(n, n, 1.0), wrapped(n, n, 1.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r2 = (x - 127.5) * (x - 127.5) + (y - 127.5) * (y - 127.5);
            truth(x, y) = 10.0 * kPi * std::exp(-r2 / (2.0 * 40.0 * 40.0));
            wrapped(x, y) = wrap_phase(truth(x, y));
        }
    const auto out = recon::unwrap_2d(wrapped, Mask(n, n, true));
    const double t = seconds_since(t0);
    const double offset = out(0, 0) - truth(0, 0);
    double err = 0.0, congruence = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err = std::max(err, std::abs(out.values()[i] - truth.values()[i] - offset));
        congruence = std::max(congruence,
                              std::abs(std::remainder(out.values()[i] - wrapped.values()[i], kTwoPi)));
    }
    Outcome o;
    o.pass = err < 1e-6 && congruence < 1e-9 && t < 2.0;
    o.detail = "max error " + fmtd("%.3g", err) + " rad (< 1e-6), worst 2*pi residue " +
               fmtd("%.3g", congruence) + ", " + fmtd("%.2f", t) + " s (< 2 s)";
    return o;
}

// 6. Drying film with 10*pi total change; thickness conversion.
Outcome drying_thickness()
{
    const FieldGeometry g{128, 128, 43.0};
    forward::TimelineSpec spec;
    spec.kind = forward::TimelineKind::drying_film;
    spec.frames = 36;
    spec.frame_interval_s = 1.0;
    spec.drying = {{32, 32, 64, 64}, 10.0 * kPi, 10.0 * kPi, 1.0, 1.0};
    const auto samples = forward::make_timeline(spec, ComplexSample::blank(g));
    SystemParams p;
    std::vector<QuadratureFrame> frames;
    for (int i = 0; i < spec.frames; ++i) {
        auto f = forward::simulate_frame(samples[i], p, 0.0, 0.5, 0, i);
        f.timestamp_s = spec.time_of(i);
        frames.push_back(std::move(f));
    }
    const double truth_change = samples.front().phase(64, 64) - samples.back().phase(64, 64);
    dynamics::TrackOptions opt;
    opt.reference_roi = {2, 2, 20, 20};
    const std::vector<dynamics::Probe> probes{{"film", 64, 64}};
    const auto series = dynamics::track_probes(frames, calib::ChannelCalibration::identity(g), probes, opt);
    const double measured = series.values[0].front() - series.values[0].back();
    const double rel = std::abs(measured - truth_change) / truth_change;
    const double t = dynamics::thickness_from_phase(10.0 * kPi, dynamics::MaterialParams{1.366, 1.557});
    Outcome o;
    o.pass = std::abs(truth_change - 10.0 * kPi) < 1e-12 && rel < 0.01 && std::abs(t - 21.27) <= 0.01;
    o.detail = "tracked change " + fmtd("%.6f", measured) + " rad vs " + fmtd("%.6f", truth_change) +
               " (rel err " + fmtd("%.3g", rel) + " < 1%), thickness " + fmtd("%.4f", t) +
               " um (21.27 +/- 0.01)";
    return o;
}

// 7. Random global phase walk on a static sample.
Outcome drift_immunity()
{
    const FieldGeometry g{128, 128, 43.0};
    auto sample = ComplexSample::blank(g);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            const double r2 = (x - 80.0) * (x - 80.0) + (y - 70.0) * (y - 70.0);
            sample.phase(x, y) = 2.5 * std::exp(-r2 / (2.0 * 15.0 * 15.0));
        }
    SystemParams p;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> step(0.0, 0.3);
    double walk = 0.0;
    std::vector<QuadratureFrame> frames;
    for (int i = 0; i < 50; ++i) {
        if (i > 0)
            walk += step(rng);
        auto f = forward::simulate_frame(sample, p, walk, 0.5, 0, i);
        f.timestamp_s = 0.5 * i;
        frames.push_back(std::move(f));
    }
    dynamics::TrackOptions opt;
    opt.reference_roi = {2, 2, 20, 20};
    const std::vector<dynamics::Probe> probes{{"peak", 80, 70}, {"flank", 95, 70}, {"far", 20, 110}};
    const auto series = dynamics::track_probes(frames, calib::ChannelCalibration::identity(g), probes, opt);
    double worst = 0.0;
    for (const auto& s : series.values) {
        const double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
        double var = 0.0;
        for (double v : s)
            var += (v - mean) * (v - mean);
        worst = std::max(worst, std::sqrt(var / s.size()));
    }
    Outcome o;
    o.pass = worst < 1e-6;
    o.detail = "worst probe std " + fmtd("%.3g", worst) + " rad (< 1e-6) over 50 frames, drift walk 0.3 rad/frame";
    return o;
}

// 8. Property suites, each timed separately.
Outcome property_suites()
{
    std::mt19937_64 rng(8);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    std::vector<std::pair<std::string, std::function<bool()>>> suites;

    suites.emplace_back("scale/offset invariance", [&] {
        for (int i = 0; i < 2000; ++i) {
            std::array<double, 4> v, s, o;
            const double c = uni(1e-3, 1e3), off = uni(0.0, 100.0);
            for (int k = 0; k < 4; ++k) {
                v[k] = uni(0.01, 10.0);
                s[k] = c * v[k];
                o[k] = v[k] + off;
            }
            const auto a = testing::constant_channels(1, 1, v);
            const auto b = testing::constant_channels(1, 1, s);
            const auto d = testing::constant_channels(1, 1, o);
            const double pa = recon::quadrature_phase(a[0], a[1], a[2], a[3]).values(0, 0);
            const double pb = recon::quadrature_phase(b[0], b[1], b[2], b[3]).values(0, 0);
            const double pd = recon::quadrature_phase(d[0], d[1], d[2], d[3]).values(0, 0);
            const double va = recon::quadrature_visibility(a[0], a[1], a[2], a[3]).values(0, 0);
            const double vb = recon::quadrature_visibility(b[0], b[1], b[2], b[3]).values(0, 0);
            if (testing::angular_distance(pa, pb) > 1e-12 || testing::angular_distance(pa, pd) > 1e-9 ||
                std::abs(va - vb) > 1e-12)
                return false;
        }
        return true;
    });
    suites.emplace_back("wrap idempotence", [&] {
        for (int i = 0; i < 100000; ++i) {
            const double x = uni(-1e4, 1e4);
            const double w = wrap_phase(x);
            const int k = static_cast<int>(uni(-50, 50));
            if (wrap_phase(w) != w || !(w > -kPi && w <= kPi) ||
                testing::angular_distance(wrap_phase(w + kTwoPi * k), w) > 1e-12)
                return false;
        }
        return true;
    });
    suites.emplace_back("temporal unwrap identities", [&] {
        for (int i = 0; i < 2000; ++i) {
            std::vector<double> s(1 + i % 60);
            for (auto& v : s)
                v = uni(-30.0, 30.0);
            const auto once = dynamics::temporal_unwrap(s);
            const auto twice = dynamics::temporal_unwrap(once);
            const int k = i % 9 - 4;
            auto shifted = s;
            for (auto& v : shifted)
                v += kTwoPi * k;
            const auto moved = dynamics::temporal_unwrap(shifted);
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (std::abs(twice[j] - once[j]) > 1e-9 || std::abs(moved[j] - once[j] - kTwoPi * k) > 1e-9)
                    return false;
                if (j > 0 && !(once[j] - once[j - 1] > -kPi - 1e-12 && once[j] - once[j - 1] <= kPi + 1e-12))
                    return false;
            }
        }
        return true;
    });
    suites.emplace_back("blur mean preservation", [&] {
        for (int i = 0; i < 60; ++i) {
            const int w = 1 + static_cast<int>(uni(0, 64)), h = 1 + static_cast<int>(uni(0, 64));
            ScalarField f(w, h, 1.0);
            for (auto& v : f.values())
                v = uni(0.0, 100.0);
            const auto b = recon::gaussian_blur(f, uni(0.0, 8.0));
            const double m0 = std::accumulate(f.values().begin(), f.values().end(), 0.0) / f.size();
            const double m1 = std::accumulate(b.values().begin(), b.values().end(), 0.0) / b.size();
            if (std::abs(m1 - m0) > 1e-9 * std::abs(m0))
                return false;
        }
        return true;
    });
    suites.emplace_back("Poisson variance/mean", [&] {
        SystemParams p;
        p.base_rate = 2e4;
        p.noise = NoiseModel::poisson;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            // Channel 1 of a blank sample has mean rate*exposure = 1e4; 1e4 pixels.
            const auto f = forward::simulate_frame(ComplexSample::blank({100, 100, 43.0}), p, 0.0, 0.5, seed);
            double mean = 0.0, var = 0.0;
            for (double v : f.channels[1].values())
                mean += v * 0.5;
            mean /= 1e4;
            for (double v : f.channels[1].values())
                var += (v * 0.5 - mean) * (v * 0.5 - mean);
            var /= 1e4 - 1;
            const double ratio = var / mean;
            if (ratio < 0.9 || ratio > 1.1 || std::abs(mean - 1e4) > 5.0)
                return false;
        }
        return true;
    });

    Outcome o;
    for (const auto& [name, run] : suites) {
        const auto t0 = Clock::now();
        const bool ok = run();
        const double t = seconds_since(t0);
        o.pass = o.pass && ok && t < 5.0;
        o.detail += (o.detail.empty() ? "" : "; ") + name + (ok ? " ok " : " FAILED ") + fmtd("%.2f", t) + " s";
    }
    o.detail += " (each < 5 s)";
    return o;
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"1 exact round trip", exact_round_trip},
        {"2 calibration recovery", calibration_recovery},
        {"3 sweep quality metrics", quality_metrics},
        {"4 phase mask regression", phase_mask},
        {"5 dome unwrapping", unwrap_dome},
        {"6 drying film thickness", drying_thickness},
        {"7 drift immunity", drift_immunity},
        {"8 property suites", property_suites},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
