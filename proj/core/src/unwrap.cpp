#include "qpi/unwrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qpi/error.hpp"
#include "qpi/phase.hpp"

namespace qpi::recon {
namespace {

// Caps 1/D where the second differences vanish (planar phase).
constexpr double kMaxReliability = 1e12;

double gamma(double d)
{
    return wrap_phase(d);
}

struct Edge {
    double reliability;
    std::size_t index; // 2*pixel for the right neighbour, 2*pixel+1 for the lower one
};

// Union-find over pixels. offset[p] is p's 2*pi multiple relative to its
// parent; a root's offset is absolute.
class Groups {
public:
    explicit Groups(std::size_t n)
        : parent_(n), size_(n, 1), offset_(n, 0)
    {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    // Returns the root and p's multiple relative to it, compressing the path.
    std::pair<std::size_t, long long> find(std::size_t p)
    {
        std::vector<std::size_t>& path = scratch_;
        path.clear();
        std::size_t r = p;
        while (parent_[r] != r) {
            path.push_back(r);
            r = parent_[r];
        }
        // Walk back from the node nearest the root, accumulating offsets.
        long long acc = 0;
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            acc += offset_[*it];
            offset_[*it] = acc;
            parent_[*it] = r;
        }
        return {r, path.empty() ? 0 : offset_[p]};
    }

    long long absolute(std::size_t p)
    {
        const auto [r, rel] = find(p);
        return rel + offset_[r];
    }

    // Shifts q's group by `shift` multiples and merges it with p's group.
    void merge(std::size_t rp, std::size_t rq, long long shift)
    {
        if (size_[rp] >= size_[rq]) {
            offset_[rq] = offset_[rq] + shift - offset_[rp];
            parent_[rq] = rp;
            size_[rp] += size_[rq];
        } else {
            offset_[rp] = offset_[rp] - shift - offset_[rq];
            parent_[rp] = rq;
            size_[rq] += size_[rp];
        }
    }

    bool is_root(std::size_t p) const { return parent_[p] == p; }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
    std::vector<long long> offset_;
    std::vector<std::size_t> scratch_;
};

} // namespace

ScalarField unwrap_reliability(const ScalarField& wrapped, const Mask& valid)
{
    if (!valid.matches(wrapped))
        throw ValidationError("mask does not match the phase field");
    const int w = wrapped.width();
    const int h = wrapped.height();
    ScalarField rel(wrapped.geometry(), 0.0);

    auto usable = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && valid(x, y); };
    static constexpr int kDirections[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!valid(x, y))
                continue;
            const double c = wrapped(x, y);
            double ss = 0.0;
            int terms = 0;
            for (const auto& d : kDirections) {
                const int ax = x - d[0], ay = y - d[1];
                const int bx = x + d[0], by = y + d[1];
                if (!usable(ax, ay) || !usable(bx, by))
                    continue;
                const double second = gamma(wrapped(ax, ay) - c) - gamma(c - wrapped(bx, by));
                ss += second * second;
                ++terms;
            }
            if (terms == 0)
                continue;
            const double dev = std::sqrt(ss);
            rel(x, y) = dev > 1.0 / kMaxReliability ? 1.0 / dev : kMaxReliability;
        }
    }
    return rel;
}

ScalarField unwrap_2d(const ScalarField& wrapped, const Mask& valid)
{
    if (!valid.matches(wrapped))
        throw ValidationError("mask does not match the phase field");
    if (valid.count() == 0)
        throw DataError("phase unwrapping needs at least one valid pixel");
    const auto phase = wrapped.values();
    for (std::size_t i = 0; i < phase.size(); ++i)
        if (valid.at(i) && !(std::abs(phase[i]) <= kPi + 1e-9))
            throw ValidationError("wrapped phase outside (-pi, pi]");

    const int w = wrapped.width();
    const int h = wrapped.height();
    const ScalarField rel_field = unwrap_reliability(wrapped, valid);
    const auto rel = rel_field.values();

    std::vector<Edge> edges;
    edges.reserve(2 * phase.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (!valid.at(p))
                continue;
            if (x + 1 < w && valid.at(p + 1))
                edges.push_back({rel[p] + rel[p + 1], 2 * p});
            if (y + 1 < h && valid.at(p + w))
                edges.push_back({rel[p] + rel[p + w], 2 * p + 1});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.reliability != b.reliability)
            return a.reliability > b.reliability;
        return a.index < b.index;
    });

    Groups groups(phase.size());
    for (const Edge& e : edges) {
        const std::size_t p = e.index / 2;
        const std::size_t q = (e.index % 2 == 0) ? p + 1 : p + static_cast<std::size_t>(w);
        const std::size_t rp = groups.find(p).first;
        const std::size_t rq = groups.find(q).first;
        if (rp == rq)
            continue;
        const double up = phase[p] + kTwoPi * static_cast<double>(groups.absolute(p));
        const double uq = phase[q] + kTwoPi * static_cast<double>(groups.absolute(q));
        const auto shift = static_cast<long long>(std::llround((up - uq) / kTwoPi));
        groups.merge(rp, rq, shift);
    }

    // Anchor each region at its most reliable pixel (lowest index on ties).
    std::vector<std::size_t> anchor(phase.size(), phase.size());
    for (std::size_t i = 0; i < phase.size(); ++i) {
        if (!valid.at(i))
            continue;
        const std::size_t r = groups.find(i).first;
        if (anchor[r] == phase.size() || rel[i] > rel[anchor[r]])
            anchor[r] = i;
    }

    ScalarField out = wrapped;
    auto values = out.values();
    for (std::size_t i = 0; i < phase.size(); ++i) {
        if (!valid.at(i))
            continue;
        const std::size_t r = groups.find(i).first;
        const long long k = groups.absolute(i) - groups.absolute(anchor[r]);
        values[i] = phase[i] + kTwoPi * static_cast<double>(k);
    }
    return out;
}

} // namespace qpi::recon
