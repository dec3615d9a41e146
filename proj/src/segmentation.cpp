#include "primix/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "primix/rng.hpp"

namespace primix {

std::vector<SegmentRange> segment_ranges(Index length, const SegmentSpec& spec,
                                         std::uint64_t demo_stream) {
    if (!spec.valid())
        throw std::invalid_argument("segment_ranges: invalid spec");
    const int n = spec.n_segments;
    Rng rng(derive_seed({spec.seed, demo_stream}));

    const double cell = static_cast<double>(length) / n;
    std::vector<SegmentRange> ranges(n);
    for (int i = 0; i < n; ++i) {
        const double jitter = rng.uniform(spec.jitter_lo, spec.jitter_hi);
        // Evaluated so that jitter == 1.0 makes end_i and begin_{i+1} the
        // same expression, keeping the no-jitter case an exact partition.
        const Index begin = static_cast<Index>(std::llround(cell * (i + 0.5 - 0.5 * jitter)));
        const Index end = static_cast<Index>(std::llround(cell * (i + 0.5 + 0.5 * jitter)));
        ranges[i].begin = std::clamp<Index>(begin, 0, length);
        ranges[i].end = std::clamp<Index>(end, 0, length);
    }

    // Repair: pin the outer edges, then close interior gaps by splitting the
    // missing ticks between the two neighbors.
    ranges.front().begin = 0;
    ranges.back().end = length;
    for (int i = 0; i + 1 < n; ++i) {
        if (ranges[i].end < ranges[i + 1].begin) {
            const Index mid = (ranges[i].end + ranges[i + 1].begin + 1) / 2;
            ranges[i].end = mid;
            ranges[i + 1].begin = mid;
        }
    }
    return ranges;
}

std::vector<PrimitiveDataset> segment_uniform(const Demonstration& demo,
                                              const SegmentSpec& spec,
                                              int reference_horizon) {
    const Index t = demo.length();
    if (t < 2 * spec.n_segments)
        throw std::invalid_argument("segment_uniform: demo too short");
    if (demo.follower.length() != t)
        throw std::invalid_argument("segment_uniform: leader/follower length mismatch");
    if (reference_horizon < 1)
        throw std::invalid_argument("segment_uniform: horizon must be >= 1");

    std::uint64_t demo_stream = 0;
    for (char c : demo.id) demo_stream = splitmix64(demo_stream ^ static_cast<std::uint64_t>(c));
    const auto ranges = segment_ranges(t, spec, demo_stream);

    const Index dim = 3 * demo.dof();
    std::vector<PrimitiveDataset> out;
    for (int i = 0; i < spec.n_segments; ++i) {
        const auto& r = ranges[i];
        // pairs need k+1 <= t-1
        const Index pair_end = std::min(r.end, t - 1);
        const Index count = std::max<Index>(0, pair_end - r.begin);
        PrimitiveDataset ds;
        ds.inputs = Mat(count, dim);
        ds.references = Mat(count, dim);
        ds.targets = Mat(count, dim);
        for (Index k = r.begin; k < pair_end; ++k) {
            const Index ref = std::min(k + reference_horizon, t - 1);
            ds.inputs.row(k - r.begin) = flatten(demo.follower.states[k]).transpose();
            ds.references.row(k - r.begin) = flatten(demo.follower.states[ref]).transpose();
            ds.targets.row(k - r.begin) = flatten(demo.leader.states[k + 1]).transpose();
        }
        ds.demo_id = demo.id;
        ds.segment_index = i;
        ds.tick_begin = r.begin;
        ds.tick_end = r.end;
        if (ds.size() == 0)
            throw std::runtime_error("segment_uniform: empty segment " + std::to_string(i));
        out.push_back(std::move(ds));
    }
    return out;
}

std::vector<PrimitiveDataset> build_primitive_sets(const std::vector<Demonstration>& demos,
                                                   const SegmentSpec& spec,
                                                   int reference_horizon) {
    if (demos.empty())
        throw std::invalid_argument("build_primitive_sets: no demonstrations");
    const Index dof = demos.front().dof();
    const double dt = demos.front().leader.dt;
    std::vector<PrimitiveDataset> out;
    for (const auto& demo : demos) {
        if (demo.dof() != dof || demo.leader.dt != dt)
            throw std::invalid_argument("build_primitive_sets: inconsistent demonstrations");
        auto part = segment_uniform(demo, spec, reference_horizon);
        for (auto& ds : part) out.push_back(std::move(ds));
    }
    return out;
}

}  // namespace primix
