#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "primix/types.hpp"

namespace primix {

/// Uniform time-based segmentation with per-segment width jitter. Segment i
/// is centered at (i + 0.5) * T / n_segments with half-width
/// jitter * T / (2 * n_segments), jitter drawn uniformly from
/// [jitter_lo, jitter_hi] per segment per demonstration.
struct SegmentSpec {
    int n_segments = 10;
    double jitter_lo = 0.9;
    double jitter_hi = 1.1;
    std::uint64_t seed = 0;

    bool valid() const {
        return n_segments >= 1 && jitter_lo > 0 && jitter_lo <= 1.0 && jitter_hi >= 1.0;
    }
};

/// Training pairs cut from one time segment of one demonstration. Each row k
/// holds the flattened follower state F_k (input), the follower reference
/// F_{k+h} the network is conditioned on (clipped to the demo end), and the
/// flattened leader state L_{k+1} (target).
struct PrimitiveDataset {
    Mat inputs;      // pairs x 3D
    Mat references;  // pairs x 3D
    Mat targets;     // pairs x 3D
    std::string demo_id;
    int segment_index = 0;
    Index tick_begin = 0;  // segment tick range [tick_begin, tick_end)
    Index tick_end = 0;

    Index size() const { return inputs.rows(); }
};

/// Tick ranges only, before pair extraction. Exposed for coverage tests.
struct SegmentRange {
    Index begin = 0;  // inclusive
    Index end = 0;    // exclusive
};

/// Jittered, gap-repaired segment ranges covering [0, length). With jitter
/// pinned at 1.0 this is an exact partition; with jitter_hi > 1 neighbors may
/// overlap. Gaps from sub-unit jitter, clipping, or rounding are repaired by
/// extending the nearer segment.
std::vector<SegmentRange> segment_ranges(Index length, const SegmentSpec& spec,
                                         std::uint64_t demo_stream);

/// Splits one demonstration into spec.n_segments primitive datasets.
/// reference_horizon is the lookahead h used for the conditioning state.
/// Throws std::invalid_argument when the demo is shorter than 2*n_segments.
std::vector<PrimitiveDataset> segment_uniform(const Demonstration& demo,
                                              const SegmentSpec& spec,
                                              int reference_horizon);

/// Concatenated segmentations of several demonstrations; result size is
/// demos.size() * n_segments, tagged with (demo id, segment index).
std::vector<PrimitiveDataset> build_primitive_sets(const std::vector<Demonstration>& demos,
                                                   const SegmentSpec& spec,
                                                   int reference_horizon);

}  // namespace primix
