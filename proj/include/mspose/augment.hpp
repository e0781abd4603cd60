#pragma once

#include "mspose/pose.hpp"
#include "mspose/rng.hpp"
#include "mspose/skeleton.hpp"

#include <cstdint>

namespace mspose {

struct OcclusionConfig {
    double p1 = 0.2;          // discrete point-wise
    double p2 = 0.2;          // discrete frame-wise
    double p3 = 0.2;          // continuous point-wise, per keypoint track
    double p4 = 0.2;          // continuous frame-wise block, per sequence
    int max_len = 40;         // l: continuous runs have length in [2, l]
    bool block_at_tail = false;  // continuous frame block ends at the last frame
    double shift_prob = 0.0;  // per keypoint
    double swap_prob = 0.0;   // per frame, one mirror pair
    double shift_px = 10.0;
    double crop_px = 256.0;   // shift_px / crop_px is the shift in normalized units
    std::uint64_t seed = 0;

    // Throws ConfigError.
    void validate() const;
    bool is_identity() const
    {
        return p1 == 0.0 && p2 == 0.0 && p3 == 0.0 && p4 == 0.0 && shift_prob == 0.0 && swap_prob == 0.0;
    }
};

// Every scheme has an overload drawing from a caller-owned stream and one
// that seeds a fresh stream from cfg.seed. Masked entries become
// (coords 0, confidence 0, mask 1).

PoseSequence2D discrete_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng);
PoseSequence2D discrete_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng);
// Throws InvalidInput for sequences shorter than 2 frames.
PoseSequence2D continuous_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng);
PoseSequence2D continuous_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng);
PoseSequence2D noise_corruption(const PoseSequence2D& seq, const OcclusionConfig& cfg,
                                const SkeletonTopology& topo, Rng& rng);

PoseSequence2D discrete_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg);
PoseSequence2D discrete_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg);
PoseSequence2D continuous_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg);
PoseSequence2D continuous_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg);
PoseSequence2D noise_corruption(const PoseSequence2D& seq, const OcclusionConfig& cfg,
                                const SkeletonTopology& topo);

// Masks frames [first, first + length) entirely.
void mask_frame_block(PoseSequence2D& seq, int first, int length);

// Exchanges the coordinates of keypoints a and b in frame t.
void swap_keypoints(PoseSequence2D& seq, int t, int a, int b);

// point -> frame -> continuous point -> continuous frame -> noise.
PoseSequence2D apply_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg,
                               const SkeletonTopology& topo, Rng& rng);
PoseSequence2D apply_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg,
                               const SkeletonTopology& topo);

}  // namespace mspose
