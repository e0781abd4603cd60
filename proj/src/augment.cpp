#include "mspose/augment.hpp"

#include "mspose/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mspose {

namespace {

void check_prob(double p, const char* name)
{
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be in [0,1]");
}

// Uniform run length in [2, min(max_len, frames)].
int draw_run_length(int max_len, int frames, Rng& rng)
{
    return rng.uniform_int(2, std::min(max_len, frames));
}

}  // namespace

void OcclusionConfig::validate() const
{
    check_prob(p1, "p1");
    check_prob(p2, "p2");
    check_prob(p3, "p3");
    check_prob(p4, "p4");
    check_prob(shift_prob, "shift_prob");
    check_prob(swap_prob, "swap_prob");
    if (max_len < 2) throw ConfigError("max_len (l) must be at least 2");
    if (!(shift_px >= 0.0) || !(crop_px > 0.0)) throw ConfigError("shift_px must be >= 0 and crop_px > 0");
}

void mask_frame_block(PoseSequence2D& seq, int first, int length)
{
    for (int t = first; t < first + length; ++t)
        for (int k = 0; k < seq.num_keypoints; ++k) seq.set_masked(t, k);
}

void swap_keypoints(PoseSequence2D& seq, int t, int a, int b)
{
    const int ia = seq.index(t, a);
    const int ib = seq.index(t, b);
    const Eigen::RowVector2d tmp = seq.coords.row(ia);
    seq.coords.row(ia) = seq.coords.row(ib);
    seq.coords.row(ib) = tmp;
}

PoseSequence2D discrete_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng)
{
    cfg.validate();
    PoseSequence2D out = seq;
    if (cfg.p1 == 0.0) return out;
    for (int t = 0; t < seq.num_frames; ++t)
        for (int k = 0; k < seq.num_keypoints; ++k)
            if (rng.bernoulli(cfg.p1)) out.set_masked(t, k);
    return out;
}

PoseSequence2D discrete_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng)
{
    cfg.validate();
    PoseSequence2D out = seq;
    if (cfg.p2 == 0.0) return out;
    for (int t = 0; t < seq.num_frames; ++t)
        if (rng.bernoulli(cfg.p2)) mask_frame_block(out, t, 1);
    return out;
}

PoseSequence2D continuous_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng)
{
    cfg.validate();
    if (seq.num_frames < 2) throw InvalidInput("continuous occlusion needs at least 2 frames");
    PoseSequence2D out = seq;
    if (cfg.p3 == 0.0) return out;
    for (int k = 0; k < seq.num_keypoints; ++k) {
        if (!rng.bernoulli(cfg.p3)) continue;
        const int len = draw_run_length(cfg.max_len, seq.num_frames, rng);
        const int first = rng.uniform_int(0, seq.num_frames - len);
        for (int t = first; t < first + len; ++t) out.set_masked(t, k);
    }
    return out;
}

PoseSequence2D continuous_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, Rng& rng)
{
    cfg.validate();
    if (seq.num_frames < 2) throw InvalidInput("continuous occlusion needs at least 2 frames");
    PoseSequence2D out = seq;
    if (cfg.p4 == 0.0 || !rng.bernoulli(cfg.p4)) return out;
    const int len = draw_run_length(cfg.max_len, seq.num_frames, rng);
    const int first = cfg.block_at_tail ? seq.num_frames - len : rng.uniform_int(0, seq.num_frames - len);
    mask_frame_block(out, first, len);
    return out;
}

PoseSequence2D noise_corruption(const PoseSequence2D& seq, const OcclusionConfig& cfg,
                                const SkeletonTopology& topo, Rng& rng)
{
    cfg.validate();
    PoseSequence2D out = seq;
    const auto& pairs = topo.mirror_pairs();
    const double max_shift = cfg.shift_px / cfg.crop_px;
    for (int t = 0; t < seq.num_frames; ++t) {
        if (cfg.swap_prob > 0.0 && !pairs.empty() && rng.bernoulli(cfg.swap_prob)) {
            const auto [a, b] = pairs[rng.uniform_int(0, static_cast<int>(pairs.size()) - 1)];
            if (!out.masked(t, a) && !out.masked(t, b)) swap_keypoints(out, t, a, b);
        }
        if (cfg.shift_prob == 0.0) continue;
        for (int k = 0; k < seq.num_keypoints; ++k) {
            if (!rng.bernoulli(cfg.shift_prob)) continue;
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            const double radius = rng.uniform(0.0, max_shift);
            if (out.masked(t, k)) continue;
            const int i = out.index(t, k);
            out.coords(i, 0) += radius * std::cos(angle);
            out.coords(i, 1) += radius * std::sin(angle);
        }
    }
    return out;
}

PoseSequence2D discrete_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg)
{
    Rng rng(cfg.seed);
    return discrete_point_occlusion(seq, cfg, rng);
}

PoseSequence2D discrete_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg)
{
    Rng rng(cfg.seed);
    return discrete_frame_occlusion(seq, cfg, rng);
}

PoseSequence2D continuous_point_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg)
{
    Rng rng(cfg.seed);
    return continuous_point_occlusion(seq, cfg, rng);
}

PoseSequence2D continuous_frame_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg)
{
    Rng rng(cfg.seed);
    return continuous_frame_occlusion(seq, cfg, rng);
}

PoseSequence2D noise_corruption(const PoseSequence2D& seq, const OcclusionConfig& cfg, const SkeletonTopology& topo)
{
    Rng rng(cfg.seed);
    return noise_corruption(seq, cfg, topo, rng);
}

PoseSequence2D apply_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg,
                               const SkeletonTopology& topo, Rng& rng)
{
    if (cfg.is_identity()) return seq;
    PoseSequence2D out = discrete_point_occlusion(seq, cfg, rng);
    out = discrete_frame_occlusion(out, cfg, rng);
    if (out.num_frames >= 2) {
        out = continuous_point_occlusion(out, cfg, rng);
        out = continuous_frame_occlusion(out, cfg, rng);
    }
    return noise_corruption(out, cfg, topo, rng);
}

PoseSequence2D apply_occlusion(const PoseSequence2D& seq, const OcclusionConfig& cfg, const SkeletonTopology& topo)
{
    Rng rng(cfg.seed);
    return apply_occlusion(seq, cfg, topo, rng);
}

}  // namespace mspose
