#include "mspose/augment.hpp"
#include "mspose/errors.hpp"

#include <doctest.h>

#include <map>

using namespace mspose;

namespace {

PoseSequence2D random_seq(int frames, int keypoints, std::uint64_t seed)
{
    Rng rng(seed);
    PoseSequence2D s = PoseSequence2D::zeros(frames, keypoints);
    for (Eigen::Index i = 0; i < s.coords.rows(); ++i) {
        s.coords.row(i) << rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8);
        s.confidence(i) = rng.uniform(0.5, 1.0);
        s.mask[i] = 0;
    }
    return s;
}

OcclusionConfig none()
{
    OcclusionConfig c;
    c.p1 = c.p2 = c.p3 = c.p4 = 0.0;
    return c;
}

bool same(const PoseSequence2D& a, const PoseSequence2D& b)
{
    return a.coords == b.coords && a.confidence == b.confidence && a.mask == b.mask;
}

int masked_count(const PoseSequence2D& s)
{
    int n = 0;
    for (auto m : s.mask) n += m != 0;
    return n;
}

// Maximal runs of fully masked frames.
std::vector<std::pair<int, int>> frame_blocks(const PoseSequence2D& s)
{
    std::vector<std::pair<int, int>> out;
    int start = -1;
    for (int t = 0; t <= s.num_frames; ++t) {
        bool full = t < s.num_frames;
        for (int k = 0; full && k < s.num_keypoints; ++k) full = s.masked(t, k);
        if (full && start < 0) start = t;
        if (!full && start >= 0) {
            out.emplace_back(start, t - start);
            start = -1;
        }
    }
    return out;
}

// 99th percentile of chi-square with 38 and 9 degrees of freedom.
constexpr double kChi2Crit38 = 61.1620867636897;
constexpr double kChi2Crit9 = 21.665994333461924;

}  // namespace

TEST_CASE("occlusion: zero probabilities are the identity")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto s = random_seq(30, 17, 1);
    const OcclusionConfig c = none();
    Rng rng(2);
    CHECK(same(discrete_point_occlusion(s, c, rng), s));
    CHECK(same(discrete_frame_occlusion(s, c, rng), s));
    CHECK(same(continuous_point_occlusion(s, c, rng), s));
    CHECK(same(continuous_frame_occlusion(s, c, rng), s));
    CHECK(same(noise_corruption(s, c, topo, rng), s));
    CHECK(same(apply_occlusion(s, c, topo, rng), s));
}

TEST_CASE("occlusion: masked entries are zeroed")
{
    OcclusionConfig c = none();
    c.p1 = 1.0;
    const auto out = discrete_point_occlusion(random_seq(5, 17, 3), c);
    CHECK(masked_count(out) == 5 * 17);
    CHECK(out.coords.isZero());
    CHECK(out.confidence.isZero());
}

TEST_CASE("discrete point occlusion rate")
{
    OcclusionConfig c = none();
    c.p1 = 0.2;
    c.seed = 4;
    const auto out = discrete_point_occlusion(random_seq(5000, 20, 5), c);
    CHECK(std::abs(masked_count(out) / 1e5 - 0.2) <= 0.01);
}

TEST_CASE("discrete frame occlusion masks whole frames at rate p2")
{
    OcclusionConfig c = none();
    c.p2 = 0.2;
    c.seed = 6;
    const auto out = discrete_frame_occlusion(random_seq(10000, 3, 7), c);
    int frames = 0;
    for (int t = 0; t < out.num_frames; ++t) {
        const int m = out.masked(t, 0) + out.masked(t, 1) + out.masked(t, 2);
        CHECK((m == 0 || m == 3));
        frames += m == 3;
    }
    CHECK(std::abs(frames / 1e4 - 0.2) <= 0.02);
}

TEST_CASE("continuous point occlusion: run lengths bounded and uniform")
{
    OcclusionConfig c = none();
    c.p3 = 1.0;
    c.max_len = 40;
    Rng rng(8);
    const auto s = random_seq(50, 1, 9);
    std::map<int, int> hist;
    for (int i = 0; i < 100000; ++i) {
        const auto out = continuous_point_occlusion(s, c, rng);
        const int len = masked_count(out);
        CHECK_MESSAGE((len >= 2 && len <= 40), "run length " << len);
        ++hist[len];
    }
    double chi2 = 0.0;
    const double expected = 100000.0 / 39.0;
    for (int len = 2; len <= 40; ++len) chi2 += (hist[len] - expected) * (hist[len] - expected) / expected;
    CHECK(chi2 < kChi2Crit38);

    // Short sequences cap the run at their length.
    const auto tiny = random_seq(3, 1, 10);
    for (int i = 0; i < 200; ++i) CHECK(masked_count(continuous_point_occlusion(tiny, c, rng)) <= 3);
    CHECK_THROWS_AS(continuous_point_occlusion(random_seq(1, 1, 1), c, rng), InvalidInput);
}

TEST_CASE("continuous point occlusion: one contiguous run per selected track")
{
    OcclusionConfig c = none();
    c.p3 = 0.2;
    Rng rng(11);
    const auto s = random_seq(60, 17, 12);
    int selected = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto out = continuous_point_occlusion(s, c, rng);
        for (int k = 0; k < 17; ++k) {
            int runs = 0;
            for (int t = 0; t < 60; ++t) runs += out.masked(t, k) && (t == 0 || !out.masked(t - 1, k));
            CHECK(runs <= 1);
            selected += runs;
        }
    }
    CHECK(std::abs(selected / 34000.0 - 0.2) <= 0.02);
}

TEST_CASE("continuous frame occlusion: tail block and a single block per call")
{
    auto s = random_seq(30, 4, 13);
    mask_frame_block(s, 20, 10);
    for (int t = 0; t < 30; ++t)
        for (int k = 0; k < 4; ++k) CHECK(s.masked(t, k) == (t >= 20));

    OcclusionConfig c = none();
    c.p4 = 1.0;
    c.block_at_tail = true;
    Rng rng(14);
    const auto clean = random_seq(30, 4, 15);
    for (int i = 0; i < 500; ++i) {
        const auto blocks = frame_blocks(continuous_frame_occlusion(clean, c, rng));
        REQUIRE(blocks.size() == 1);
        CHECK(blocks[0].first + blocks[0].second == 30);
    }
    c.block_at_tail = false;
    for (int i = 0; i < 500; ++i) CHECK(frame_blocks(continuous_frame_occlusion(clean, c, rng)).size() == 1);
}

TEST_CASE("continuous frame occlusion: positions uniform over valid placements")
{
    OcclusionConfig c = none();
    c.p4 = 1.0;
    c.max_len = 2;
    Rng rng(16);
    const auto s = random_seq(11, 1, 17);
    std::vector<int> count(10, 0);
    for (int i = 0; i < 100000; ++i) {
        const auto blocks = frame_blocks(continuous_frame_occlusion(s, c, rng));
        REQUIRE(blocks.size() == 1);
        ++count[blocks[0].first];
    }
    double chi2 = 0.0;
    for (int n : count) chi2 += (n - 1e4) * (n - 1e4) / 1e4;
    CHECK(chi2 < kChi2Crit9);
}

TEST_CASE("noise corruption: swap involution and bounded shift")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto s = random_seq(10, 17, 18);
    auto twice = s;
    swap_keypoints(twice, 3, 1, 4);
    CHECK_FALSE(same(twice, s));
    swap_keypoints(twice, 3, 1, 4);
    CHECK(same(twice, s));

    OcclusionConfig c = none();
    c.shift_prob = 1.0;
    c.shift_px = 10.0;
    c.crop_px = 256.0;
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        const auto out = noise_corruption(s, c, topo, rng);
        const double worst = (out.coords - s.coords).rowwise().norm().maxCoeff();
        CHECK(worst <= 10.0 / 256.0 + 1e-15);
        CHECK(out.mask == s.mask);
    }
}

TEST_CASE("apply_occlusion is reproducible from the seed")
{
    const auto topo = SkeletonTopology::h36m17();
    OcclusionConfig c;
    c.seed = 20;
    c.shift_prob = 0.1;
    c.swap_prob = 0.1;
    const auto s = random_seq(64, 17, 21);
    CHECK(same(apply_occlusion(s, c, topo), apply_occlusion(s, c, topo)));
    c.seed = 21;
    const auto other = apply_occlusion(s, c, topo);
    c.seed = 20;
    CHECK_FALSE(same(apply_occlusion(s, c, topo), other));
}

TEST_CASE("occlusion config validation")
{
    OcclusionConfig c;
    c.p1 = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OcclusionConfig{};
    c.max_len = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
