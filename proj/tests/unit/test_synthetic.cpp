#include "mspose/errors.hpp"
#include "mspose/skeleton.hpp"
#include "mspose/synthetic.hpp"
#include "mspose/visibility.hpp"

#include <doctest.h>

#include <cmath>

using namespace mspose;

namespace {

SyntheticMotionConfig small_config()
{
    SyntheticMotionConfig c;
    c.num_sequences = 3;
    c.frames = 40;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("synthetic: bone lengths stay constant within a sequence")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto data = generate_synthetic(small_config(), topo);
    for (const auto& s : data)
        for (const auto& v : s.views) {
            const auto& p = v.gt;
            for (const auto& b : topo.bones()) {
                const double l0 = (p.point(0, b.child) - p.point(0, b.parent)).norm();
                CHECK(l0 > 10.0);
                for (int t = 1; t < p.num_frames; ++t)
                    CHECK((p.point(t, b.child) - p.point(t, b.parent)).norm() == doctest::Approx(l0).epsilon(1e-9));
            }
        }
}

TEST_CASE("synthetic: root-relative, views are rotations of one motion")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto data = generate_synthetic(small_config(), topo);
    for (const auto& s : data) {
        REQUIRE(s.views.size() == 2);
        const auto& a = s.views[0];
        const auto& b = s.views[1];
        for (int t = 0; t < a.gt.num_frames; ++t) {
            CHECK(a.gt.point(t, topo.root()).norm() == 0.0);
            const Eigen::Matrix3d rel = b.rotation * a.rotation.transpose();
            CHECK(((a.gt.frame(t) * rel.transpose()) - b.gt.frame(t)).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("synthetic: noiseless detections equal the clean projection")
{
    auto cfg = small_config();
    cfg.noise_px = 0.0;
    const auto topo = SkeletonTopology::h36m17();
    for (const auto& s : generate_synthetic(cfg, topo))
        for (const auto& v : s.views) {
            const auto proj = project_to_crop(v.gt, v.crop_mm);
            CHECK((proj.coords - v.clean2d.coords).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((v.det.coords - v.clean2d.coords).cwiseAbs().maxCoeff() < 1e-12);
        }
}

TEST_CASE("synthetic: visibility column matches the cylinder model, masking follows it")
{
    auto cfg = small_config();
    cfg.mask_occluded = true;
    const auto topo = SkeletonTopology::h36m17();
    for (const auto& s : generate_synthetic(cfg, topo))
        for (const auto& v : s.views) {
            const auto vis = sequence_visibility(v.gt, topo, {}, Exec::serial);
            REQUIRE(v.gt.visibility.size() == vis.hard.size());
            for (std::size_t i = 0; i < vis.hard.size(); ++i) {
                CHECK(v.gt.visibility[i] == vis.hard[i]);
                CHECK(v.det.mask[i] == 1 - vis.hard[i]);
                if (v.det.mask[i]) CHECK(v.det.confidence(i) == 0.0);
                else CHECK(v.det.confidence(i) >= cfg.occluded_conf_min);
            }
        }
}

TEST_CASE("synthetic: seeded generation is deterministic")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto a = generate_synthetic(small_config(), topo);
    const auto b = generate_synthetic(small_config(), topo);
    auto other = small_config();
    other.seed = 12;
    const auto c = generate_synthetic(other, topo);
    CHECK(a[1].views[0].det.coords == b[1].views[0].det.coords);
    CHECK(a[1].views[0].gt.coords != c[1].views[0].gt.coords);
}

TEST_CASE("synthetic: invalid configuration is rejected")
{
    auto cfg = small_config();
    cfg.frames = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.view_yaws_deg.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.visible_conf_min = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("corruption: requested fraction of unmasked entries, low confidence")
{
    const auto topo = SkeletonTopology::h36m17();
    auto cfg = small_config();
    cfg.frames = 200;
    cfg.num_sequences = 1;
    auto det = generate_synthetic(cfg, topo)[0].views[0].det;
    const auto clean = det;
    Rng rng(3);
    CorruptionConfig cc;
    const auto flags = corrupt_detections(det, topo, cc, rng);
    int n = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (!flags[i]) {
            CHECK(det.confidence(static_cast<Eigen::Index>(i)) >= cc.clean_conf_min);
            continue;
        }
        ++n;
        const auto idx = static_cast<Eigen::Index>(i);
        CHECK(det.confidence(idx) >= cc.conf_min);
        CHECK(det.confidence(idx) <= cc.conf_max);
        const double shift_px = (det.coords.row(idx) - clean.coords.row(idx)).norm() * cc.crop_px;
        const int t = static_cast<int>(i) / det.num_keypoints;
        const int j = static_cast<int>(i) % det.num_keypoints;
        bool swapped = false;
        for (const auto& [l, r] : topo.mirror_pairs()) {
            const int m = j == l ? r : (j == r ? l : -1);
            if (m >= 0) swapped = det.coords.row(idx) == clean.coords.row(det.index(t, m));
        }
        if (!swapped) {
            CHECK(shift_px >= cc.min_px - 1e-9);
            CHECK(shift_px <= cc.max_px + 1e-9);
        }
    }
    const double frac = static_cast<double>(n) / static_cast<double>(flags.size());
    CHECK(frac == doctest::Approx(cc.fraction).epsilon(0.1));
}
