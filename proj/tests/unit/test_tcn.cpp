#include "mspose/errors.hpp"
#include "mspose/losses.hpp"
#include "mspose/synthetic.hpp"
#include "mspose/tcn.hpp"
#include "mspose/train.hpp"

#include "gradcheck.hpp"

#include <doctest.h>

using namespace mspose;

namespace {

TcnConfig small_tcn()
{
    TcnConfig c;
    c.embed_dim = 32;
    c.channels = 16;
    c.window_len = 16;
    c.strides = {1, 2};
    return c;
}

PoseSequence2D random_2d(int frames, int k, std::uint64_t seed)
{
    Rng rng(seed);
    PoseSequence2D s = PoseSequence2D::zeros(frames, k);
    for (Eigen::Index i = 0; i < s.coords.rows(); ++i) {
        s.coords.row(i) << rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7);
        s.confidence(i) = rng.uniform(0.5, 1.0);
        s.mask[i] = 0;
    }
    return s;
}

PoseSequence3D random_3d(int frames, std::uint64_t seed)
{
    const auto topo = SkeletonTopology::h36m17();
    Rng rng(seed);
    PoseSequence3D s = PoseSequence3D::zeros(frames, topo.num_keypoints());
    for (int t = 0; t < frames; ++t) s.set_frame(t, random_pose(topo, rng));
    return s;
}

// Perturb every parameter so that the network is not the zero map.
void randomize(TcnModel& m, std::uint64_t seed)
{
    Rng rng(seed);
    for (auto& p : m.params())
        for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += rng.normal(0.0, 0.05);
}

std::vector<SyntheticSequence> small_data(int sequences, int frames, std::uint64_t seed)
{
    SyntheticMotionConfig sc;
    sc.num_sequences = sequences;
    sc.frames = frames;
    sc.seed = seed;
    return generate_synthetic(sc, SkeletonTopology::h36m17());
}

}  // namespace

TEST_CASE("tcn: embedding dimension and zero input")
{
    for (int e : {64, 128, 256, 512, 1024}) {
        TcnConfig c = small_tcn();
        c.embed_dim = e;
        const TcnModel m(c, 17, 0, 1);
        const Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(c.input_dim(17));
        const auto r = m.embed_frame(zero);
        CHECK(r.size() == e);
        CHECK(r.allFinite());
    }
}

TEST_CASE("tcn: masked coordinates do not reach the embedding")
{
    TcnModel m(small_tcn(), 17, 0, 2);
    randomize(m, 3);
    auto a = random_2d(1, 17, 4);
    a.set_masked(0, 5);
    auto b = a;
    b.coords.row(5) << 0.9, 0.1;  // junk under the mask
    const auto ea = m.embed_frame(m.input_matrix(a).row(0));
    const auto eb = m.embed_frame(m.input_matrix(b).row(0));
    CHECK(ea == eb);
}

TEST_CASE("tcn: output shape for every stride set and zero head")
{
    const std::vector<std::vector<int>> sets{{1}, {1, 2}, {1, 2, 3}, {1, 2, 3, 5}, {1, 2, 3, 5, 7}};
    for (const auto& s : sets) {
        TcnConfig c = small_tcn();
        c.strides = s;
        c.window_len = 64;
        const TcnModel m(c, 17, 0, 5);
        const auto seq = random_2d(64, 17, 6);
        const Eigen::MatrixXd in = m.input_matrix(seq);
        Eigen::MatrixXd emb(64, c.embed_dim);
        for (int t = 0; t < 64; ++t) emb.row(t) = m.embed_frame(in.row(t));
        const Pose3 out = m.forward(emb);
        CHECK(out.rows() == 17);
        CHECK(out.cols() == 3);
        CHECK(out.isZero());
    }
}

TEST_CASE("tcn: inference is finite under time shifts and the root stays at the origin")
{
    TcnModel m(small_tcn(), 17, 0, 7);
    randomize(m, 8);
    const auto topo = SkeletonTopology::h36m17();
    const auto seq = random_3d(40, 9);
    const auto det = project_to_crop(seq, 2000.0);
    const auto a = m.infer_sequence(det.slice(0, 39));
    const auto b = m.infer_sequence(det.slice(1, 39));
    CHECK(a.all_finite());
    CHECK(b.all_finite());
    for (int t = 0; t < a.num_frames; ++t) CHECK(a.point(t, 0).norm() == 0.0);
    CHECK((m.infer_sequence(det, Exec::serial).coords - m.infer_sequence(det, Exec::parallel).coords).isZero());
}

TEST_CASE("tcn: parameter count formula")
{
    const TcnConfig c = small_tcn();
    const TcnModel m(c, 17, 0, 1);
    CHECK(m.parameter_count() == TcnModel::parameter_count(c, 17));
}

TEST_CASE("losses: closed forms")
{
    const auto gt = random_3d(2, 10);
    CHECK(loss_3d(gt, gt) == 0.0);
    auto off = gt;
    off.coords(3, 2) += 10.0;
    CHECK(loss_3d(off, gt) == doctest::Approx(100.0 / (2 * 17)).epsilon(1e-12));

    const Eigen::Matrix3d r = RotationAugment{0.1, 1.0, 0.2}.matrix();
    const auto v2 = rotate_pose(gt, r);
    CHECK(loss_multiview(gt, v2, r) < 1e-18 * gt.coords.squaredNorm());
    CHECK(loss_multiview(off, gt, Eigen::Matrix3d::Identity()) == doctest::Approx(loss_3d(off, gt)));

    const auto proj = orthographic_project(gt);
    CHECK(loss_2d(gt, proj) == 0.0);
    auto masked = proj;
    for (int t = 0; t < 2; ++t)
        for (int k = 0; k < 17; ++k) masked.set_masked(t, k);
    CHECK(loss_2d(off, masked) == 0.0);

    LossComponents zero;
    CHECK(total_loss(zero, LossWeights{}) == 0.0);
    LossComponents unit{1.0, 1.0, 1.0, 1.0};
    CHECK(total_loss(unit, LossWeights{}) == doctest::Approx(1.61).epsilon(1e-15));
}

TEST_CASE("losses: match direct summation")
{
    const auto gt = random_3d(3, 11);
    auto pred = gt;
    Rng rng(12);
    for (Eigen::Index i = 0; i < pred.coords.size(); ++i) pred.coords(i) += rng.normal(0.0, 20.0);
    const Eigen::Matrix3d r = RotationAugment{-0.2, 0.7, 0.1}.matrix();
    double s3 = 0.0, smv = 0.0;
    for (Eigen::Index i = 0; i < gt.coords.rows(); ++i) {
        s3 += (pred.coords.row(i) - gt.coords.row(i)).squaredNorm();
        smv += (r * pred.coords.row(i).transpose() - gt.coords.row(i).transpose()).squaredNorm();
    }
    CHECK(loss_3d(pred, gt) == doctest::Approx(s3 / gt.coords.rows()).epsilon(1e-13));
    CHECK(loss_multiview(pred, gt, r) == doctest::Approx(smv / gt.coords.rows()).epsilon(1e-13));

    auto g2 = orthographic_project(gt);
    g2.set_masked(0, 3);
    g2.set_masked(2, 9);
    double s2 = 0.0;
    int n = 0;
    for (Eigen::Index i = 0; i < gt.coords.rows(); ++i) {
        if (g2.mask[i]) continue;
        s2 += std::pow(pred.coords(i, 0) - g2.coords(i, 0), 2) + std::pow(pred.coords(i, 1) - g2.coords(i, 1), 2);
        ++n;
    }
    CHECK(loss_2d(pred, g2) == doctest::Approx(s2 / n).epsilon(1e-13));

    const LossWeights w{0.3, 0.2, 0.05};
    const LossComponents c{2.0, 3.0, 5.0, 7.0};
    CHECK(total_loss(c, w) == doctest::Approx(2.0 + 0.3 * 3.0 + 0.2 * 5.0 + 0.05 * 7.0).epsilon(1e-15));
}

TEST_CASE("losses: tape gradients match finite differences")
{
    const auto gt = random_3d(3, 13);
    auto other = gt;
    Rng rng(14);
    for (Eigen::Index i = 0; i < other.coords.size(); ++i) other.coords(i) += rng.normal(0.0, 30.0);
    const Eigen::MatrixXd x0 = other.coords;
    const Eigen::Matrix3d r = RotationAugment{0.3, -1.0, 0.2}.matrix();
    auto g2 = orthographic_project(gt);
    g2.set_masked(1, 4);
    const Eigen::MatrixX3d gtc = gt.coords;
    const Eigen::MatrixX2d g2c = g2.coords;

    auto l3d = [&](ad::Tape& t, ad::Var x) { return ad_loss::loss_3d(t, x, gtc); };
    auto lmv = [&](ad::Tape& t, ad::Var x) { return ad_loss::loss_multiview(t, x, t.constant(gtc), r); };
    auto l2d = [&](ad::Tape& t, ad::Var x) { return ad_loss::loss_2d(t, x, g2c, g2.mask); };
    auto total = [&](ad::Tape& t, ad::Var x) {
        const ad::Var gen = t.scale(t.mean(t.square(x)), 1e-3);
        return ad_loss::total_loss(t, l3d(t, x), lmv(t, x), l2d(t, x), gen, LossWeights{});
    };
    for (const auto& f : std::vector<std::function<ad::Var(ad::Tape&, ad::Var)>>{l3d, lmv, l2d, total}) {
        const auto res = oracle::grad_check(f, x0, 100, 15);
        CHECK(res.failed == 0);
    }

    // Fully masked 2D ground truth: zero loss and zero gradient.
    auto all = g2;
    for (int t = 0; t < 3; ++t)
        for (int k = 0; k < 17; ++k) all.set_masked(t, k);
    ad::Tape tape;
    const ad::Var x = tape.variable(x0);
    const ad::Var l = ad_loss::loss_2d(tape, x, all.coords, all.mask);
    tape.backward(l);
    CHECK(tape.scalar(l) == 0.0);
    CHECK(tape.grad(x).isZero());
}

TEST_CASE("train: zero learning rate leaves parameters untouched")
{
    const auto data = small_data(2, 40, 16);
    const TcnConfig c = small_tcn();
    TrainConfig tc;
    tc.steps = 3;
    tc.batch = 2;
    tc.optimizer.lr = 0.0;
    tc.weights.w3 = 0.0;
    const auto set = make_training_set(data, c.window_len + tc.pred_frames - 1, 8);
    TcnModel m(c, 17, 0, 17);
    randomize(m, 18);
    const auto before = m.params();
    const auto rep = train(m, set, tc, SkeletonTopology::h36m17());
    CHECK(rep.loss.size() == 3);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(m.params()[i] == before[i]);
}

TEST_CASE("train: serial and parallel batch gradients agree bit for bit")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto data = small_data(3, 40, 19);
    const TcnConfig c = small_tcn();
    TrainConfig tc;
    tc.augment = true;
    tc.weights.w3 = 0.0;
    const auto set = make_training_set(data, c.window_len + tc.pred_frames - 1, 4);
    TcnModel m(c, 17, 0, 20);
    randomize(m, 21);
    std::vector<BatchItem> items;
    for (int i = 0; i < 8; ++i) items.push_back({i * 3 % static_cast<int>(set.windows.size()), 100u + i});
    const auto a = batch_gradients(m, set, items, tc, topo, nullptr, Exec::serial);
    const auto b = batch_gradients(m, set, items, tc, topo, nullptr, Exec::parallel);
    CHECK(a.loss == b.loss);
    for (std::size_t i = 0; i < a.grads.size(); ++i) CHECK(a.grads[i] == b.grads[i]);
}

TEST_CASE("train: 200 steps halve the 3D loss on a 500-window set")
{
    const auto topo = SkeletonTopology::h36m17();
    const auto data = small_data(25, 96, 22);
    const TcnConfig c = small_tcn();
    TrainConfig tc;
    tc.steps = 200;
    tc.batch = 8;
    tc.optimizer = OptimizerConfig{OptimizerKind::adam, 1e-3};
    tc.weights.w3 = 0.0;
    tc.seed = 23;
    const auto set = make_training_set(data, c.window_len + tc.pred_frames - 1, 8);
    CHECK(set.windows.size() == 500);
    TcnModel m(c, 17, 0, 24);
    const auto rep = train(m, set, tc, topo);
    double tail = 0.0;
    for (int i = 190; i < 200; ++i) tail += rep.l3d[i] / 10.0;
    CHECK(tail <= 0.5 * rep.l3d[0]);
    CHECK(m.all_finite());
}

TEST_CASE("train: invalid configurations")
{
    TrainConfig tc;
    tc.batch = 0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    TcnConfig c;
    c.strides = {};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TcnConfig{};
    c.embed_dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("train: occlusion augmentation helps on occluded inputs")
{
    const auto topo = SkeletonTopology::h36m17();
    SyntheticMotionConfig sc;
    sc.num_sequences = 40;
    sc.frames = 96;
    sc.mask_occluded = true;
    sc.seed = 25;
    const auto data = generate_synthetic(sc, topo);
    sc.num_sequences = 6;
    sc.seed = 26;
    const auto eval = generate_synthetic(sc, topo);
    OcclusionConfig heavy;
    Rng orng(27);
    std::vector<PoseSequence2D> det;
    for (const auto& s : eval) det.push_back(apply_occlusion(s.views[0].det, heavy, topo, orng));

    TcnConfig c = small_tcn();
    c.embed_dim = 64;
    c.channels = 32;
    auto run = [&](bool augment) {
        TrainConfig tc;
        tc.steps = 600;
        tc.batch = 8;
        tc.optimizer = OptimizerConfig{OptimizerKind::adam, 1e-3};
        tc.weights.w3 = 0.0;
        tc.augment = augment;
        tc.seed = 28;
        const auto set = make_training_set(data, c.window_len + tc.pred_frames - 1, 4);
        TcnModel m(c, 17, 0, 29);
        train(m, set, tc, topo);
        double err = 0.0;
        for (std::size_t i = 0; i < eval.size(); ++i) err += loss_3d(m.infer_sequence(det[i]), eval[i].views[0].gt);
        return err / eval.size();
    };
    const double plain = run(false);
    const double augmented = run(true);
    MESSAGE("occluded eval loss: plain " << plain << ", augmented " << augmented);
    CHECK(augmented < plain);
}
