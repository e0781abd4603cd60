#include "mspose/train.hpp"

#include "mspose/errors.hpp"

#include <cmath>

namespace mspose {

using ad::Mat;

void TrainConfig::validate() const
{
    if (steps < 0) throw ConfigError("train: steps must be >= 0");
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
        throw ConfigError("train: final_lr_fraction must be in (0, 1]");
    if (pred_frames < 1) throw ConfigError("train: pred_frames must be >= 1");
    optimizer.validate();
    disc_optimizer.validate();
    weights.validate();
    if (augment) occlusion.validate();
    if (disc_scaler_windows < 1) throw ConfigError("train: disc_scaler_windows must be >= 1");
}

TrainingSet make_training_set(const std::vector<SyntheticSequence>& data, int clip_len, int step, bool keep_3d)
{
    if (clip_len < 1 || step < 1) throw ConfigError("training set: clip_len and step must be >= 1");
    TrainingSet set;
    set.clip_len = clip_len;
    for (const auto& seq : data) {
        const int first = static_cast<int>(set.clips.size());
        const int views = static_cast<int>(seq.views.size());
        for (int v = 0; v < views; ++v) {
            const SyntheticView& view = seq.views[v];
            TrainingClip clip;
            clip.input = view.det;
            clip.gt2d = view.clean2d;
            if (keep_3d) clip.gt = view.gt;
            clip.crop_mm = view.crop_mm;
            clip.action = seq.action;
            if (views > 1) {
                const int p = (v + 1) % views;
                clip.partner = first + p;
                clip.to_partner = seq.views[p].rotation * view.rotation.transpose();
            }
            set.clips.push_back(std::move(clip));
            const int n = view.det.num_frames;
            for (int s = 0; s + clip_len <= n; s += step) set.windows.emplace_back(first + v, s);
        }
    }
    return set;
}

namespace {

struct SampleResult {
    std::vector<Mat> grads;
    LossComponents parts;
    bool has_3d = false;
    double loss = 0.0;
    Mat prediction;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

// 2D ground truth of frames [first, first + count) in root-relative mm.
void gt2d_mm(const TrainingClip& clip, int first, int count, int root, Eigen::MatrixX2d& out,
             std::vector<std::uint8_t>& mask)
{
    const int k = clip.gt2d.num_keypoints;
    out.setZero(static_cast<Eigen::Index>(count) * k, 2);
    mask.assign(static_cast<std::size_t>(count) * k, 1);
    for (int i = 0; i < count; ++i) {
        const int t = first + i;
        if (clip.gt2d.masked(t, root)) continue;
        const Eigen::RowVector2d r = clip.gt2d.coords.row(clip.gt2d.index(t, root));
        for (int j = 0; j < k; ++j) {
            if (clip.gt2d.masked(t, j)) continue;
            out.row(i * k + j) = (clip.gt2d.coords.row(clip.gt2d.index(t, j)) - r) * clip.crop_mm;
            mask[i * k + j] = 0;
        }
    }
}

SampleResult one_sample(const TcnModel& model, const TrainingSet& data, const BatchItem& item, const TrainConfig& cfg,
                        const SkeletonTopology& topo, const Discriminator* disc)
{
    const auto [ci, start] = data.windows[item.window];
    const TrainingClip& clip = data.clips[ci];
    const int p = cfg.pred_frames;
    const int k = model.num_keypoints();
    const int first = start + model.config().center();
    Rng rng(item.seed);

    auto inputs = [&](const TrainingClip& c) {
        PoseSequence2D in = c.input.slice(start, data.clip_len);
        if (cfg.augment) in = apply_occlusion(in, cfg.occlusion, topo, rng);
        return model.input_matrix(in);
    };

    ad::Tape tape;
    const auto b = model.bind(tape, true);
    const ad::Var pred = model.predict_clip(tape, b, inputs(clip), p);
    const ad::Var zero = tape.constant(Mat::Zero(1, 1));
    ad::Var l3d = zero, lmv = zero, l2d = zero, lgen = zero;

    SampleResult r;
    r.has_3d = clip.has_3d();
    if (r.has_3d) l3d = ad_loss::loss_3d(tape, pred, clip.gt.coords.middleRows(static_cast<Eigen::Index>(first) * k, p * k));
    if (cfg.use_multiview && cfg.weights.w1 > 0.0 && clip.partner >= 0) {
        const ad::Var pred2 = model.predict_clip(tape, b, inputs(data.clips[clip.partner]), p);
        lmv = ad_loss::loss_multiview(tape, pred, pred2, clip.to_partner);
    }
    if (cfg.use_2d && cfg.weights.w2 > 0.0) {
        Eigen::MatrixX2d gt2;
        std::vector<std::uint8_t> mask;
        gt2d_mm(clip, first, p, model.root(), gt2, mask);
        l2d = ad_loss::loss_2d(tape, pred, gt2, mask);
    }
    if (disc && cfg.weights.w3 > 0.0) {
        r.rotation = RotationAugment::sample(rng).matrix();
        lgen = gen_loss_rotated(tape, *disc, pred, p, r.rotation);
    }
    const ad::Var total = ad_loss::total_loss(tape, l3d, lmv, l2d, lgen, cfg.weights);
    r.parts = {tape.scalar(l3d), tape.scalar(lmv), tape.scalar(l2d), tape.scalar(lgen)};
    r.loss = tape.scalar(total);
    r.prediction = tape.value(pred);
    tape.backward(total);
    r.grads.reserve(b.p.size());
    for (const auto& v : b.p) r.grads.push_back(tape.grad(v));
    return r;
}

}  // namespace

BatchResult batch_gradients(const TcnModel& model, const TrainingSet& data, const std::vector<BatchItem>& items,
                            const TrainConfig& cfg, const SkeletonTopology& topo, const Discriminator* disc,
                            Exec exec)
{
    const int n = static_cast<int>(items.size());
    if (n == 0) throw InvalidInput("train: empty batch");
    std::vector<SampleResult> results(n);
    if (exec == Exec::serial) {
        for (int i = 0; i < n; ++i) results[i] = one_sample(model, data, items[i], cfg, topo, disc);
    } else {
        // Exceptions must not escape an OpenMP region.
        std::vector<std::string> errors(n);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            try {
                results[i] = one_sample(model, data, items[i], cfg, topo, disc);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
        for (const auto& e : errors)
            if (!e.empty()) throw Error(e);
    }

    BatchResult out;
    out.grads = results[0].grads;
    for (int i = 1; i < n; ++i)
        for (std::size_t j = 0; j < out.grads.size(); ++j) out.grads[j] += results[i].grads[j];
    for (auto& g : out.grads) g /= n;
    int with_3d = 0;
    const int k = model.num_keypoints();
    for (int i = 0; i < n; ++i) {
        const auto& r = results[i];
        out.loss += r.loss / n;
        out.mean.lmv += r.parts.lmv / n;
        out.mean.l2d += r.parts.l2d / n;
        out.mean.lgen += r.parts.lgen / n;
        if (r.has_3d) {
            out.mean.l3d += r.parts.l3d;
            ++with_3d;
        }
        PoseSequence3D pred;
        pred.num_frames = cfg.pred_frames;
        pred.num_keypoints = k;
        pred.coords = r.prediction;
        out.predictions.push_back(std::move(pred));
        out.rotations.push_back(r.rotation);
        const auto [ci, start] = data.windows[items[i].window];
        out.source_clip.push_back(ci);
        out.source_start.push_back(start + model.config().center());
    }
    if (with_3d > 0) out.mean.l3d /= with_3d;
    return out;
}

std::vector<PoseSequence3D> sample_real_windows(const TrainingSet& data, int frames, int count, Rng& rng)
{
    std::vector<int> labeled;
    for (int i = 0; i < static_cast<int>(data.clips.size()); ++i)
        if (data.clips[i].has_3d() && data.clips[i].gt.num_frames >= frames) labeled.push_back(i);
    if (labeled.empty()) throw InvalidInput("train: no 3D-labeled clips long enough for real windows");
    std::vector<PoseSequence3D> out;
    out.reserve(count);
    for (int n = 0; n < count; ++n) {
        const TrainingClip& c = data.clips[labeled[rng.uniform_int(0, static_cast<int>(labeled.size()) - 1)]];
        const int start = rng.uniform_int(0, c.gt.num_frames - frames);
        out.push_back(rotate_pose(c.gt.slice(start, frames), RotationAugment::sample(rng)));
    }
    return out;
}

TrainReport train(TcnModel& model, const TrainingSet& data, const TrainConfig& cfg, const SkeletonTopology& topo,
                  Discriminator* disc)
{
    cfg.validate();
    const int needed = model.config().window_len + cfg.pred_frames - 1;
    if (data.clip_len != needed)
        throw ConfigError("train: training clips have " + std::to_string(data.clip_len) + " frames, model needs " +
                          std::to_string(needed));
    if (data.windows.empty()) throw InvalidInput("train: no training windows");
    const bool adversarial = disc != nullptr && cfg.weights.w3 > 0.0;
    if (adversarial && cfg.pred_frames < disc->min_frames())
        throw ConfigError("train: pred_frames must cover the discriminator's TKCS interval");

    TrainReport report;
    Rng rng(cfg.seed);
    Optimizer opt(cfg.optimizer, model.params());
    Optimizer disc_opt;
    if (adversarial) {
        Rng scaler_rng = rng.split(1);
        disc->fit_scaler(sample_real_windows(data, cfg.pred_frames, cfg.disc_scaler_windows, scaler_rng));
        disc_opt = Optimizer(cfg.disc_optimizer, disc->params());
    }

    std::vector<Mat> last_good = model.params();
    const double lr0 = cfg.optimizer.lr;
    for (int step = 0; step < cfg.steps; ++step) {
        opt.set_lr(lr0 * std::pow(cfg.final_lr_fraction, static_cast<double>(step) / cfg.steps));
        std::vector<BatchItem> items(cfg.batch);
        for (auto& it : items) {
            it.window = rng.uniform_int(0, static_cast<int>(data.windows.size()) - 1);
            it.seed = rng.next();
        }
        const BatchResult res =
            batch_gradients(model, data, items, cfg, topo, adversarial ? disc : nullptr, cfg.exec);
        bool finite = std::isfinite(res.loss);
        for (const auto& g : res.grads) finite = finite && g.allFinite();
        if (!finite) {
            model.params() = last_good;
            throw TrainingDiverged("train: non-finite loss at step " + std::to_string(step));
        }
        report.loss.push_back(res.loss);
        report.l3d.push_back(res.mean.l3d);
        report.lmv.push_back(res.mean.lmv);
        report.l2d.push_back(res.mean.l2d);
        report.lgen.push_back(res.mean.lgen);

        last_good = model.params();
        opt.step(model.params(), res.grads);
        if (!model.all_finite()) {
            model.params() = last_good;
            throw TrainingDiverged("train: non-finite parameters after step " + std::to_string(step));
        }

        if (adversarial) {
            // Discriminator phase with the generator frozen: rotated real
            // windows against this step's rotated predictions.
            std::vector<PoseSequence3D> real = sample_real_windows(data, cfg.pred_frames, cfg.batch, rng);
            std::vector<PoseSequence3D> fake;
            for (std::size_t i = 0; i < res.predictions.size(); ++i)
                fake.push_back(rotate_pose(res.predictions[i], res.rotations[i]));
            std::vector<const PoseSequence3D*> windows;
            std::vector<int> labels;
            for (const auto& w : real) {
                windows.push_back(&w);
                labels.push_back(1);
            }
            for (const auto& w : fake) {
                windows.push_back(&w);
                labels.push_back(0);
            }
            ad::Tape tape;
            const auto b = disc->bind(tape, true);
            const ad::Var bce = discriminator_bce(tape, *disc, b, windows, labels);
            const double value = tape.scalar(bce);
            if (!std::isfinite(value)) throw TrainingDiverged("train: discriminator loss is not finite");
            report.disc_loss.push_back(value);
            tape.backward(bce);
            std::vector<Mat> grads;
            for (const auto& v : b.p) grads.push_back(tape.grad(v));
            disc_opt.step(disc->params(), grads);
        }
    }
    return report;
}

}  // namespace mspose
