#include "mspose/iso.hpp"

#include "mspose/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mspose {

using ad::Mat;

WeightMode parse_weight_mode(const std::string& name)
{
    if (name == "constant") return WeightMode::constant;
    if (name == "confidence") return WeightMode::confidence;
    if (name == "calibrated") return WeightMode::calibrated;
    if (name == "hard" || name == "hard_threshold") return WeightMode::hard_threshold;
    if (name == "soft" || name == "soft_threshold") return WeightMode::soft_threshold;
    throw ConfigError("unknown weight mode '" + name + "'");
}

std::string to_string(WeightMode mode)
{
    switch (mode) {
    case WeightMode::constant: return "constant";
    case WeightMode::confidence: return "confidence";
    case WeightMode::calibrated: return "calibrated";
    case WeightMode::hard_threshold: return "hard_threshold";
    case WeightMode::soft_threshold: return "soft_threshold";
    }
    return "?";
}

double Calibration::operator()(double c) const
{
    if (is_identity()) return std::clamp(c, 0.0, 1.0);
    if (c <= conf.front()) return value.front();
    if (c >= conf.back()) return value.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(conf.begin(), conf.end(), c) - conf.begin());
    const std::size_t lo = hi - 1;
    const double f = (c - conf[lo]) / (conf[hi] - conf[lo]);
    return value[lo] + f * (value[hi] - value[lo]);
}

void Calibration::validate() const
{
    if (conf.size() != value.size()) throw ConfigError("calibration: knot lists differ in length");
    for (std::size_t i = 0; i < conf.size(); ++i) {
        if (!std::isfinite(conf[i]) || !(value[i] >= 0.0 && value[i] <= 1.0))
            throw ConfigError("calibration: knot values must lie in [0, 1]");
        if (i > 0 && !(conf[i] > conf[i - 1] && value[i] >= value[i - 1]))
            throw ConfigError("calibration: knots must be increasing and the map non-decreasing");
    }
}

Calibration fit_calibration(const std::vector<double>& conf, const std::vector<int>& correct)
{
    if (conf.empty() || conf.size() != correct.size())
        throw InvalidInput("calibration: validation pairs are empty or mismatched");
    const auto positives = std::count_if(correct.begin(), correct.end(), [](int c) { return c != 0; });
    if (positives == 0 || positives == static_cast<long>(correct.size()))
        throw DegenerateInput("calibration: all validation labels are identical");

    std::vector<std::size_t> order(conf.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return conf[i] < conf[j]; });

    struct Block {
        double hits = 0.0, count = 0.0, conf_sum = 0.0;
        double mean() const { return hits / count; }
    };
    std::vector<Block> blocks;
    for (std::size_t n = 0; n < order.size(); ++n) {
        const std::size_t i = order[n];
        // Equal confidences always share a block.
        if (!blocks.empty() && n > 0 && conf[order[n - 1]] == conf[i]) {
            blocks.back().hits += correct[i] ? 1.0 : 0.0;
            blocks.back().count += 1.0;
            blocks.back().conf_sum += conf[i];
        } else {
            blocks.push_back({correct[i] ? 1.0 : 0.0, 1.0, conf[i]});
        }
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() >= blocks.back().mean()) {
            const Block last = blocks.back();
            blocks.pop_back();
            blocks.back().hits += last.hits;
            blocks.back().count += last.count;
            blocks.back().conf_sum += last.conf_sum;
        }
    }
    Calibration c;
    for (const auto& b : blocks) {
        c.conf.push_back(b.conf_sum / b.count);
        c.value.push_back(b.mean());
    }
    return c;
}

Calibration fit_calibration_or_identity(const std::vector<double>& conf, const std::vector<int>& correct,
                                        bool* fell_back)
{
    if (fell_back) *fell_back = false;
    if (conf.empty()) {
        if (fell_back) *fell_back = true;
        return {};
    }
    try {
        return fit_calibration(conf, correct);
    } catch (const DegenerateInput&) {
        if (fell_back) *fell_back = true;
        return {};
    }
}

double reprojection_weight(WeightMode mode, double conf, double calibrated, double l2d, double sigma,
                           double threshold)
{
    if (!(sigma > 0.0)) throw ConfigError("reprojection weight: sigma must be > 0");
    switch (mode) {
    case WeightMode::constant: return 1.0;
    case WeightMode::confidence: return std::clamp(conf, 0.0, 1.0);
    case WeightMode::calibrated: return calibrated;
    case WeightMode::hard_threshold: return calibrated >= threshold ? calibrated : 0.0;
    case WeightMode::soft_threshold: return -std::expm1(-calibrated * l2d * l2d / (2.0 * sigma * sigma));
    }
    return 0.0;
}

void IsoConfig::validate() const
{
    if (!(sigma > 0.0)) throw ConfigError("iso: sigma must be > 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("iso: threshold must be in [0, 1]");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("iso: lambdas must be >= 0");
    if (iterations < 0) throw ConfigError("iso: iterations must be >= 0");
    if (!(step_size > 0.0)) throw ConfigError("iso: step_size must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("iso: momentum must be in [0, 1)");
    if (refit_every < 1) throw ConfigError("iso: refit_every must be >= 1");
    if (!(heatmap_size > 0.0)) throw ConfigError("iso: heatmap_size must be > 0");
    if (window_len < 2) throw ConfigError("iso: window_len must be >= 2");
    calibration.validate();
}

ScaleAlignment fit_alignment(const PoseSequence3D& pose, const PoseSequence2D& det, const Eigen::VectorXd& weights)
{
    const int t_count = det.num_frames;
    const int k = det.num_keypoints;
    if (pose.num_frames != t_count || pose.num_keypoints != k || weights.size() != static_cast<Eigen::Index>(t_count) * k)
        throw InvalidInput("alignment: pose, detections and weights disagree in shape");
    std::vector<Eigen::RowVector2d> u_mean(t_count, Eigen::RowVector2d::Zero());
    std::vector<Eigen::RowVector2d> x_mean(t_count, Eigen::RowVector2d::Zero());
    std::vector<double> w_sum(t_count, 0.0);
    for (int t = 0; t < t_count; ++t) {
        for (int j = 0; j < k; ++j) {
            const int i = t * k + j;
            const double w = weights(i);
            if (w <= 0.0) continue;
            w_sum[t] += w;
            u_mean[t] += w * det.coords.row(i);
            x_mean[t] += w * pose.coords.row(i).head<2>();
        }
        if (w_sum[t] > 0.0) {
            u_mean[t] /= w_sum[t];
            x_mean[t] /= w_sum[t];
        }
    }
    double num = 0.0, den = 0.0;
    for (int t = 0; t < t_count; ++t) {
        if (w_sum[t] <= 0.0) continue;
        for (int j = 0; j < k; ++j) {
            const int i = t * k + j;
            const double w = weights(i);
            if (w <= 0.0) continue;
            const Eigen::RowVector2d du = det.coords.row(i) - u_mean[t];
            const Eigen::RowVector2d dx = pose.coords.row(i).head<2>() - x_mean[t];
            num += w * du.dot(dx);
            den += w * du.squaredNorm();
        }
    }
    if (!(den > 0.0) || !(num > 0.0)) throw DegenerateInput("alignment: detections carry no usable spread");
    ScaleAlignment a;
    a.scale = num / den;
    a.shift = Eigen::MatrixX2d::Zero(t_count, 2);
    for (int t = 0; t < t_count; ++t)
        if (w_sum[t] > 0.0) a.shift.row(t) = x_mean[t] - a.scale * u_mean[t];
    return a;
}

Eigen::MatrixX2d aligned_detections(const PoseSequence2D& det, const ScaleAlignment& align)
{
    Eigen::MatrixX2d out(det.coords.rows(), 2);
    for (int t = 0; t < det.num_frames; ++t)
        for (int j = 0; j < det.num_keypoints; ++j) {
            const int i = det.index(t, j);
            out.row(i) = align.scale * det.coords.row(i) + align.shift.row(t);
        }
    return out;
}

Eigen::VectorXd base_weights(const PoseSequence2D& det, const IsoConfig& cfg)
{
    Eigen::VectorXd w(det.coords.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (det.mask[i]) {
            w(i) = 0.0;
            continue;
        }
        const double c = det.confidence(i);
        const double cs = cfg.calibration(c);
        switch (cfg.mode) {
        case WeightMode::soft_threshold: w(i) = cs; break;
        default: w(i) = reprojection_weight(cfg.mode, c, cs, 0.0, cfg.sigma, cfg.threshold);
        }
    }
    return w;
}

Eigen::VectorXd current_weights(const PoseSequence3D& pose, const PoseSequence2D& det, const ScaleAlignment& align,
                                const IsoConfig& cfg)
{
    if (cfg.mode != WeightMode::soft_threshold) return base_weights(det, cfg);
    const Eigen::MatrixX2d d = aligned_detections(det, align);
    Eigen::VectorXd w(det.coords.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (det.mask[i]) {
            w(i) = 0.0;
            continue;
        }
        const double dist_mm = (pose.coords.row(i).head<2>() - d.row(i)).norm();
        const double l2d = dist_mm / align.scale * cfg.heatmap_size;
        w(i) = reprojection_weight(cfg.mode, det.confidence(i), cfg.calibration(det.confidence(i)), l2d, cfg.sigma,
                                   cfg.threshold);
    }
    return w;
}

ad::Var rep_loss(ad::Tape& tape, ad::Var coords, const Eigen::MatrixX2d& det_mm, const Eigen::VectorXd& weights)
{
    const ad::Var diff = tape.sub(tape.middle_cols(coords, 0, 2), tape.constant(det_mm));
    return tape.sum(tape.mul_const(tape.square(diff), weights.replicate(1, 2)));
}

double rep_loss(const PoseSequence3D& pose, const PoseSequence2D& det, const ScaleAlignment& align,
                const IsoConfig& cfg)
{
    ad::Tape tape;
    return tape.scalar(
        rep_loss(tape, tape.constant(pose.coords), aligned_detections(det, align), current_weights(pose, det, align, cfg)));
}

IsoTerms iso_loss(ad::Tape& tape, ad::Var coords, int frames, const Eigen::MatrixX2d& det_mm,
                  const Eigen::VectorXd& weights, const PoseScorer* scorer, const IsoConfig& cfg)
{
    const int rows = static_cast<int>(tape.value(coords).rows());
    const int k = rows / frames;
    IsoTerms t;
    t.rep = rep_loss(tape, coords, det_mm, weights);
    if (scorer && cfg.lambda1 > 0.0 && frames >= scorer->min_frames())
        t.gen = scorer->gen_loss(tape, coords, frames);
    else
        t.gen = tape.constant(Mat::Zero(1, 1));
    if (frames > 1) {
        const ad::Var d = tape.sub(tape.middle_rows(coords, k, rows - k), tape.middle_rows(coords, 0, rows - k));
        t.smooth = tape.sum(tape.square(d));
    } else {
        t.smooth = tape.constant(Mat::Zero(1, 1));
    }
    t.total = tape.add(tape.add(t.rep, tape.scale(t.gen, cfg.lambda1)), tape.scale(t.smooth, cfg.lambda2));
    return t;
}

double iso_loss(const PoseSequence3D& pose, const PoseSequence2D& det, const PoseScorer* scorer,
                const IsoConfig& cfg)
{
    const ScaleAlignment align = fit_alignment(pose, det, base_weights(det, cfg));
    ad::Tape tape;
    const IsoTerms t = iso_loss(tape, tape.constant(pose.coords), pose.num_frames, aligned_detections(det, align),
                                current_weights(pose, det, align, cfg), scorer, cfg);
    return tape.scalar(t.total);
}

namespace {

double sequence_mpjpe(const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b)
{
    return (a - b).rowwise().norm().mean();
}

}  // namespace

IsoResult refine(const PoseSequence3D& initial, const PoseSequence2D& det, const PoseScorer* scorer,
                 const IsoConfig& cfg, int root, const PoseSequence3D* gt)
{
    cfg.validate();
    if (initial.num_frames != det.num_frames || initial.num_keypoints != det.num_keypoints)
        throw InvalidInput("iso: initial pose and detections disagree in shape");
    if (gt && (gt->num_frames != initial.num_frames || gt->num_keypoints != initial.num_keypoints))
        throw InvalidInput("iso: ground truth shape mismatch");
    const int k = initial.num_keypoints;
    const int frames = initial.num_frames;

    IsoResult result;
    result.pose = initial;
    ScaleAlignment align;
    const Eigen::VectorXd base = base_weights(det, cfg);
    try {
        align = fit_alignment(initial, det, base);
    } catch (const DegenerateInput&) {
        // Nothing to fit against: only the prior terms could move the pose,
        // and they are not trusted alone.
        IsoTraceRow row;
        if (gt) row.mpjpe = sequence_mpjpe(initial.coords, gt->coords);
        result.trace.push_back(row);
        return result;
    }

    Mat x = initial.coords;
    Mat velocity = Mat::Zero(x.rows(), 3);
    Mat best = x;
    double best_total = std::numeric_limits<double>::infinity();
    double first_total = 0.0;
    for (int it = 0; it <= cfg.iterations; ++it) {
        PoseSequence3D current = initial;
        current.coords = x;
        if (it > 0 && it % cfg.refit_every == 0) {
            try {
                align = fit_alignment(current, det, base);
            } catch (const DegenerateInput&) {
            }
        }
        ad::Tape tape;
        const ad::Var xv = tape.variable(x);
        const IsoTerms terms = iso_loss(tape, xv, frames, aligned_detections(det, align),
                                        current_weights(current, det, align, cfg), scorer, cfg);
        IsoTraceRow row;
        row.iteration = it;
        row.rep = tape.scalar(terms.rep);
        row.gen = tape.scalar(terms.gen);
        row.smooth = tape.scalar(terms.smooth);
        row.total = tape.scalar(terms.total);
        if (gt) row.mpjpe = sequence_mpjpe(x, gt->coords);
        result.trace.push_back(row);

        if (it == 0) first_total = row.total;
        if (!std::isfinite(row.total) || row.total > 10.0 * first_total) {
            result.diverged = true;
            break;
        }
        if (row.total < best_total) {
            best_total = row.total;
            best = x;
        }
        if (it == cfg.iterations) break;

        tape.backward(terms.total);
        Mat g = tape.grad(xv);
        for (int t = 0; t < frames; ++t) g.row(t * k + root).setZero();
        velocity = cfg.momentum * velocity - cfg.step_size * g;
        x += velocity;
    }
    result.pose.coords = result.diverged ? best : x;
    return result;
}

IsoResult refine_sequence(const PoseSequence3D& initial, const PoseSequence2D& det, const PoseScorer* scorer,
                          const IsoConfig& cfg, int root, const PoseSequence3D* gt, Exec exec)
{
    cfg.validate();
    const int n = initial.num_frames;
    std::vector<std::pair<int, int>> windows;
    for (int s = 0; s < n; s += cfg.window_len) windows.emplace_back(s, std::min(cfg.window_len, n - s));
    // A short tail joins the previous window.
    if (windows.size() > 1 && windows.back().second < cfg.window_len / 2) {
        windows[windows.size() - 2].second += windows.back().second;
        windows.pop_back();
    }

    std::vector<IsoResult> parts(windows.size());
    std::vector<std::string> errors(windows.size());
    auto run = [&](int w) {
        const auto [s, len] = windows[w];
        PoseSequence3D gt_slice;
        if (gt) gt_slice = gt->slice(s, len);
        parts[w] = refine(initial.slice(s, len), det.slice(s, len), scorer, cfg, root, gt ? &gt_slice : nullptr);
    };
    const int count = static_cast<int>(windows.size());
    if (exec == Exec::serial) {
        for (int w = 0; w < count; ++w) run(w);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (int w = 0; w < count; ++w) {
            try {
                run(w);
            } catch (const std::exception& e) {
                errors[w] = e.what();
            }
        }
        for (const auto& e : errors)
            if (!e.empty()) throw Error(e);
    }

    IsoResult out;
    out.pose = initial;
    std::size_t longest = 0;
    for (std::size_t w = 0; w < parts.size(); ++w) {
        const auto [s, len] = windows[w];
        out.pose.coords.middleRows(static_cast<Eigen::Index>(s) * initial.num_keypoints,
                                   static_cast<Eigen::Index>(len) * initial.num_keypoints) = parts[w].pose.coords;
        out.diverged = out.diverged || parts[w].diverged;
        longest = std::max(longest, parts[w].trace.size());
    }
    for (std::size_t i = 0; i < longest; ++i) {
        IsoTraceRow row;
        row.iteration = static_cast<int>(i);
        double err = 0.0;
        for (std::size_t w = 0; w < parts.size(); ++w) {
            // Windows that stopped early keep contributing their last row.
            const IsoTraceRow& r = parts[w].trace[std::min(i, parts[w].trace.size() - 1)];
            row.rep += r.rep;
            row.gen += r.gen;
            row.smooth += r.smooth;
            row.total += r.total;
            err += r.mpjpe * windows[w].second;
        }
        row.mpjpe = gt ? err / n : -1.0;
        out.trace.push_back(row);
    }
    return out;
}

}  // namespace mspose
