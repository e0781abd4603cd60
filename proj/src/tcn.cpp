#include "mspose/tcn.hpp"

#include "mspose/errors.hpp"
#include "mspose/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mspose {

void TcnConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError("tcn: " + what); };
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    if (channels < 1) fail("channels must be >= 1");
    if (kernel < 2 || kernel % 2 == 0) fail("kernel must be odd and >= 3");
    if (layers < 1) fail("layers must be >= 1");
    if (strides.empty()) fail("strides must be nonempty");
    for (std::size_t i = 0; i < strides.size(); ++i) {
        if (strides[i] < 1) fail("strides must be >= 1");
        if (i > 0 && strides[i] <= strides[i - 1]) fail("strides must be strictly increasing");
    }
    if (tkcs_interval < 1) fail("tkcs_interval must be >= 1");
    if (!(output_scale_mm > 0.0)) fail("output_scale_mm must be > 0");
    const int reach = half_span() * strides.back();
    if (center() - reach < 0 || center() + reach > window_len - 1)
        fail("window_len " + std::to_string(window_len) + " is shorter than the receptive field of stride " +
             std::to_string(strides.back()));
}

namespace {

using ad::Mat;

Mat he_uniform(int fan_in, int fan_out, Rng& rng)
{
    const double a = std::sqrt(6.0 / fan_in);
    Mat w(fan_in, fan_out);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-a, a);
    return w;
}

}  // namespace

TcnModel::TcnModel(const TcnConfig& cfg, int num_keypoints, int root, std::uint64_t seed)
    : cfg_(cfg), k_(num_keypoints), root_(root)
{
    cfg_.validate();
    if (num_keypoints < 1 || root < 0 || root >= num_keypoints) throw InvalidInput("tcn: bad keypoint count or root");
    Rng rng(seed);
    if (cfg_.use_embedding) {
        params_.push_back(he_uniform(cfg_.input_dim(k_), cfg_.embed_dim, rng));
        params_.push_back(Mat::Zero(1, cfg_.embed_dim));
        names_.push_back("embed.weight");
        names_.push_back("embed.bias");
    }
    const int feat = cfg_.feature_dim(k_);
    for (int s : cfg_.strides) {
        int in = feat;
        for (int l = 0; l < cfg_.layers; ++l) {
            params_.push_back(he_uniform(cfg_.kernel * in, cfg_.channels, rng));
            params_.push_back(Mat::Zero(1, cfg_.channels));
            const std::string prefix = "branch" + std::to_string(s) + ".conv" + std::to_string(l);
            names_.push_back(prefix + ".weight");
            names_.push_back(prefix + ".bias");
            in = cfg_.channels;
        }
    }
    const int fused = cfg_.channels * static_cast<int>(cfg_.strides.size());
    params_.push_back(Mat::Zero(fused, 3 * k_));
    params_.push_back(Mat::Zero(1, 3 * k_));
    names_.push_back("head.weight");
    names_.push_back("head.bias");

    root_mask_ = Mat::Ones(k_, 3);
    root_mask_.row(root_).setZero();
}

std::size_t TcnModel::branch_parameter_count(const TcnConfig& cfg, int num_keypoints)
{
    std::size_t n = 0;
    std::size_t in = cfg.feature_dim(num_keypoints);
    for (int l = 0; l < cfg.layers; ++l) {
        n += cfg.kernel * in * cfg.channels + cfg.channels;
        in = cfg.channels;
    }
    // Each branch also feeds `channels` rows of the fusion head.
    n += static_cast<std::size_t>(cfg.channels) * 3 * num_keypoints;
    return n;
}

std::size_t TcnModel::parameter_count(const TcnConfig& cfg, int num_keypoints)
{
    std::size_t n = 0;
    if (cfg.use_embedding) n += static_cast<std::size_t>(cfg.input_dim(num_keypoints) + 1) * cfg.embed_dim;
    n += cfg.strides.size() * branch_parameter_count(cfg, num_keypoints);
    n += 3 * num_keypoints;  // head bias
    return n;
}

std::size_t TcnModel::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

bool TcnModel::all_finite() const
{
    return std::all_of(params_.begin(), params_.end(), [](const Mat& p) { return p.allFinite(); });
}

Eigen::MatrixXd TcnModel::input_matrix(const PoseSequence2D& seq) const
{
    if (seq.num_keypoints != k_) throw InvalidInput("tcn: 2D sequence has the wrong keypoint count");
    const int per = cfg_.use_embedding ? 4 : 2;
    Mat out = Mat::Zero(seq.num_frames, per * k_);
    for (int t = 0; t < seq.num_frames; ++t) {
        for (int j = 0; j < k_; ++j) {
            const int i = seq.index(t, j);
            if (seq.mask[i]) {
                if (per == 4) out(t, per * j + 3) = 1.0;
                continue;
            }
            out(t, per * j) = 2.0 * (seq.coords(i, 0) - 0.5);
            out(t, per * j + 1) = 2.0 * (seq.coords(i, 1) - 0.5);
            if (per == 4) out(t, per * j + 2) = seq.confidence(i);
        }
    }
    return out;
}

TcnModel::Bound TcnModel::bind(ad::Tape& tape, bool requires_grad) const
{
    Bound b;
    b.p.reserve(params_.size());
    for (const auto& p : params_) b.p.push_back(tape.parameter(p, requires_grad));
    return b;
}

ad::Var TcnModel::embed(ad::Tape& tape, const Bound& b, ad::Var inputs) const
{
    if (tape.value(inputs).cols() != cfg_.input_dim(k_))
        throw InvalidInput("tcn: frame input has " + std::to_string(tape.value(inputs).cols()) + " values, expected " +
                           std::to_string(cfg_.input_dim(k_)));
    if (!cfg_.use_embedding) return inputs;
    return tape.relu(tape.add_row(tape.matmul(inputs, b.p[0]), b.p[1]));
}

Eigen::RowVectorXd TcnModel::embed_frame(const Eigen::RowVectorXd& frame_input) const
{
    ad::Tape tape;
    const Bound b = bind(tape, false);
    const ad::Var x = tape.constant(frame_input);
    return tape.value(embed(tape, b, x));
}

namespace {

// Shared body of the forward pass: `row_of(offset)` maps a frame offset from
// the prediction center to a row of `features`.
ad::Var run_branches(ad::Tape& tape, const TcnConfig& cfg, const std::vector<ad::Var>& p, int first_branch_param,
                     ad::Var features, const std::function<int(int)>& row_of, const Mat& root_mask, int k)
{
    const int h = cfg.half_span();
    std::vector<ad::Var> outs;
    outs.reserve(cfg.strides.size());
    int pi = first_branch_param;
    for (int s : cfg.strides) {
        std::vector<int> idx;
        idx.reserve(2 * h + 1);
        for (int j = -h; j <= h; ++j) idx.push_back(row_of(j * s));
        ad::Var x = tape.rows(features, idx);
        for (int l = 0; l < cfg.layers; ++l) {
            x = tape.relu(tape.add_row(tape.matmul(tape.unfold(x, cfg.kernel), p[pi]), p[pi + 1]));
            pi += 2;
        }
        outs.push_back(x);
    }
    ad::Var fused = outs.size() == 1 ? outs[0] : tape.hcat(outs);
    ad::Var y = tape.add_row(tape.matmul(fused, p[pi]), p[pi + 1]);
    y = tape.transpose(tape.reshape(y, 3, k));
    return tape.mul_const(tape.scale(y, cfg.output_scale_mm), root_mask);
}

}  // namespace

ad::Var TcnModel::forward_at(ad::Tape& tape, const Bound& b, ad::Var features, int center) const
{
    const int rows = static_cast<int>(tape.value(features).rows());
    const int reach = cfg_.half_span() * cfg_.strides.back();
    if (center - reach < 0 || center + reach >= rows) throw InvalidWindow("tcn: prediction center too close to edge");
    return run_branches(tape, cfg_, b.p, cfg_.use_embedding ? 2 : 0, features,
                        [center](int off) { return center + off; }, root_mask_, k_);
}

Pose3 TcnModel::forward(const Eigen::MatrixXd& embeddings) const
{
    if (embeddings.rows() != cfg_.window_len)
        throw InvalidWindow("tcn: window has " + std::to_string(embeddings.rows()) + " frames, expected " +
                            std::to_string(cfg_.window_len));
    if (embeddings.cols() != cfg_.feature_dim(k_)) throw InvalidInput("tcn: embedding width mismatch");
    ad::Tape tape;
    const Bound b = bind(tape, false);
    const ad::Var f = tape.parameter(embeddings, false);
    return tape.value(forward_at(tape, b, f, cfg_.center()));
}

std::vector<int> TcnModel::needed_offsets() const
{
    const int h = cfg_.half_span();
    std::vector<int> offs;
    for (int s : cfg_.strides)
        for (int j = -h; j <= h; ++j) offs.push_back(j * s);
    std::sort(offs.begin(), offs.end());
    offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
    return offs;
}

ad::Var TcnModel::predict_clip(ad::Tape& tape, const Bound& b, const Eigen::MatrixXd& clip_inputs, int count) const
{
    if (count < 1) throw InvalidInput("tcn: prediction count must be >= 1");
    if (clip_inputs.rows() != cfg_.window_len + count - 1)
        throw InvalidWindow("tcn: clip has " + std::to_string(clip_inputs.rows()) + " frames, expected " +
                            std::to_string(cfg_.window_len + count - 1));
    const int c = cfg_.center();
    // Embed only the rows some branch reads.
    std::vector<int> needed;
    for (int i = 0; i < count; ++i)
        for (int off : needed_offsets()) needed.push_back(c + i + off);
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    std::vector<int> row_map(clip_inputs.rows(), -1);
    Mat picked(needed.size(), clip_inputs.cols());
    for (std::size_t r = 0; r < needed.size(); ++r) {
        row_map[needed[r]] = static_cast<int>(r);
        picked.row(r) = clip_inputs.row(needed[r]);
    }
    const ad::Var features = embed(tape, b, tape.constant(std::move(picked)));

    std::vector<ad::Var> poses;
    for (int i = 0; i < count; ++i) {
        const int center = c + i;
        poses.push_back(run_branches(tape, cfg_, b.p, cfg_.use_embedding ? 2 : 0, features,
                                     [&, center](int off) { return row_map[center + off]; }, root_mask_, k_));
    }
    return count == 1 ? poses[0] : tape.vcat(poses);
}

PoseSequence3D TcnModel::infer_sequence(const PoseSequence2D& seq, Exec exec) const
{
    seq.validate();
    const int n = seq.num_frames;
    PoseSequence3D out = PoseSequence3D::zeros(n, k_);
    if (n == 0) return out;

    Mat features;
    {
        ad::Tape tape;
        const Bound b = bind(tape, false);
        features = tape.value(embed(tape, b, tape.constant(input_matrix(seq))));
    }
    const int first = cfg_.use_embedding ? 2 : 0;
    auto one = [&](int t) {
        ad::Tape tape;
        const Bound b = bind(tape, false);
        const ad::Var f = tape.parameter(features, false);
        const ad::Var pose = run_branches(
            tape, cfg_, b.p, first, f, [t, n](int off) { return std::clamp(t + off, 0, n - 1); }, root_mask_, k_);
        out.set_frame(t, tape.value(pose));
    };
    if (exec == Exec::serial) {
        for (int t = 0; t < n; ++t) one(t);
    } else {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < n; ++t) one(t);
    }
    return out;
}

}  // namespace mspose
