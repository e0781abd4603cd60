#pragma once

#include "mspose/autodiff.hpp"
#include "mspose/exec.hpp"
#include "mspose/pose.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mspose {

struct TcnConfig {
    int embed_dim = 512;
    int window_len = 64;
    std::vector<int> strides{1, 2, 3, 5, 7};
    int channels = 256;
    int kernel = 3;
    int layers = 3;
    // false: the branches read raw centered 2D coordinates instead of f_E.
    bool use_embedding = true;
    int tkcs_interval = 1;
    double output_scale_mm = 1000.0;

    // Throws ConfigError.
    void validate() const;
    int center() const { return window_len / 2; }
    // Frames one branch reads on each side of the center: layers * (kernel - 1) / 2 strides.
    int half_span() const { return layers * (kernel - 1) / 2; }
    int input_dim(int num_keypoints) const { return use_embedding ? 4 * num_keypoints : 2 * num_keypoints; }
    int feature_dim(int num_keypoints) const { return use_embedding ? embed_dim : input_dim(num_keypoints); }
};

// Keypoint-embedding network f_E followed by one temporal convolution branch
// per stride and a linear fusion head. Outputs root-relative K x 3 poses (mm).
class TcnModel {
public:
    TcnModel() = default;
    TcnModel(const TcnConfig& cfg, int num_keypoints, int root, std::uint64_t seed);

    const TcnConfig& config() const { return cfg_; }
    int num_keypoints() const { return k_; }
    int root() const { return root_; }

    std::vector<Eigen::MatrixXd>& params() { return params_; }
    const std::vector<Eigen::MatrixXd>& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }
    std::size_t parameter_count() const;
    static std::size_t parameter_count(const TcnConfig& cfg, int num_keypoints);
    static std::size_t branch_parameter_count(const TcnConfig& cfg, int num_keypoints);
    bool all_finite() const;

    // Per-frame network input: 4K values (2(x - 0.5), 2(y - 0.5), conf, mask)
    // per keypoint, or 2K centered coordinates without the embedding. Masked
    // keypoints read as zero coordinates and confidence.
    Eigen::MatrixXd input_matrix(const PoseSequence2D& seq) const;

    // Plain evaluation of f_E on one input row. Throws InvalidInput on a
    // dimension mismatch.
    Eigen::RowVectorXd embed_frame(const Eigen::RowVectorXd& frame_input) const;
    // window_len x feature_dim embeddings -> center-frame pose. Throws
    // InvalidWindow when the row count is not window_len.
    Pose3 forward(const Eigen::MatrixXd& embeddings) const;

    struct Bound {
        std::vector<ad::Var> p;
    };
    Bound bind(ad::Tape& tape, bool requires_grad) const;
    // n x input_dim -> n x feature_dim.
    ad::Var embed(ad::Tape& tape, const Bound& b, ad::Var inputs) const;
    // Pose (K x 3) for frame `center` of a feature matrix.
    ad::Var forward_at(ad::Tape& tape, const Bound& b, ad::Var features, int center) const;
    // Clip of window_len + count - 1 input rows -> poses of `count`
    // consecutive frames starting at the window center, stacked (count*K) x 3.
    ad::Var predict_clip(ad::Tape& tape, const Bound& b, const Eigen::MatrixXd& clip_inputs, int count) const;

    // Sliding window over the whole sequence; edge frames are replicated.
    PoseSequence3D infer_sequence(const PoseSequence2D& seq, Exec exec = Exec::parallel) const;

private:
    // Frame offsets (relative to the center) read by the branches.
    std::vector<int> needed_offsets() const;

    TcnConfig cfg_;
    int k_ = 0;
    int root_ = 0;
    std::vector<Eigen::MatrixXd> params_;
    std::vector<std::string> names_;
    Eigen::MatrixXd root_mask_;  // K x 3, zero on the root row
};

}  // namespace mspose
