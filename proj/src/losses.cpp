#include "mspose/losses.hpp"

#include "mspose/errors.hpp"

namespace mspose {

void LossWeights::validate() const
{
    if (!(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0)) throw ConfigError("loss weights must be nonnegative");
}

namespace ad_loss {

ad::Var loss_3d(ad::Tape& tape, ad::Var pred, const Eigen::MatrixX3d& gt)
{
    const auto& p = tape.value(pred);
    if (p.rows() != gt.rows() || p.cols() != 3) throw InvalidInput("loss_3d: shape mismatch");
    const ad::Var diff = tape.add_const(pred, -Eigen::MatrixXd(gt));
    return tape.scale(tape.sum(tape.square(diff)), 1.0 / static_cast<double>(gt.rows()));
}

ad::Var loss_multiview(ad::Tape& tape, ad::Var pred_v1, ad::Var pred_v2, const Eigen::Matrix3d& r)
{
    const auto rows = tape.value(pred_v1).rows();
    if (tape.value(pred_v2).rows() != rows) throw InvalidInput("loss_multiview: shape mismatch");
    const ad::Var rotated = tape.matmul(pred_v1, tape.constant(r.transpose()));
    const ad::Var diff = tape.sub(rotated, pred_v2);
    return tape.scale(tape.sum(tape.square(diff)), 1.0 / static_cast<double>(rows));
}

ad::Var loss_2d(ad::Tape& tape, ad::Var pred, const Eigen::MatrixX2d& gt2d, const std::vector<std::uint8_t>& mask)
{
    const auto rows = tape.value(pred).rows();
    if (gt2d.rows() != rows || static_cast<Eigen::Index>(mask.size()) != rows)
        throw InvalidInput("loss_2d: shape mismatch");
    Eigen::MatrixXd keep(rows, 2);
    double count = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double k = mask[i] ? 0.0 : 1.0;
        keep.row(i).setConstant(k);
        count += k;
    }
    const ad::Var proj = tape.middle_cols(pred, 0, 2);
    const ad::Var diff = tape.mul_const(tape.add_const(proj, -Eigen::MatrixXd(gt2d)), keep);
    return tape.scale(tape.sum(tape.square(diff)), count > 0.0 ? 1.0 / count : 0.0);
}

ad::Var total_loss(ad::Tape& tape, ad::Var l3d, ad::Var lmv, ad::Var l2d, ad::Var lgen, const LossWeights& w)
{
    w.validate();
    ad::Var out = tape.add(l3d, tape.scale(lmv, w.w1));
    out = tape.add(out, tape.scale(l2d, w.w2));
    return tape.add(out, tape.scale(lgen, w.w3));
}

}  // namespace ad_loss

double loss_3d(const PoseSequence3D& pred, const PoseSequence3D& gt)
{
    ad::Tape tape;
    return tape.scalar(ad_loss::loss_3d(tape, tape.constant(pred.coords), gt.coords));
}

double loss_multiview(const PoseSequence3D& pred_v1, const PoseSequence3D& pred_v2, const Eigen::Matrix3d& r)
{
    ad::Tape tape;
    return tape.scalar(
        ad_loss::loss_multiview(tape, tape.constant(pred_v1.coords), tape.constant(pred_v2.coords), r));
}

double loss_2d(const PoseSequence3D& pred, const PoseSequence2D& gt2d)
{
    ad::Tape tape;
    return tape.scalar(ad_loss::loss_2d(tape, tape.constant(pred.coords), gt2d.coords, gt2d.mask));
}

double total_loss(const LossComponents& c, const LossWeights& w)
{
    w.validate();
    return c.l3d + w.w1 * c.lmv + w.w2 * c.l2d + w.w3 * c.lgen;
}

}  // namespace mspose
