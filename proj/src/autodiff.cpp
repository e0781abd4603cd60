#include "mspose/autodiff.hpp"

#include "mspose/errors.hpp"

#include <cmath>

namespace mspose::ad {

template <typename Expr>
void Tape::accumulate(int id, const Expr& g)
{
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
        n.grad = g;
    else
        n.grad += g;
}

Var Tape::push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> backward)
{
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Mat value) { return push(std::move(value), true, nullptr); }

Var Tape::parameter(const Mat& value, bool requires_grad)
{
    Node n;
    n.external = &value;
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const { return val(v.id); }

Mat Tape::grad(Var v) const
{
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Mat::Zero(val(v.id).rows(), val(v.id).cols());
    return n.grad;
}

void Tape::backward(Var out)
{
    if (val(out.id).rows() != 1 || val(out.id).cols() != 1) throw InvalidInput("backward needs a scalar output");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[out.id].needs_grad) return;
    nodes_[out.id].grad = Mat::Ones(1, 1);
    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.backward || n.grad.size() == 0) continue;
        // Copy: the closure may grow other nodes' grads, never this one's.
        const Mat g = n.grad;
        n.backward(*this, g);
    }
}

Var Tape::add(Var a, Var b)
{
    const int ia = a.id, ib = b.id;
    return push(val(ia) + val(ib), needs_grad(a) || needs_grad(b), [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var Tape::sub(Var a, Var b)
{
    const int ia = a.id, ib = b.id;
    return push(val(ia) - val(ib), needs_grad(a) || needs_grad(b), [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
    });
}

Var Tape::mul(Var a, Var b)
{
    const int ia = a.id, ib = b.id;
    return push(val(ia).cwiseProduct(val(ib)), needs_grad(a) || needs_grad(b), [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g.cwiseProduct(t.val(ib)));
        t.accumulate(ib, g.cwiseProduct(t.val(ia)));
    });
}

Var Tape::scale(Var a, double s)
{
    const int ia = a.id;
    return push(val(ia) * s, needs_grad(a), [ia, s](Tape& t, const Mat& g) { t.accumulate(ia, g * s); });
}

Var Tape::add_const(Var a, const Mat& c)
{
    const int ia = a.id;
    return push(val(ia) + c, needs_grad(a), [ia](Tape& t, const Mat& g) { t.accumulate(ia, g); });
}

Var Tape::mul_const(Var a, const Mat& c)
{
    const int ia = a.id;
    return push(val(ia).cwiseProduct(c), needs_grad(a),
                [ia, c](Tape& t, const Mat& g) { t.accumulate(ia, g.cwiseProduct(c)); });
}

Var Tape::matmul(Var a, Var b)
{
    const int ia = a.id, ib = b.id;
    return push(val(ia) * val(ib), needs_grad(a) || needs_grad(b), [ia, ib](Tape& t, const Mat& g) {
        if (t.nodes_[ia].needs_grad) t.accumulate(ia, g * t.val(ib).transpose());
        if (t.nodes_[ib].needs_grad) t.accumulate(ib, t.val(ia).transpose() * g);
    });
}

Var Tape::matmul_const(const Mat& a, Var b)
{
    const int ib = b.id;
    return push(a * val(ib), needs_grad(b),
                [ib, a](Tape& t, const Mat& g) { t.accumulate(ib, a.transpose() * g); });
}

Var Tape::add_row(Var x, Var row)
{
    const int ix = x.id, ir = row.id;
    if (val(ir).rows() != 1 || val(ir).cols() != val(ix).cols()) throw InvalidInput("add_row: shape mismatch");
    Mat out = val(ix);
    out.rowwise() += val(ir).row(0);
    return push(std::move(out), needs_grad(x) || needs_grad(row), [ix, ir](Tape& t, const Mat& g) {
        t.accumulate(ix, g);
        if (t.nodes_[ir].needs_grad) t.accumulate(ir, g.colwise().sum());
    });
}

Var Tape::relu(Var a)
{
    const int ia = a.id;
    return push(val(ia).cwiseMax(0.0), needs_grad(a), [ia](Tape& t, const Mat& g) {
        t.accumulate(ia, g.cwiseProduct((t.val(ia).array() > 0.0).cast<double>().matrix()));
    });
}

Var Tape::leaky_relu(Var a, double slope)
{
    const int ia = a.id;
    Mat out = val(ia).unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    return push(std::move(out), needs_grad(a), [ia, slope](Tape& t, const Mat& g) {
        t.accumulate(ia, g.cwiseProduct(t.val(ia).unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; })));
    });
}

Var Tape::sigmoid(Var a)
{
    const int ia = a.id;
    Mat out = val(ia).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    const int self = size();
    return push(std::move(out), needs_grad(a), [ia, self](Tape& t, const Mat& g) {
        const Mat& s = t.val(self);
        t.accumulate(ia, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
    });
}

Var Tape::softplus(Var a)
{
    const int ia = a.id;
    Mat out = val(ia).unaryExpr([](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
    return push(std::move(out), needs_grad(a), [ia](Tape& t, const Mat& g) {
        t.accumulate(ia, g.cwiseProduct(t.val(ia).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); })));
    });
}

Var Tape::log(Var a)
{
    const int ia = a.id;
    return push(val(ia).array().log().matrix(), needs_grad(a),
                [ia](Tape& t, const Mat& g) { t.accumulate(ia, g.cwiseQuotient(t.val(ia))); });
}

Var Tape::square(Var a)
{
    const int ia = a.id;
    return push(val(ia).cwiseAbs2(), needs_grad(a),
                [ia](Tape& t, const Mat& g) { t.accumulate(ia, 2.0 * g.cwiseProduct(t.val(ia))); });
}

Var Tape::clamp(Var a, double lo, double hi)
{
    const int ia = a.id;
    return push(val(ia).cwiseMax(lo).cwiseMin(hi), needs_grad(a), [ia, lo, hi](Tape& t, const Mat& g) {
        const Mat inside = t.val(ia).unaryExpr([lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
        t.accumulate(ia, g.cwiseProduct(inside));
    });
}

Var Tape::sum(Var a)
{
    const int ia = a.id;
    Mat out(1, 1);
    out(0, 0) = val(ia).sum();
    return push(std::move(out), needs_grad(a), [ia](Tape& t, const Mat& g) {
        t.accumulate(ia, Mat::Constant(t.val(ia).rows(), t.val(ia).cols(), g(0, 0)));
    });
}

Var Tape::mean(Var a)
{
    const auto n = static_cast<double>(val(a.id).size());
    return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var Tape::mean_rows(Var a)
{
    const int ia = a.id;
    const auto n = static_cast<double>(val(ia).rows());
    return push(val(ia).colwise().mean(), needs_grad(a), [ia, n](Tape& t, const Mat& g) {
        t.accumulate(ia, g.replicate(t.val(ia).rows(), 1) / n);
    });
}

Var Tape::rows(Var a, const std::vector<int>& idx)
{
    const int ia = a.id;
    const Mat& v = val(ia);
    Mat out(static_cast<Eigen::Index>(idx.size()), v.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = v.row(idx[i]);
    return push(std::move(out), needs_grad(a), [ia, idx](Tape& t, const Mat& g) {
        Mat full = Mat::Zero(t.val(ia).rows(), t.val(ia).cols());
        for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        t.accumulate(ia, full);
    });
}

Var Tape::middle_rows(Var a, int start, int count)
{
    const int ia = a.id;
    return push(val(ia).middleRows(start, count), needs_grad(a), [ia, start, count](Tape& t, const Mat& g) {
        Node& n = t.nodes_[ia];
        if (n.grad.size() == 0) n.grad = Mat::Zero(t.val(ia).rows(), t.val(ia).cols());
        n.grad.middleRows(start, count) += g;
    });
}

Var Tape::middle_cols(Var a, int start, int count)
{
    const int ia = a.id;
    return push(val(ia).middleCols(start, count), needs_grad(a), [ia, start, count](Tape& t, const Mat& g) {
        Node& n = t.nodes_[ia];
        if (n.grad.size() == 0) n.grad = Mat::Zero(t.val(ia).rows(), t.val(ia).cols());
        n.grad.middleCols(start, count) += g;
    });
}

Var Tape::hcat(const std::vector<Var>& parts)
{
    Eigen::Index cols = 0;
    const Eigen::Index r = val(parts.front().id).rows();
    bool ng = false;
    for (Var p : parts) {
        if (val(p.id).rows() != r) throw InvalidInput("hcat: row counts differ");
        cols += val(p.id).cols();
        ng = ng || needs_grad(p);
    }
    Mat out(r, cols);
    std::vector<int> ids;
    Eigen::Index c = 0;
    for (Var p : parts) {
        out.middleCols(c, val(p.id).cols()) = val(p.id);
        c += val(p.id).cols();
        ids.push_back(p.id);
    }
    return push(std::move(out), ng, [ids](Tape& t, const Mat& g) {
        Eigen::Index c0 = 0;
        for (int id : ids) {
            const auto w = t.val(id).cols();
            if (t.nodes_[id].needs_grad) t.accumulate(id, g.middleCols(c0, w));
            c0 += w;
        }
    });
}

Var Tape::vcat(const std::vector<Var>& parts)
{
    Eigen::Index rows_total = 0;
    const Eigen::Index c = val(parts.front().id).cols();
    bool ng = false;
    for (Var p : parts) {
        if (val(p.id).cols() != c) throw InvalidInput("vcat: column counts differ");
        rows_total += val(p.id).rows();
        ng = ng || needs_grad(p);
    }
    Mat out(rows_total, c);
    std::vector<int> ids;
    Eigen::Index r = 0;
    for (Var p : parts) {
        out.middleRows(r, val(p.id).rows()) = val(p.id);
        r += val(p.id).rows();
        ids.push_back(p.id);
    }
    return push(std::move(out), ng, [ids](Tape& t, const Mat& g) {
        Eigen::Index r0 = 0;
        for (int id : ids) {
            const auto h = t.val(id).rows();
            if (t.nodes_[id].needs_grad) t.accumulate(id, g.middleRows(r0, h));
            r0 += h;
        }
    });
}

Var Tape::gather(Var a, const std::vector<int>& flat_idx)
{
    const int ia = a.id;
    const Mat& v = val(ia);
    Mat out(1, static_cast<Eigen::Index>(flat_idx.size()));
    for (std::size_t i = 0; i < flat_idx.size(); ++i) out(0, static_cast<Eigen::Index>(i)) = v.data()[flat_idx[i]];
    return push(std::move(out), needs_grad(a), [ia, flat_idx](Tape& t, const Mat& g) {
        Node& n = t.nodes_[ia];
        if (n.grad.size() == 0) n.grad = Mat::Zero(t.val(ia).rows(), t.val(ia).cols());
        for (std::size_t i = 0; i < flat_idx.size(); ++i) n.grad.data()[flat_idx[i]] += g(0, static_cast<Eigen::Index>(i));
    });
}

Var Tape::unfold(Var a, int kernel)
{
    const int ia = a.id;
    const Mat& v = val(ia);
    const Eigen::Index len = v.rows() - kernel + 1;
    if (len <= 0) throw InvalidInput("unfold: sequence shorter than kernel");
    const Eigen::Index c = v.cols();
    Mat out(len, kernel * c);
    for (int j = 0; j < kernel; ++j) out.middleCols(j * c, c) = v.middleRows(j, len);
    return push(std::move(out), needs_grad(a), [ia, kernel, len, c](Tape& t, const Mat& g) {
        Node& n = t.nodes_[ia];
        if (n.grad.size() == 0) n.grad = Mat::Zero(t.val(ia).rows(), c);
        for (int j = 0; j < kernel; ++j) n.grad.middleRows(j, len) += g.middleCols(j * c, c);
    });
}

Var Tape::transpose(Var a)
{
    const int ia = a.id;
    return push(val(ia).transpose(), needs_grad(a),
                [ia](Tape& t, const Mat& g) { t.accumulate(ia, g.transpose()); });
}

Var Tape::reshape(Var a, int rows, int cols)
{
    const int ia = a.id;
    const Mat& v = val(ia);
    if (static_cast<Eigen::Index>(rows) * cols != v.size()) throw InvalidInput("reshape: size mismatch");
    Mat out = Eigen::Map<const Mat>(v.data(), rows, cols);
    return push(std::move(out), needs_grad(a), [ia](Tape& t, const Mat& g) {
        t.accumulate(ia, Eigen::Map<const Mat>(g.data(), t.val(ia).rows(), t.val(ia).cols()));
    });
}

}  // namespace mspose::ad
