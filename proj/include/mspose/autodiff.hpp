#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

// Matrix-valued reverse-mode differentiation. A Tape records every operation
// in creation order, which is already a topological order, so backward() is
// a single reverse sweep.
namespace mspose::ad {

using Mat = Eigen::MatrixXd;

struct Var {
    int id = -1;
};

class Tape {
public:
    Tape() { nodes_.reserve(256); }

    Var constant(Mat value);
    // Leaf whose gradient is wanted.
    Var variable(Mat value);
    // Leaf that reads external storage without copying. The storage must
    // outlive the tape. With requires_grad = false it acts as a constant.
    Var parameter(const Mat& value, bool requires_grad = true);

    const Mat& value(Var v) const;
    double scalar(Var v) const { return value(v)(0, 0); }
    // Gradient of the last backward() output w.r.t. v (zeros if unreached).
    Mat grad(Var v) const;
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // `out` must be 1 x 1.
    void backward(Var out);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double s);
    Var add_const(Var a, const Mat& c);
    Var mul_const(Var a, const Mat& c);  // elementwise
    Var matmul(Var a, Var b);
    Var matmul_const(const Mat& a, Var b);  // a * b with a constant
    Var add_row(Var x, Var row);  // adds a 1 x n row to every row of x

    Var relu(Var a);
    Var leaky_relu(Var a, double slope);
    Var sigmoid(Var a);
    Var softplus(Var a);  // log(1 + exp(a)), overflow-safe
    Var log(Var a);
    Var square(Var a);
    // Clamps to [lo, hi]; gradient zero outside.
    Var clamp(Var a, double lo, double hi);

    Var sum(Var a);
    Var mean(Var a);
    Var mean_rows(Var a);  // 1 x n column means

    Var rows(Var a, const std::vector<int>& idx);
    Var middle_rows(Var a, int start, int count);
    Var middle_cols(Var a, int start, int count);
    Var hcat(const std::vector<Var>& parts);
    Var vcat(const std::vector<Var>& parts);
    // Column-major flat gather into a 1 x idx.size() row.
    Var gather(Var a, const std::vector<int>& flat_idx);
    // (L x C) -> ((L - k + 1) x kC); row i = [x_i, x_{i+1}, ..., x_{i+k-1}].
    Var unfold(Var a, int kernel);
    Var transpose(Var a);
    // Column-major reshape.
    Var reshape(Var a, int rows, int cols);

private:
    struct Node {
        Mat value;
        const Mat* external = nullptr;
        Mat grad;
        bool needs_grad = false;
        std::function<void(Tape&, const Mat&)> backward;
    };

    const Mat& val(int id) const { return nodes_[id].external ? *nodes_[id].external : nodes_[id].value; }
    Var push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> backward);
    template <typename Expr>
    void accumulate(int id, const Expr& g);

    std::vector<Node> nodes_;
};

}  // namespace mspose::ad
