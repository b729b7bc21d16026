#pragma once
// Minimal tape-based reverse-mode automatic differentiation over Mat.
//
// A Tape owns every node created during one forward pass. Parameters live
// outside the tape; binding one with Tape::param() creates a leaf whose
// gradient is added into Param::grad by Tape::backward(). A tape built with
// record=false keeps values only, for inference.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glu/tensor.hpp"

namespace glu {

struct Param {
    std::string name;
    Mat value;
    Mat grad;
    bool frozen = false;  // bound as a constant: no gradient is recorded

    Param() = default;
    Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
    void zero_grad() { grad = Mat(value.rows(), value.cols()); }
};

namespace ad {

class Tape;

struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Param* param = nullptr;
    std::function<void()> backward;

    Mat& g() {
        if (grad.empty() && !value.empty()) grad = Mat(value.rows(), value.cols());
        return grad;
    }
};

class Var {
public:
    Var() = default;
    Var(Tape* t, Node* n) : tape_(t), node_(n) {}

    const Mat& value() const { return node_->value; }
    Mat& grad() const { return node_->g(); }
    bool requires_grad() const { return node_->requires_grad; }
    std::size_t rows() const { return node_->value.rows(); }
    std::size_t cols() const { return node_->value.cols(); }
    double item() const { return node_->value[0]; }
    Tape* tape() const { return tape_; }
    Node* node() const { return node_; }
    bool valid() const { return node_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    Node* node_ = nullptr;
};

class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return record_; }
    std::size_t size() const { return nodes_.size(); }

    Var constant(Mat m);
    Var param(Param& p);

    // Creates an op node. `backward` is dropped unless recording and at least
    // one input requires a gradient (the caller passes that as `needs_grad`).
    Var make(Mat value, bool needs_grad, std::function<void()> backward);

    // Seeds d(root)/d(root) = 1 for a 1x1 root and accumulates parameter grads.
    void backward(Var root);

private:
    bool record_;
    std::deque<Node> nodes_;
};

// -- elementwise and linear algebra ------------------------------------------
Var matmul(Var a, Var b);             // a[m,k] b[k,n]
Var matmul_nt(Var a, Var b);          // a[m,k] b[n,k]^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                // Hadamard
Var scale(Var a, double s);
Var add_rowvec(Var a, Var row);       // a[m,n] + row[1,n]
Var mul_colvec(Var a, Var col);       // a[m,n] * col[m,1]
Var linear(Var x, Var w, Var b);      // x w + b
Var gelu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);
Var layer_norm(Var x, Var gain, Var bias, double eps);

// Row softmax; entries with mask[i*n + j] == 0 are excluded (weight 0).
Var softmax_rows(Var a, const std::vector<std::uint8_t>* mask = nullptr);

// -- shape ---------------------------------------------------------------------
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t r0, std::size_t r1);
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
Var gather_rows(Var a, std::span<const std::size_t> idx);
Var broadcast_rows(Var row, std::size_t m);
Var mean_rows(Var a);                 // [1,n]
Var max_rows(Var a);                  // [1,n], gradient to the arg-max row

// -- reductions ----------------------------------------------------------------
Var sum(Var a);
Var mean(Var a);
Var mse(Var pred, Var target);        // mean squared difference
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

// [cos(2 pi x B^T), sin(2 pi x B^T)] for constant coordinates x[N,d] and a
// frequency matrix B[n_freq,d]; differentiable in B.
Var fourier_features(const Mat& x, Var freq);

}  // namespace ad
}  // namespace glu
