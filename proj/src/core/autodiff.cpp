#include "glu/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "glu/kernels.hpp"

namespace glu::ad {

Var Tape::constant(Mat m) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(m);
    return {this, &n};
}

Var Tape::param(Param& p) {
    Node& n = nodes_.emplace_back();
    n.value = p.value;
    n.requires_grad = record_ && !p.frozen;
    n.param = &p;
    return {this, &n};
}

Var Tape::make(Mat value, bool needs_grad, std::function<void()> backward) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = record_ && needs_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    return {this, &n};
}

void Tape::backward(Var root) {
    if (!record_) throw std::logic_error("backward() on a non-recording tape");
    if (root.value().size() != 1) throw std::invalid_argument("backward() needs a scalar root");
    if (!root.requires_grad()) return;
    root.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->requires_grad && it->backward && !it->grad.empty()) it->backward();
    }
    for (auto& n : nodes_) {
        if (n.param && !n.grad.empty()) {
            Mat& pg = n.param->grad;
            if (!pg.same_shape(n.value)) pg = Mat(n.value.rows(), n.value.cols());
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
        }
    }
}

namespace {

Tape& tape_of(Var a) { return *a.tape(); }

void check_same(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                                    b.value().shape_str());
}

}  // namespace

Var matmul(Var a, Var b) {
    const Mat& A = a.value();
    const Mat& B = b.value();
    if (A.cols() != B.rows())
        throw std::invalid_argument("matmul: " + A.shape_str() + " x " + B.shape_str());
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Mat out(m, n);
    kernels::active().gemm_nn(m, n, k, A.data(), B.data(), out.data());
    Node* na = a.node();
    Node* nb = b.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr, m, n, k]() {
            const auto& kt = kernels::active();
            if (na->requires_grad) kt.gemm_nt(m, k, n, nr->grad.data(), nb->value.data(), na->g().data());
            if (nb->requires_grad) kt.gemm_tn(k, n, m, na->value.data(), nr->grad.data(), nb->g().data());
        };
    }
    return r;
}

Var matmul_nt(Var a, Var b) {
    const Mat& A = a.value();
    const Mat& B = b.value();
    if (A.cols() != B.cols())
        throw std::invalid_argument("matmul_nt: " + A.shape_str() + " x " + B.shape_str() + "^T");
    const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Mat out(m, n);
    kernels::active().gemm_nt(m, n, k, A.data(), B.data(), out.data());
    Node* na = a.node();
    Node* nb = b.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr, m, n, k]() {
            const auto& kt = kernels::active();
            // dA = dC B, dB = dC^T A
            if (na->requires_grad) kt.gemm_nn(m, k, n, nr->grad.data(), nb->value.data(), na->g().data());
            if (nb->requires_grad) kt.gemm_tn(n, k, m, nr->grad.data(), na->value.data(), nb->g().data());
        };
    }
    return r;
}

Var add(Var a, Var b) {
    check_same(a, b, "add");
    Mat out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    Node* na = a.node();
    Node* nb = b.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr]() {
            if (na->requires_grad) kernels::active().axpy(1.0, nr->grad.data(), na->g().data(), nr->grad.size());
            if (nb->requires_grad) kernels::active().axpy(1.0, nr->grad.data(), nb->g().data(), nr->grad.size());
        };
    }
    return r;
}

Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Mat out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    Node* na = a.node();
    Node* nb = b.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr]() {
            if (na->requires_grad) kernels::active().axpy(1.0, nr->grad.data(), na->g().data(), nr->grad.size());
            if (nb->requires_grad) kernels::active().axpy(-1.0, nr->grad.data(), nb->g().data(), nr->grad.size());
        };
    }
    return r;
}

Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Mat out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    Node* na = a.node();
    Node* nb = b.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr]() {
            const Mat& g = nr->grad;
            if (na->requires_grad) {
                Mat& ga = na->g();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * nb->value[i];
            }
            if (nb->requires_grad) {
                Mat& gb = nb->g();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * na->value[i];
            }
        };
    }
    return r;
}

Var scale(Var a, double s) {
    Mat out = a.value();
    for (auto& v : out.vec()) v *= s;
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, s]() { kernels::active().axpy(s, nr->grad.data(), na->g().data(), nr->grad.size()); };
    }
    return r;
}

Var add_rowvec(Var a, Var row) {
    const Mat& A = a.value();
    require_shape(row.value(), 1, A.cols(), "add_rowvec");
    Mat out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += row.value()[j];
    Node* na = a.node();
    Node* nb = row.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || row.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nb, nr]() {
            const Mat& g = nr->grad;
            if (na->requires_grad) kernels::active().axpy(1.0, g.data(), na->g().data(), g.size());
            if (nb->requires_grad) {
                Mat& gb = nb->g();
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
            }
        };
    }
    return r;
}

Var mul_colvec(Var a, Var col) {
    const Mat& A = a.value();
    require_shape(col.value(), A.rows(), 1, "mul_colvec");
    Mat out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) *= col.value()[i];
    Node* na = a.node();
    Node* nc = col.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || col.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nc, nr]() {
            const Mat& g = nr->grad;
            const std::size_t m = g.rows(), n = g.cols();
            if (na->requires_grad) {
                Mat& ga = na->g();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga(i, j) += g(i, j) * nc->value[i];
            }
            if (nc->requires_grad) {
                Mat& gc = nc->g();
                for (std::size_t i = 0; i < m; ++i)
                    gc[i] += kernels::active().dot(g.row(i).data(), na->value.row(i).data(), n);
            }
        };
    }
    return r;
}

Var linear(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

namespace {

template <class F, class DF>
Var unary(Var a, F f, DF df) {
    Mat out = a.value();
    for (auto& v : out.vec()) v = f(v);
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, df]() {
            Mat& ga = na->g();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += nr->grad[i] * df(na->value[i], nr->value[i]);
        };
    }
    return r;
}

}  // namespace

Var gelu(Var a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return unary(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [](double x, double) { return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x); });
}

Var tanh(Var a) {
    return unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
    return unary(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a) {
    return unary(
        a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
    return unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Mat& X = x.value();
    const std::size_t m = X.rows(), n = X.cols();
    require_shape(gain.value(), 1, n, "layer_norm gain");
    require_shape(bias.value(), 1, n, "layer_norm bias");
    Mat xhat(m, n);
    std::vector<double> inv_std(m);
    Mat out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += X(i, j);
        mu /= double(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (X(i, j) - mu) * (X(i, j) - mu);
        var /= double(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat(i, j) = (X(i, j) - mu) * inv_std[i];
            out(i, j) = xhat(i, j) * gain.value()[j] + bias.value()[j];
        }
    }
    Node* nx = x.node();
    Node* ng = gain.node();
    Node* nb = bias.node();
    const bool needs = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
    Var r = tape_of(x).make(std::move(out), needs, nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [nx, ng, nb, nr, xhat = std::move(xhat), inv_std = std::move(inv_std), m, n]() {
            const Mat& g = nr->grad;
            if (ng->requires_grad) {
                Mat& gg = ng->g();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gg[j] += g(i, j) * xhat(i, j);
            }
            if (nb->requires_grad) {
                Mat& gb = nb->g();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
            }
            if (nx->requires_grad) {
                Mat& gx = nx->g();
                std::vector<double> dxhat(n);
                for (std::size_t i = 0; i < m; ++i) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        dxhat[j] = g(i, j) * ng->value[j];
                        s1 += dxhat[j];
                        s2 += dxhat[j] * xhat(i, j);
                    }
                    const double k = inv_std[i] / double(n);
                    for (std::size_t j = 0; j < n; ++j)
                        gx(i, j) += k * (double(n) * dxhat[j] - s1 - xhat(i, j) * s2);
                }
            }
        };
    }
    return r;
}

Var softmax_rows(Var a, const std::vector<std::uint8_t>* mask) {
    const Mat& A = a.value();
    const std::size_t m = A.rows(), n = A.cols();
    if (mask && mask->size() != m * n) throw std::invalid_argument("softmax_rows: mask size mismatch");
    Mat out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j)
            if (!mask || (*mask)[i * n + j]) mx = std::max(mx, A(i, j));
        if (mx == -INFINITY) throw std::invalid_argument("softmax_rows: fully masked row");
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double e = (!mask || (*mask)[i * n + j]) ? std::exp(A(i, j) - mx) : 0.0;
            out(i, j) = e;
            s += e;
        }
        const double inv = 1.0 / s;
        for (std::size_t j = 0; j < n; ++j) out(i, j) *= inv;
    }
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, m, n]() {
            const Mat& y = nr->value;
            const Mat& g = nr->grad;
            Mat& ga = na->g();
            for (std::size_t i = 0; i < m; ++i) {
                const double s = kernels::active().dot(y.row(i).data(), g.row(i).data(), n);
                for (std::size_t j = 0; j < n; ++j) ga(i, j) += y(i, j) * (g(i, j) - s);
            }
        };
    }
    return r;
}

Var concat_cols(Var a, Var b) {
    const Mat& A = a.value();
    const Mat& B = b.value();
    if (A.rows() != B.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    const std::size_t m = A.rows(), na_ = A.cols(), nb_ = B.cols();
    Mat out(m, na_ + nb_);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(A.row(i).begin(), A.row(i).end(), out.row(i).begin());
        std::copy(B.row(i).begin(), B.row(i).end(), out.row(i).begin() + na_);
    }
    Node* pa = a.node();
    Node* pb = b.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad() || b.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [pa, pb, nr, m, na_, nb_]() {
            const Mat& g = nr->grad;
            if (pa->requires_grad) {
                Mat& ga = pa->g();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < na_; ++j) ga(i, j) += g(i, j);
            }
            if (pb->requires_grad) {
                Mat& gb = pb->g();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < nb_; ++j) gb(i, j) += g(i, na_ + j);
            }
        };
    }
    return r;
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    bool needs = false;
    for (const Var& p : parts) {
        if (p.cols() != n) throw std::invalid_argument("concat_rows: column mismatch");
        m += p.rows();
        needs = needs || p.requires_grad();
    }
    Mat out(m, n);
    std::vector<Node*> nodes;
    std::size_t off = 0;
    for (const Var& p : parts) {
        std::copy(p.value().vec().begin(), p.value().vec().end(), out.vec().begin() + off * n);
        off += p.rows();
        nodes.push_back(p.node());
    }
    Var r = tape_of(parts[0]).make(std::move(out), needs, nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [nodes = std::move(nodes), nr]() {
            std::size_t off = 0;
            for (Node* p : nodes) {
                const std::size_t sz = p->value.size();
                if (p->requires_grad) kernels::active().axpy(1.0, nr->grad.data() + off, p->g().data(), sz);
                off += sz;
            }
        };
    }
    return r;
}

Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Mat& A = a.value();
    if (r0 > r1 || r1 > A.rows()) throw std::out_of_range("slice_rows: bad range");
    const std::size_t n = A.cols();
    Mat out(r1 - r0, n, std::vector<double>(A.vec().begin() + r0 * n, A.vec().begin() + r1 * n));
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, r0, n]() {
            kernels::active().axpy(1.0, nr->grad.data(), na->g().data() + r0 * n, nr->grad.size());
        };
    }
    return r;
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Mat& A = a.value();
    if (c0 > c1 || c1 > A.cols()) throw std::out_of_range("slice_cols: bad range");
    const std::size_t m = A.rows(), w = c1 - c0;
    Mat out(m, w);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out(i, j) = A(i, c0 + j);
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, c0, m, w]() {
            Mat& ga = na->g();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) ga(i, c0 + j) += nr->grad(i, j);
        };
    }
    return r;
}

Var gather_rows(Var a, std::span<const std::size_t> idx) {
    const Mat& A = a.value();
    const std::size_t n = A.cols();
    Mat out(idx.size(), n);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= A.rows()) throw std::out_of_range("gather_rows: index out of range");
        std::copy(A.row(idx[i]).begin(), A.row(idx[i]).end(), out.row(i).begin());
    }
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, idx = std::vector<std::size_t>(idx.begin(), idx.end()), n]() {
            Mat& ga = na->g();
            for (std::size_t i = 0; i < idx.size(); ++i)
                kernels::active().axpy(1.0, nr->grad.row(i).data(), ga.row(idx[i]).data(), n);
        };
    }
    return r;
}

Var broadcast_rows(Var row, std::size_t m) {
    const Mat& R = row.value();
    if (R.rows() != 1) throw std::invalid_argument("broadcast_rows: expected a row vector");
    const std::size_t n = R.cols();
    Mat out(m, n);
    for (std::size_t i = 0; i < m; ++i) std::copy(R.vec().begin(), R.vec().end(), out.row(i).begin());
    Node* na = row.node();
    Var r = tape_of(row).make(std::move(out), row.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, m, n]() {
            Mat& ga = na->g();
            for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(1.0, nr->grad.row(i).data(), ga.data(), n);
        };
    }
    return r;
}

Var mean_rows(Var a) {
    const Mat& A = a.value();
    const std::size_t m = A.rows(), n = A.cols();
    if (m == 0) throw std::invalid_argument("mean_rows: empty input");
    Mat out(1, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += A(i, j);
    for (auto& v : out.vec()) v /= double(m);
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, m, n]() {
            Mat& ga = na->g();
            const double inv = 1.0 / double(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga(i, j) += nr->grad[j] * inv;
        };
    }
    return r;
}

Var max_rows(Var a) {
    const Mat& A = a.value();
    const std::size_t m = A.rows(), n = A.cols();
    if (m == 0) throw std::invalid_argument("max_rows: empty input");
    Mat out(1, n);
    std::vector<std::size_t> arg(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = A(0, j);
        for (std::size_t i = 1; i < m; ++i)
            if (A(i, j) > out[j]) out[j] = A(i, j), arg[j] = i;
    }
    Node* na = a.node();
    Var r = tape_of(a).make(std::move(out), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr, arg = std::move(arg), n]() {
            Mat& ga = na->g();
            for (std::size_t j = 0; j < n; ++j) ga(arg[j], j) += nr->grad[j];
        };
    }
    return r;
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().vec()) s += v;
    Node* na = a.node();
    Var r = tape_of(a).make(Mat(1, 1, s), a.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [na, nr]() {
            Mat& ga = na->g();
            const double g = nr->grad[0];
            for (auto& v : ga.vec()) v += g;
        };
    }
    return r;
}

Var mean(Var a) {
    if (a.value().empty()) throw std::invalid_argument("mean: empty input");
    return scale(sum(a), 1.0 / double(a.value().size()));
}

Var mse(Var pred, Var target) { return mean(square(sub(pred, target))); }

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
    if (terms.size() != weights.size() || terms.empty()) throw std::invalid_argument("weighted_sum: size mismatch");
    double s = 0.0;
    bool needs = false;
    std::vector<Node*> nodes;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].value().size() != 1) throw std::invalid_argument("weighted_sum: terms must be scalars");
        s += weights[i] * terms[i].item();
        needs = needs || terms[i].requires_grad();
        nodes.push_back(terms[i].node());
    }
    Var r = tape_of(terms[0]).make(Mat(1, 1, s), needs, nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [nodes = std::move(nodes), w = std::vector<double>(weights.begin(), weights.end()), nr]() {
            for (std::size_t i = 0; i < nodes.size(); ++i)
                if (nodes[i]->requires_grad) nodes[i]->g()[0] += w[i] * nr->grad[0];
        };
    }
    return r;
}

Var fourier_features(const Mat& x, Var freq) {
    const Mat& B = freq.value();
    if (x.cols() != B.cols()) throw std::invalid_argument("fourier_features: dimension mismatch");
    const std::size_t n = x.rows(), nf = B.rows(), d = x.cols();
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Mat out(n, 2 * nf);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < nf; ++f) {
            double th = 0.0;
            for (std::size_t k = 0; k < d; ++k) th += x(i, k) * B(f, k);
            th *= two_pi;
            out(i, f) = std::cos(th);
            out(i, nf + f) = std::sin(th);
        }
    Node* nb = freq.node();
    Var r = tape_of(freq).make(std::move(out), freq.requires_grad(), nullptr);
    Node* nr = r.node();
    if (nr->requires_grad) {
        nr->backward = [nb, nr, x, n, nf, d]() {
            Mat& gb = nb->g();
            const Mat& y = nr->value;
            const Mat& g = nr->grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t f = 0; f < nf; ++f) {
                    // d cos = -sin dth, d sin = cos dth
                    const double dth = (-y(i, nf + f) * g(i, f) + y(i, f) * g(i, nf + f)) * two_pi;
                    for (std::size_t k = 0; k < d; ++k) gb(f, k) += dth * x(i, k);
                }
        };
    }
    return r;
}

}  // namespace glu::ad
