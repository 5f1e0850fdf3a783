#pragma once

// Dense tensors and a reverse-mode differentiation tape.
//
// Every tensor is stored as a row-major matrix: a rank-n shape {d0, ..., dn-1}
// is viewed as (d0 * ... * dn-2) x dn-1. Sequences are laid out one timestep
// per row, so a batch of B windows of T steps is a (B*T) x d matrix together
// with a SeqLayout describing the valid length of each window.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "affectfuse/errors.hpp"

namespace affectfuse {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;
using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline std::string shape_str(const Mat& m) { return shape_str(Shape{std::size_t(m.rows()), std::size_t(m.cols())}); }

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false)
        : shape_(std::move(shape)), requires_grad_(requires_grad) {
        check_rank();
        values_ = Mat::Zero(view_rows(), view_cols());
    }

    Tensor(Shape shape, Mat values, bool requires_grad = false)
        : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
        check_rank();
        if (values_.rows() != view_rows() || values_.cols() != view_cols())
            throw ShapeError("tensor storage " + shape_str(values_) + " does not match shape " + shape_str(shape_));
    }

    static Tensor matrix(Mat values, bool requires_grad = false) {
        Shape s{std::size_t(values.rows()), std::size_t(values.cols())};
        return Tensor(std::move(s), std::move(values), requires_grad);
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return std::size_t(values_.size()); }

    Mat& values() { return values_; }
    const Mat& values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool on) { requires_grad_ = on; }

private:
    void check_rank() const {
        if (shape_.empty() || shape_.size() > 3)
            throw ShapeError("tensor rank must be 1, 2 or 3, got shape " + shape_str(shape_));
    }
    Index view_cols() const { return Index(shape_.back()); }
    Index view_rows() const {
        std::size_t r = 1;
        for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
        return Index(r);
    }

    Shape shape_;
    Mat values_;
    bool requires_grad_ = false;
};

class Tape;

// Handle to a node on a tape.
class Var {
public:
    Var() = default;
    const Mat& value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
    bool requires_grad() const;
    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Row layout of a stacked batch: `lengths.size()` segments of `steps` rows each.
// Rows at or beyond a segment's length are padding.
struct SeqLayout {
    std::size_t steps = 0;
    std::vector<std::size_t> lengths;

    static SeqLayout single(std::size_t t) { return {t, {t}}; }
    std::size_t batch() const { return lengths.size(); }
    std::size_t rows() const { return steps * lengths.size(); }
    bool valid(std::size_t b, std::size_t t) const { return t < lengths[b]; }
};

// Records executed primitives in order. Backward replays them in reverse,
// which is a reverse topological order since inputs always precede outputs.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Mat& grad_out, std::size_t self)>;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }
    std::size_t size() const { return nodes_.size(); }

    Var constant(Mat value) {
        if (!value.allFinite()) throw NumericError("constant input contains non-finite values");
        return push("constant", std::move(value), false, {});
    }

    // Leaf bound to a parameter tensor. Registering the same tensor twice returns the same node.
    Var param(const Tensor& t) {
        if (auto it = leaves_.find(&t); it != leaves_.end()) return Var(this, it->second);
        if (!t.values().allFinite()) throw NumericError("parameter contains non-finite values");
        Var v = push("param", t.values(), grad_enabled_ && t.requires_grad(), {});
        leaves_.emplace(&t, v.id());
        return v;
    }

    Var record(std::string_view op, Mat value, const std::vector<Var>& inputs, BackwardFn fn) {
        if (!value.allFinite()) throw NumericError(std::string(op) + " produced non-finite values");
        bool needs = false;
        for (const Var& in : inputs) {
            if (in.tape_ != this) throw TapeError(std::string(op) + ": operand belongs to a different tape");
            needs = needs || nodes_[in.id_].requires_grad;
        }
        needs = needs && grad_enabled_;
        return push(op, std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
    }

    const Mat& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }

    template <class Derived>
    void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0)
            n.grad = g;
        else
            n.grad += g;
    }

    // Adds `g` into the block of node `id` starting at (r, c).
    template <class Derived>
    void accumulate_block(std::size_t id, Index r, Index c, const Eigen::MatrixBase<Derived>& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.grad.block(r, c, g.rows(), g.cols()) += g;
    }

    void backward(const Var& loss) {
        if (loss.tape_ != this) throw TapeError("backward: loss belongs to a different tape");
        if (backward_done_) throw TapeError("backward called twice without reset");
        const Node& root = nodes_[loss.id_];
        if (root.value.size() != 1)
            throw TapeError("backward requires a scalar loss, got " + shape_str(root.value));
        if (!root.requires_grad) throw TapeError("backward: loss does not depend on any parameter");
        backward_done_ = true;
        visit_order_.clear();
        nodes_[loss.id_].grad = Mat::Ones(1, 1);
        for (std::size_t i = loss.id_ + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || n.grad.size() == 0) continue;
            visit_order_.push_back(i);
            if (n.backward) n.backward(*this, n.grad, i);
        }
    }

    // Clears all node gradients so backward may run again.
    void reset() {
        for (Node& n : nodes_) n.grad.resize(0, 0);
        backward_done_ = false;
        visit_order_.clear();
    }

    // Gradient of the last backward w.r.t. a parameter; zero if it did not contribute.
    Mat grad(const Tensor& t) const {
        auto it = leaves_.find(&t);
        if (it == leaves_.end() || nodes_[it->second].grad.size() == 0)
            return Mat::Zero(t.values().rows(), t.values().cols());
        return nodes_[it->second].grad;
    }

    Mat grad(const Var& v) const {
        const Node& n = nodes_.at(v.id_);
        if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    // Node ids in the order the last backward visited them.
    const std::vector<std::size_t>& visit_order() const { return visit_order_; }

private:
    struct Node {
        std::string op;
        Mat value;
        Mat grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push(std::string_view op, Mat value, bool requires_grad, BackwardFn fn) {
        nodes_.push_back(Node{std::string(op), std::move(value), Mat{}, requires_grad, std::move(fn)});
        return Var(this, nodes_.size() - 1);
    }

    bool grad_enabled_;
    bool backward_done_ = false;
    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> leaves_;
    std::vector<std::size_t> visit_order_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline void require_same_shape(std::string_view op, const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
}

inline void require_scalar(std::string_view op, const Var& s) {
    if (s.value().size() != 1) throw ShapeError(std::string(op) + ": expected a 1x1 operand, got " + shape_str(s.value()));
}

}  // namespace detail

// ---------------------------------------------------------------- linear algebra

inline Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.value()) + " x " + shape_str(b.value()));
    Tape& t = *a.tape();
    Mat out = a.value() * b.value();
    return t.record("matmul", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, const Mat& g, std::size_t) {
        if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
        if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
    });
}

// a * b^T
inline Var matmul_nt(const Var& a, const Var& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_str(a.value()) + " x " +
                         shape_str(b.value()) + "^T");
    Tape& t = *a.tape();
    Mat out = a.value() * b.value().transpose();
    return t.record("matmul_nt", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, const Mat& g, std::size_t) {
        if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
        if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
    });
}

inline Var transpose(const Var& a) {
    Mat out = a.value().transpose();
    return a.tape()->record("transpose", std::move(out), {a}, [ia = a.id()](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g.transpose());
    });
}

// ---------------------------------------------------------------- elementwise

inline Var add(const Var& a, const Var& b) {
    detail::require_same_shape("add", a, b);
    Mat out = a.value() + b.value();
    return a.tape()->record("add", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

inline Var sub(const Var& a, const Var& b) {
    detail::require_same_shape("sub", a, b);
    Mat out = a.value() - b.value();
    return a.tape()->record("sub", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
    });
}

inline Var scale(const Var& a, double s) {
    Mat out = a.value() * s;
    return a.tape()->record("scale", std::move(out), {a}, [ia = a.id(), s](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g * s);
    });
}

inline Var add_scalar(const Var& a, double s) {
    Mat out = a.value().array() + s;
    return a.tape()->record("add_scalar", std::move(out), {a}, [ia = a.id()](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g);
    });
}

// a (m x n) + row (1 x n) broadcast over rows.
inline Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw ShapeError("add_row: cannot broadcast " + shape_str(row.value()) + " over " + shape_str(a.value()));
    Mat out = a.value().rowwise() + row.value().row(0);
    return a.tape()->record("add_row", std::move(out), {a, row}, [ia = a.id(), ir = row.id()](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g);
        if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
    });
}

// a - s with s a 1x1 node broadcast over every entry.
inline Var sub_scalar(const Var& a, const Var& s) {
    detail::require_scalar("sub_scalar", s);
    Mat out = a.value().array() - s.value()(0, 0);
    return a.tape()->record("sub_scalar", std::move(out), {a, s}, [ia = a.id(), is = s.id()](Tape& t, const Mat& g, std::size_t) {
        t.accumulate(ia, g);
        if (t.requires_grad(is)) t.accumulate(is, Mat::Constant(1, 1, -g.sum()));
    });
}

inline Var hadamard(const Var& a, const Var& b) {
    detail::require_same_shape("hadamard", a, b);
    Mat out = a.value().cwiseProduct(b.value());
    return a.tape()->record("hadamard", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, const Mat& g, std::size_t) {
        if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
    });
}

inline Var divide(const Var& a, const Var& b) {
    detail::require_same_shape("divide", a, b);
    if ((b.value().array() == 0.0).any()) throw NumericError("divide: division by zero");
    Mat out = a.value().cwiseQuotient(b.value());
    return a.tape()->record("divide", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, const Mat& g, std::size_t) {
        const Mat& bv = t.value(ib);
        if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseQuotient(bv));
        if (t.requires_grad(ib)) {
            Mat db = -(g.cwiseProduct(t.value(ia))).cwiseQuotient(bv.cwiseProduct(bv));
            t.accumulate(ib, db);
        }
    });
}


inline Var sigmoid(const Var& a) {
    Mat out = a.value().unaryExpr([](double x) {
        // split on sign so exp never overflows
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return a.tape()->record("sigmoid", std::move(out), {a}, [ia = a.id()](Tape& t, const Mat& g, std::size_t self) {
        const Mat& y = t.value(self);
        t.accumulate(ia, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
    });
}

inline Var tanh(const Var& a) {
    Mat out = a.value().array().tanh();
    return a.tape()->record("tanh", std::move(out), {a}, [ia = a.id()](Tape& t, const Mat& g, std::size_t self) {
        const Mat& y = t.value(self);
        t.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
    });
}

// Row-wise softmax with per-row max subtraction.
inline Var softmax_rows(const Var& a) {
    const Mat& x = a.value();
    Mat out(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        out.row(r) = (x.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return a.tape()->record("softmax_rows", std::move(out), {a}, [ia = a.id()](Tape& t, const Mat& g, std::size_t self) {
        const Mat& y = t.value(self);
        Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
        Mat dx = y.cwiseProduct((g.colwise() - dots));
        t.accumulate(ia, dx);
    });
}

// ---------------------------------------------------------------- reductions

inline Var sum(const Var& a) {
    Mat out = Mat::Constant(1, 1, a.value().sum());
    return a.tape()->record("sum", std::move(out), {a}, [ia = a.id()](Tape& t, const Mat& g, std::size_t) {
        const Mat& x = t.value(ia);
        t.accumulate(ia, Mat::Constant(x.rows(), x.cols(), g(0, 0)));
    });
}

inline Var mean(const Var& a) {
    if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
    return scale(sum(a), 1.0 / double(a.value().size()));
}

// ---------------------------------------------------------------- structure

// Column-wise concatenation in argument order; all operands share the row count.
inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no operands");
    if (parts.size() == 1) return parts.front();
    const Index rows = parts.front().rows();
    Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows)
            throw ShapeError("concat_cols: mismatched T, " + shape_str(parts.front().value()) + " vs " +
                             shape_str(p.value()));
        cols += p.cols();
    }
    Mat out(rows, cols);
    std::vector<std::pair<std::size_t, Index>> spans;
    Index c = 0;
    for (const Var& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        spans.emplace_back(p.id(), c);
        c += p.cols();
    }
    return parts.front().tape()->record("concat_cols", std::move(out), parts,
                                        [spans](Tape& t, const Mat& g, std::size_t) {
                                            for (auto [id, c0] : spans)
                                                if (t.requires_grad(id))
                                                    t.accumulate(id, g.middleCols(c0, t.value(id).cols()));
                                        });
}

// Feature-axis concatenation of equally long sequences.
inline Var concat_features(const std::vector<Var>& parts) { return concat_cols(parts); }

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no operands");
    if (parts.size() == 1) return parts.front();
    const Index cols = parts.front().cols();
    Index rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != cols)
            throw ShapeError("concat_rows: mismatched widths, " + shape_str(parts.front().value()) + " vs " +
                             shape_str(p.value()));
        rows += p.rows();
    }
    Mat out(rows, cols);
    std::vector<std::pair<std::size_t, Index>> spans;
    Index r = 0;
    for (const Var& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        spans.emplace_back(p.id(), r);
        r += p.rows();
    }
    return parts.front().tape()->record("concat_rows", std::move(out), parts,
                                        [spans](Tape& t, const Mat& g, std::size_t) {
                                            for (auto [id, r0] : spans)
                                                if (t.requires_grad(id))
                                                    t.accumulate(id, g.middleRows(r0, t.value(id).rows()));
                                        });
}

inline Var slice(const Var& a, Index r0, Index nr, Index c0, Index nc) {
    if (r0 < 0 || c0 < 0 || nr < 0 || nc < 0 || r0 + nr > a.rows() || c0 + nc > a.cols())
        throw ShapeError("slice: block out of range for " + shape_str(a.value()));
    Mat out = a.value().block(r0, c0, nr, nc);
    return a.tape()->record("slice", std::move(out), {a}, [ia = a.id(), r0, c0](Tape& t, const Mat& g, std::size_t) {
        t.accumulate_block(ia, r0, c0, g);
    });
}

inline Var gather_rows(const Var& a, std::vector<Index> rows) {
    Mat out(Index(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= a.rows()) throw ShapeError("gather_rows: row index out of range");
        out.row(Index(i)) = a.value().row(rows[i]);
    }
    return a.tape()->record("gather_rows", std::move(out), {a},
                            [ia = a.id(), rows = std::move(rows)](Tape& t, const Mat& g, std::size_t) {
                                const Mat& x = t.value(ia);
                                Mat dx = Mat::Zero(x.rows(), x.cols());
                                for (std::size_t i = 0; i < rows.size(); ++i) dx.row(rows[i]) += g.row(Index(i));
                                t.accumulate(ia, dx);
                            });
}

// ---------------------------------------------------------------- temporal convolution

namespace detail {

// Rows of the unfolded input: for every valid (segment, t), the w frames
// centred on t laid side by side, zero outside [0, length).
inline Mat unfold_same(const Mat& x, std::size_t width, const SeqLayout& layout) {
    const Index d = x.cols();
    const std::ptrdiff_t pad = std::ptrdiff_t(width / 2);
    Mat col = Mat::Zero(x.rows(), Index(width) * d);
    for (std::size_t b = 0; b < layout.batch(); ++b) {
        const std::ptrdiff_t len = std::ptrdiff_t(layout.lengths[b]);
        const Index base = Index(b * layout.steps);
        for (std::ptrdiff_t t = 0; t < len; ++t)
            for (std::size_t j = 0; j < width; ++j) {
                const std::ptrdiff_t src = t + std::ptrdiff_t(j) - pad;
                if (src >= 0 && src < len) col.block(base + t, Index(j) * d, 1, d) = x.row(base + src);
            }
    }
    return col;
}

inline void mask_padding(Mat& m, const SeqLayout& layout) {
    for (std::size_t b = 0; b < layout.batch(); ++b)
        for (std::size_t t = layout.lengths[b]; t < layout.steps; ++t) m.row(Index(b * layout.steps + t)).setZero();
}

inline void check_layout(std::string_view op, const Var& x, const SeqLayout& layout) {
    if (Index(layout.rows()) != x.rows())
        throw ShapeError(std::string(op) + ": layout covers " + std::to_string(layout.rows()) + " rows but input is " +
                         shape_str(x.value()));
    for (std::size_t len : layout.lengths)
        if (len > layout.steps) throw ShapeError(std::string(op) + ": segment length exceeds step count");
}

}  // namespace detail

// Zero-padded "same" temporal convolution over a stacked batch.
// kernel is (width*d_in) x d_out with row j*d_in+i holding K[j,i,:]; bias is 1 x d_out.
// Padding rows of the output are zero.
inline Var conv1d_same(const Var& x, const Var& kernel, const Var& bias, std::size_t width, const SeqLayout& layout) {
    if (width % 2 == 0) throw ConfigError("conv1d_same: kernel width must be odd, got " + std::to_string(width));
    detail::check_layout("conv1d_same", x, layout);
    if (kernel.rows() != Index(width) * x.cols())
        throw ShapeError("conv1d_same: kernel " + shape_str(kernel.value()) + " does not match width " +
                         std::to_string(width) + " and input " + shape_str(x.value()));
    if (bias.rows() != 1 || bias.cols() != kernel.cols())
        throw ShapeError("conv1d_same: bias " + shape_str(bias.value()) + " does not match kernel " +
                         shape_str(kernel.value()));
    Mat col = detail::unfold_same(x.value(), width, layout);
    Mat out = col * kernel.value();
    out.rowwise() += bias.value().row(0);
    detail::mask_padding(out, layout);
    return x.tape()->record(
        "conv1d_same", std::move(out), {x, kernel, bias},
        [ix = x.id(), ik = kernel.id(), ib = bias.id(), width, layout, col = std::move(col)](Tape& t, const Mat& g,
                                                                                           std::size_t) {
            Mat gm = g;
            detail::mask_padding(gm, layout);
            if (t.requires_grad(ik)) t.accumulate(ik, col.transpose() * gm);
            if (t.requires_grad(ib)) t.accumulate(ib, gm.colwise().sum());
            if (!t.requires_grad(ix)) return;
            const Mat& xv = t.value(ix);
            const Index d = xv.cols();
            const std::ptrdiff_t pad = std::ptrdiff_t(width / 2);
            Mat dcol = gm * t.value(ik).transpose();
            Mat dx = Mat::Zero(xv.rows(), d);
            for (std::size_t b = 0; b < layout.batch(); ++b) {
                const std::ptrdiff_t len = std::ptrdiff_t(layout.lengths[b]);
                const Index base = Index(b * layout.steps);
                for (std::ptrdiff_t tt = 0; tt < len; ++tt)
                    for (std::size_t j = 0; j < width; ++j) {
                        const std::ptrdiff_t src = tt + std::ptrdiff_t(j) - pad;
                        if (src >= 0 && src < len) dx.row(base + src) += dcol.block(base + tt, Index(j) * d, 1, d);
                    }
            }
            t.accumulate(ix, dx);
        });
}

// Single-sequence form: x is T x d_in.
inline Var conv1d_same(const Var& x, const Var& kernel, const Var& bias, std::size_t width) {
    return conv1d_same(x, kernel, bias, width, SeqLayout::single(std::size_t(x.rows())));
}

}  // namespace affectfuse
