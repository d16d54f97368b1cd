#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ansp/error.hpp"
#include "ansp/rng.hpp"

namespace ansp {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace detail {

struct TensorState {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    bool leaf = true;  // op outputs are non-leaf; their grads reset per backward

    void enable_grad() {
        if (!requires_grad) {
            requires_grad = true;
            grad.assign(values.size(), 0.0);
        }
    }
};

}  // namespace detail

// Dense float64 tensor, row-major.  Value-semantic handle over shared storage:
// copies alias the same buffer, which is what the tape records.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return from_values(std::move(shape), {}, requires_grad, true);
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        std::vector<double> vals(shape_size(shape), v);
        return from_values(std::move(shape), std::move(vals), requires_grad, false);
    }

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        if (values.size() != shape_size(shape))
            throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                             shape_str(shape));
        return from_values(std::move(shape), std::move(values), requires_grad, false);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = true) {
        std::vector<double> vals(shape_size(shape));
        for (auto& v : vals) v = rng.uniform(lo, hi);
        return from_values(std::move(shape), std::move(vals), requires_grad, false);
    }

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return st_->shape; }
    std::size_t size() const { return st_->values.size(); }
    std::size_t rank() const { return st_->shape.size(); }

    std::size_t rows() const {
        require_rank2("rows");
        return st_->shape[0];
    }
    std::size_t cols() const {
        require_rank2("cols");
        return st_->shape[1];
    }

    std::span<const double> values() const { return st_->values; }
    std::span<double> values() { return st_->values; }
    std::span<const double> grad() const { return st_->grad; }
    std::span<double> grad() { return st_->grad; }

    double at(std::size_t i) const { return st_->values.at(i); }
    double& at(std::size_t i) { return st_->values.at(i); }
    double operator()(std::size_t r, std::size_t c) const {
        require_rank2("operator()");
        return st_->values[r * st_->shape[1] + c];
    }
    double& operator()(std::size_t r, std::size_t c) {
        require_rank2("operator()");
        return st_->values[r * st_->shape[1] + c];
    }
    double grad_at(std::size_t i) const { return st_->grad.at(i); }

    double item() const {
        if (size() != 1) throw ContractError("item: tensor " + shape_str(shape()) + " is not scalar");
        return st_->values[0];
    }

    bool requires_grad() const { return st_->requires_grad; }
    void set_requires_grad(bool on) {
        if (on)
            st_->enable_grad();
        else {
            st_->requires_grad = false;
            st_->grad.clear();
        }
    }
    void zero_grad() {
        if (st_->requires_grad) std::fill(st_->grad.begin(), st_->grad.end(), 0.0);
    }

    // Value copy outside any gradient path.
    Tensor detached() const { return from(shape(), {st_->values.begin(), st_->values.end()}, false); }

    Tensor clone() const {
        Tensor t = from(shape(), {st_->values.begin(), st_->values.end()}, false);
        if (st_->requires_grad) {
            t.st_->requires_grad = true;
            t.st_->grad = st_->grad;
        }
        return t;
    }

    std::shared_ptr<detail::TensorState> state() const { return st_; }

    bool same_storage(const Tensor& o) const { return st_ == o.st_; }

  private:
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad,
                              bool zero_fill) {
        Tensor t;
        t.st_ = std::make_shared<detail::TensorState>();
        t.st_->shape = std::move(shape);
        if (zero_fill)
            t.st_->values.assign(shape_size(t.st_->shape), 0.0);
        else
            t.st_->values = std::move(values);
        if (requires_grad) t.st_->enable_grad();
        return t;
    }

    void require_rank2(const char* who) const {
        if (st_->shape.size() != 2)
            throw ShapeError(std::string(who) + ": tensor " + shape_str(shape()) + " is not 2-D");
    }

    std::shared_ptr<detail::TensorState> st_;
};

namespace detail {

inline void require_finite(const Tensor& t, const char* op) {
    for (double v : t.values())
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(op) + ": non-finite input value");
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace detail

// Ordered record of primitive operations.  Every op that consumes a tracked
// tensor appends one record; backward() replays the records in reverse, so a
// node's gradient is complete before any of its producers read it.  Gradients
// accumulate: using a tensor twice sums both contributions.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    std::size_t node_count() const { return records_.size(); }
    void clear() { records_.clear(); }

    // root must be scalar.  Seeds d(root)/d(root) = 1 and replays the tape.
    // Leaf gradients accumulate across calls; intermediate gradients are
    // scratch space reset on every replay.
    void backward(const Tensor& root) {
        if (root.size() != 1)
            throw ContractError("backward: root " + shape_str(root.shape()) + " is not scalar");
        if (!root.requires_grad()) return;  // nothing tracked below the root
        for (auto& rec : records_)
            if (!rec.out->leaf) std::fill(rec.out->grad.begin(), rec.out->grad.end(), 0.0);
        root.state()->grad[0] += 1.0;
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->pull();
    }

  private:
    struct Record {
        std::shared_ptr<detail::TensorState> out;
        std::function<void()> pull;
    };

    void record(const Tensor& out, std::function<void()> pull) {
        auto st = out.state();
        st->leaf = false;
        records_.push_back({std::move(st), std::move(pull)});
    }

  public:

    // ---- elementwise ----

    Tensor add(const Tensor& a, const Tensor& b) {
        detail::require_same_shape(a, b, "add");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + b.at(i);
        Tensor out = make(a.shape(), std::move(v), {a, b});
        if (out.requires_grad()) {
            auto as = a.state(), bs = b.state(), os = out.state();
            record(out, [as, bs, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) {
                    if (as->requires_grad) as->grad[i] += os->grad[i];
                    if (bs->requires_grad) bs->grad[i] += os->grad[i];
                }
            });
        }
        return out;
    }

    Tensor sub(const Tensor& a, const Tensor& b) {
        detail::require_same_shape(a, b, "sub");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) - b.at(i);
        Tensor out = make(a.shape(), std::move(v), {a, b});
        if (out.requires_grad()) {
            auto as = a.state(), bs = b.state(), os = out.state();
            record(out, [as, bs, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) {
                    if (as->requires_grad) as->grad[i] += os->grad[i];
                    if (bs->requires_grad) bs->grad[i] -= os->grad[i];
                }
            });
        }
        return out;
    }

    Tensor mul(const Tensor& a, const Tensor& b) {
        detail::require_same_shape(a, b, "mul");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * b.at(i);
        Tensor out = make(a.shape(), std::move(v), {a, b});
        if (out.requires_grad()) {
            auto as = a.state(), bs = b.state(), os = out.state();
            record(out, [as, bs, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) {
                    if (as->requires_grad) as->grad[i] += os->grad[i] * bs->values[i];
                    if (bs->requires_grad) bs->grad[i] += os->grad[i] * as->values[i];
                }
            });
        }
        return out;
    }

    Tensor scale(const Tensor& a, double c) {
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * c;
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os, c] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += os->grad[i] * c;
            });
        }
        return out;
    }

    // out = max(a, lo); flat side carries zero gradient.
    Tensor clamp_min(const Tensor& a, double lo) {
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) < lo ? lo : a.at(i);
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os, lo] {
                for (std::size_t i = 0; i < os->grad.size(); ++i)
                    if (as->values[i] > lo) as->grad[i] += os->grad[i];
            });
        }
        return out;
    }

    // Natural log; the caller guarantees positive inputs (clamp first).
    Tensor log(const Tensor& a) {
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(a.at(i));
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i)
                    as->grad[i] += os->grad[i] / as->values[i];
            });
        }
        return out;
    }

    Tensor reciprocal(const Tensor& a) {
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / a.at(i);
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) {
                    double y = os->values[i];
                    as->grad[i] -= os->grad[i] * y * y;
                }
            });
        }
        return out;
    }

    Tensor sigmoid(const Tensor& a) {
        detail::require_finite(a, "sigmoid");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double x = a.at(i);
            if (x >= 0.0) {
                v[i] = 1.0 / (1.0 + std::exp(-x));
            } else {
                double e = std::exp(x);
                v[i] = e / (1.0 + e);
            }
        }
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) {
                    double s = os->values[i];
                    as->grad[i] += os->grad[i] * s * (1.0 - s);
                }
            });
        }
        return out;
    }

    Tensor tanh(const Tensor& a) {
        detail::require_finite(a, "tanh");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.at(i));
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) {
                    double t = os->values[i];
                    as->grad[i] += os->grad[i] * (1.0 - t * t);
                }
            });
        }
        return out;
    }

    // Softmax over the last axis, shifted by the row max for stability.
    Tensor softmax(const Tensor& a) {
        detail::require_finite(a, "softmax");
        if (a.rank() == 0 || a.size() == 0) throw ShapeError("softmax: empty tensor");
        const std::size_t width = a.shape().back();
        const std::size_t rows = a.size() / width;
        std::vector<double> v(a.size());
        for (std::size_t r = 0; r < rows; ++r) {
            const double* x = a.values().data() + r * width;
            double m = x[0];
            for (std::size_t j = 1; j < width; ++j) m = std::max(m, x[j]);
            double s = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
                v[r * width + j] = std::exp(x[j] - m);
                s += v[r * width + j];
            }
            for (std::size_t j = 0; j < width; ++j) v[r * width + j] /= s;
        }
        Tensor out = make(a.shape(), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os, rows, width] {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* y = os->values.data() + r * width;
                    const double* g = os->grad.data() + r * width;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < width; ++j) dot += g[j] * y[j];
                    for (std::size_t j = 0; j < width; ++j)
                        as->grad[r * width + j] += y[j] * (g[j] - dot);
                }
            });
        }
        return out;
    }

    // ---- linear algebra ----

    Tensor matmul(const Tensor& a, const Tensor& b) {
        if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
            throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        std::vector<double> v(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += a.at(i * k + p) * b.at(p * n + j);
                v[i * n + j] = acc;
            }
        Tensor out = make({m, n}, std::move(v), {a, b});
        if (out.requires_grad()) {
            auto as = a.state(), bs = b.state(), os = out.state();
            record(out, [as, bs, os, m, k, n] {
                if (as->requires_grad)
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j)
                                acc += os->grad[i * n + j] * bs->values[p * n + j];
                            as->grad[i * k + p] += acc;
                        }
                if (bs->requires_grad)
                    for (std::size_t p = 0; p < k; ++p)
                        for (std::size_t j = 0; j < n; ++j) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < m; ++i)
                                acc += as->values[i * k + p] * os->grad[i * n + j];
                            bs->grad[p * n + j] += acc;
                        }
            });
        }
        return out;
    }

    Tensor transpose(const Tensor& a) {
        if (a.rank() != 2) throw ShapeError("transpose: tensor " + shape_str(a.shape()) + " is not 2-D");
        const std::size_t m = a.rows(), n = a.cols();
        std::vector<double> v(m * n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) v[j * m + i] = a.at(i * n + j);
        Tensor out = make({n, m}, std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os, m, n] {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) as->grad[i * n + j] += os->grad[j * m + i];
            });
        }
        return out;
    }

    // Adds a length-C bias vector to every row of a B-by-C matrix.
    Tensor add_rows(const Tensor& mat, const Tensor& bias) {
        if (mat.rank() != 2 || bias.rank() != 1 || bias.size() != mat.cols())
            throw ShapeError("add_rows: incompatible shapes " + shape_str(mat.shape()) + " vs " +
                             shape_str(bias.shape()));
        const std::size_t b = mat.rows(), c = mat.cols();
        std::vector<double> v(b * c);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < c; ++j) v[i * c + j] = mat.at(i * c + j) + bias.at(j);
        Tensor out = make(mat.shape(), std::move(v), {mat, bias});
        if (out.requires_grad()) {
            auto ms = mat.state(), bs = bias.state(), os = out.state();
            record(out, [ms, bs, os, b, c] {
                for (std::size_t i = 0; i < b; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                        if (ms->requires_grad) ms->grad[i * c + j] += os->grad[i * c + j];
                        if (bs->requires_grad) bs->grad[j] += os->grad[i * c + j];
                    }
            });
        }
        return out;
    }

    // ---- reductions ----

    Tensor sum(const Tensor& a) {
        double acc = 0.0;
        for (double x : a.values()) acc += x;
        Tensor out = make({1}, {acc}, {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (auto& g : as->grad) g += os->grad[0];
            });
        }
        return out;
    }

    Tensor mean(const Tensor& a) {
        if (a.size() == 0) throw ShapeError("mean: empty tensor");
        double acc = 0.0;
        for (double x : a.values()) acc += x;
        const double inv = 1.0 / static_cast<double>(a.size());
        Tensor out = make({1}, {acc * inv}, {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os, inv] {
                for (auto& g : as->grad) g += os->grad[0] * inv;
            });
        }
        return out;
    }

    // Sum of squared entries of a matrix.
    Tensor frobenius_sq(const Tensor& a) {
        if (a.rank() != 2)
            throw ShapeError("frobenius_sq: tensor " + shape_str(a.shape()) + " is not 2-D");
        double acc = 0.0;
        for (double x : a.values()) acc += x * x;
        Tensor out = make({1}, {acc}, {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (std::size_t i = 0; i < as->grad.size(); ++i)
                    as->grad[i] += 2.0 * as->values[i] * os->grad[0];
            });
        }
        return out;
    }

    // Mean negative log-likelihood of the labeled column per row.
    // Probabilities are clamped below at 1e-12 before the log.
    Tensor cross_entropy(const Tensor& probs, const std::vector<std::size_t>& labels) {
        if (probs.rank() != 2)
            throw ShapeError("cross_entropy: tensor " + shape_str(probs.shape()) + " is not 2-D");
        const std::size_t b = probs.rows(), c = probs.cols();
        if (labels.size() != b)
            throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(b) + " rows");
        for (auto y : labels)
            if (y >= c)
                throw std::out_of_range("cross_entropy: label " + std::to_string(y) +
                                        " out of range for " + std::to_string(c) + " classes");
        constexpr double kFloor = 1e-12;
        double acc = 0.0;
        for (std::size_t i = 0; i < b; ++i)
            acc -= std::log(std::max(probs.at(i * c + labels[i]), kFloor));
        const double inv = 1.0 / static_cast<double>(b);
        Tensor out = make({1}, {acc * inv}, {probs});
        if (out.requires_grad()) {
            auto ps = probs.state();
            auto os = out.state();
            auto lab = labels;
            record(out, [ps, os, lab, c, inv] {
                for (std::size_t i = 0; i < lab.size(); ++i) {
                    double p = ps->values[i * c + lab[i]];
                    if (p > kFloor) ps->grad[i * c + lab[i]] -= os->grad[0] * inv / p;
                }
            });
        }
        return out;
    }

    // ---- structural ----

    Tensor reshape(const Tensor& a, Shape shape) {
        if (shape_size(shape) != a.size())
            throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
        std::vector<double> v(a.values().begin(), a.values().end());
        Tensor out = make(std::move(shape), std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os] {
                for (std::size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += os->grad[i];
            });
        }
        return out;
    }

    // Row i of a matrix as a 1-by-C tensor.
    Tensor take_row(const Tensor& a, std::size_t i) {
        if (a.rank() != 2) throw ShapeError("take_row: tensor " + shape_str(a.shape()) + " is not 2-D");
        if (i >= a.rows())
            throw std::out_of_range("take_row: row " + std::to_string(i) + " of " +
                                    std::to_string(a.rows()));
        const std::size_t c = a.cols();
        std::vector<double> v(a.values().begin() + i * c, a.values().begin() + (i + 1) * c);
        Tensor out = make({1, c}, std::move(v), {a});
        if (out.requires_grad()) {
            auto as = a.state();
            auto os = out.state();
            record(out, [as, os, i, c] {
                for (std::size_t j = 0; j < c; ++j) as->grad[i * c + j] += os->grad[j];
            });
        }
        return out;
    }

    // Vertical concatenation of matrices with equal column counts.
    Tensor concat_rows(const std::vector<Tensor>& parts) {
        if (parts.empty()) throw ShapeError("concat_rows: no inputs");
        const std::size_t c = parts[0].rank() == 2 ? parts[0].cols() : 0;
        std::size_t total = 0;
        for (const auto& p : parts) {
            if (p.rank() != 2 || p.cols() != c)
                throw ShapeError("concat_rows: part " + shape_str(p.shape()) +
                                 " does not match column count " + std::to_string(c));
            total += p.rows();
        }
        std::vector<double> v;
        v.reserve(total * c);
        bool track = false;
        for (const auto& p : parts) {
            v.insert(v.end(), p.values().begin(), p.values().end());
            track = track || p.requires_grad();
        }
        Tensor out = Tensor::from({total, c}, std::move(v));
        if (recording_ && track) {
            out.set_requires_grad(true);
            std::vector<std::shared_ptr<detail::TensorState>> states;
            states.reserve(parts.size());
            for (const auto& p : parts) states.push_back(p.state());
            auto os = out.state();
            record(out, [states, os] {
                std::size_t off = 0;
                for (const auto& ps : states) {
                    const std::size_t n = ps->values.size();
                    if (ps->requires_grad)
                        for (std::size_t i = 0; i < n; ++i) ps->grad[i] += os->grad[off + i];
                    off += n;
                }
            });
        }
        return out;
    }

    // Gathers table rows by id into a len-by-d matrix.  Backward scatters into
    // the table, skipping skip_grad_id rows (the padding row stays untouched).
    Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids,
                       std::size_t skip_grad_id = static_cast<std::size_t>(-1)) {
        if (table.rank() != 2)
            throw ShapeError("gather_rows: tensor " + shape_str(table.shape()) + " is not 2-D");
        const std::size_t v_rows = table.rows(), d = table.cols();
        for (auto id : ids)
            if (id >= v_rows)
                throw std::out_of_range("gather_rows: id " + std::to_string(id) + " of " +
                                        std::to_string(v_rows));
        std::vector<double> v(ids.size() * d);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) v[i * d + j] = table.at(ids[i] * d + j);
        Tensor out = make({ids.size(), d}, std::move(v), {table});
        if (out.requires_grad()) {
            auto ts = table.state();
            auto os = out.state();
            auto idv = ids;
            record(out, [ts, os, idv, d, skip_grad_id] {
                for (std::size_t i = 0; i < idv.size(); ++i) {
                    if (idv[i] == skip_grad_id) continue;
                    for (std::size_t j = 0; j < d; ++j)
                        ts->grad[idv[i] * d + j] += os->grad[i * d + j];
                }
            });
        }
        return out;
    }

  private:
    Tensor make(Shape shape, std::vector<double> values,
                std::initializer_list<std::reference_wrapper<const Tensor>> inputs) {
        Tensor out = Tensor::from(std::move(shape), std::move(values));
        if (!recording_) return out;
        for (const Tensor& t : inputs)
            if (t.requires_grad()) {
                out.set_requires_grad(true);
                break;
            }
        return out;
    }

    std::vector<Record> records_;
    bool recording_ = true;
};

}  // namespace ansp
