#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "irn/rng.hpp"
#include "irn/threads.hpp"

namespace irn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void check(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

using Shape = std::vector<int>;

inline long shape_numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

// One tape node. `value` is the forward result; `grad` is allocated lazily on
// the backward pass. `backward_fn` reads this node's grad and accumulates into
// the parents' grads.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;
    const char* op = "leaf";

    long numel() const { return long(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Value-semantics handle onto a tape node. Tensors are immutable once built;
// the only sanctioned mutation is the optimizer writing parameter values
// between iterations.
template <typename T>
class Tensor {
   public:
    using Scalar = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    static Tensor from(Shape shape, std::vector<T> data) {
        check(shape_numel(shape) == long(data.size()),
              "tensor data length " + std::to_string(data.size()) + " does not match shape " +
                  shape_str(shape));
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        return Tensor(std::move(n));
    }

    static Tensor zeros(const Shape& shape) {
        return from(shape, std::vector<T>(size_t(shape_numel(shape)), T(0)));
    }

    static Tensor full(const Shape& shape, T v) {
        return from(shape, std::vector<T>(size_t(shape_numel(shape)), v));
    }

    static Tensor scalar(T v) { return from(Shape{1}, std::vector<T>{v}); }

    // Trainable leaf: participates in the tape and accumulates gradient.
    static Tensor param(Shape shape, std::vector<T> data) {
        Tensor t = from(std::move(shape), std::move(data));
        t.node_->requires_grad = true;
        return t;
    }

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[size_t(i)]; }
    int rank() const { return int(node_->shape.size()); }
    long numel() const { return node_->numel(); }
    bool attached() const { return node_->requires_grad; }

    const std::vector<T>& data() const { return node_->value; }
    const std::vector<T>& grad() const { return node_->grad; }

    // Parameter-update access; never call on tensors inside a live graph.
    std::vector<T>& raw() { return node_->value; }
    std::vector<T>& raw_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    T item() const {
        check(numel() == 1, "item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    // Copy of the value with no tape history.
    Tensor detach() const {
        auto n = std::make_shared<Node<T>>();
        n->shape = node_->shape;
        n->value = node_->value;
        return Tensor(std::move(n));
    }

    std::shared_ptr<Node<T>> node() const { return node_; }

   private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
inline Tensor<T> make_op(const char* name, Shape shape, std::vector<T> value,
                         std::vector<Tensor<T>> inputs,
                         std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = name;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.attached();
    if (needs) {
        n->requires_grad = true;
        n->parents.reserve(inputs.size());
        for (const auto& in : inputs) n->parents.push_back(in.node());
        n->backward_fn = std::move(backward);
    }
    return Tensor<T>(std::move(n));
}

// Shapes either match exactly or the right side matches the left's trailing
// dims (broadcast over the leading batch dimension only).
template <typename T>
inline int broadcast_reps(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() == b.shape()) return 1;
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() == sb.size() + 1 && std::equal(sb.begin(), sb.end(), sa.begin() + 1)) {
        return sa[0];
    }
    fail(std::string(op) + ": shapes " + shape_str(sa) + " and " + shape_str(sb) +
         " do not conform (broadcast is batch-leading only)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    int reps = detail::broadcast_reps(a, b, "add");
    long nb = b.numel();
    std::vector<T> out(a.data());
    const T* pb = b.data().data();
    T* po = out.data();
    for (int r = 0; r < reps; ++r)
        for (long i = 0; i < nb; ++i) po[r * nb + i] += pb[i];
    return detail::make_op<T>(
        "add", a.shape(), std::move(out), {a, b}, [reps, nb](Node<T>& n) {
            auto& pa = *n.parents[0];
            auto& pb2 = *n.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
            }
            if (pb2.requires_grad) {
                pb2.ensure_grad();
                for (int r = 0; r < reps; ++r)
                    for (long i = 0; i < nb; ++i) pb2.grad[size_t(i)] += n.grad[size_t(r * nb + i)];
            }
        });
}

template <typename T>
inline Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    int reps = detail::broadcast_reps(a, b, "sub");
    long nb = b.numel();
    std::vector<T> out(a.data());
    const T* pb = b.data().data();
    T* po = out.data();
    for (int r = 0; r < reps; ++r)
        for (long i = 0; i < nb; ++i) po[r * nb + i] -= pb[i];
    return detail::make_op<T>(
        "sub", a.shape(), std::move(out), {a, b}, [reps, nb](Node<T>& n) {
            auto& pa = *n.parents[0];
            auto& pb2 = *n.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
            }
            if (pb2.requires_grad) {
                pb2.ensure_grad();
                for (int r = 0; r < reps; ++r)
                    for (long i = 0; i < nb; ++i) pb2.grad[size_t(i)] -= n.grad[size_t(r * nb + i)];
            }
        });
}

template <typename T>
inline Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    int reps = detail::broadcast_reps(a, b, "mul");
    long nb = b.numel();
    std::vector<T> out(a.data());
    const T* pb = b.data().data();
    T* po = out.data();
    for (int r = 0; r < reps; ++r)
        for (long i = 0; i < nb; ++i) po[r * nb + i] *= pb[i];
    return detail::make_op<T>(
        "mul", a.shape(), std::move(out), {a, b}, [reps, nb](Node<T>& n) {
            auto& pa = *n.parents[0];
            auto& pb2 = *n.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (int r = 0; r < reps; ++r)
                    for (long i = 0; i < nb; ++i)
                        pa.grad[size_t(r * nb + i)] +=
                            n.grad[size_t(r * nb + i)] * pb2.value[size_t(i)];
            }
            if (pb2.requires_grad) {
                pb2.ensure_grad();
                for (int r = 0; r < reps; ++r)
                    for (long i = 0; i < nb; ++i)
                        pb2.grad[size_t(i)] +=
                            n.grad[size_t(r * nb + i)] * pa.value[size_t(r * nb + i)];
            }
        });
}

template <typename T>
inline Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
    std::vector<T> out(a.data());
    for (auto& v : out) v *= s;
    return detail::make_op<T>("mul_scalar", a.shape(), std::move(out), {a}, [s](Node<T>& n) {
        auto& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * s;
    });
}

template <typename T>
inline Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    std::vector<T> out(a.data());
    for (auto& v : out) v += s;
    return detail::make_op<T>("add_scalar", a.shape(), std::move(out), {a}, [](Node<T>& n) {
        auto& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    });
}

namespace detail {

template <typename T, typename F, typename G>
inline Tensor<T> unary_op(const char* name, const Tensor<T>& a, F&& f, G&& dfdx_from_xy) {
    std::vector<T> out(a.data().size());
    const T* pa = a.data().data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i]);
    return make_op<T>(name, a.shape(), std::move(out), {a},
                      [g = std::forward<G>(dfdx_from_xy)](Node<T>& n) {
                          auto& p = *n.parents[0];
                          if (!p.requires_grad) return;
                          p.ensure_grad();
                          for (size_t i = 0; i < n.grad.size(); ++i)
                              p.grad[i] += n.grad[i] * g(p.value[i], n.value[i]);
                      });
}

}  // namespace detail

template <typename T>
inline Tensor<T> exp(const Tensor<T>& a) {
    return detail::unary_op(
        "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
inline Tensor<T> log(const Tensor<T>& a) {
    return detail::unary_op(
        "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
inline Tensor<T> sigmoid(const Tensor<T>& a) {
    return detail::unary_op(
        "sigmoid", a,
        [](T x) { return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : T(1) - T(1) / (T(1) + std::exp(x)); },
        [](T, T y) { return y * (T(1) - y); });
}

constexpr double kLeakySlope = 0.2;

template <typename T>
inline Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(kLeakySlope)) {
    return detail::unary_op(
        "leaky_relu", a, [slope](T x) { return x > T(0) ? x : slope * x; },
        [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
inline Tensor<T> abs(const Tensor<T>& a) {
    return detail::unary_op(
        "abs", a, [](T x) { return std::fabs(x); },
        [](T x, T) { return x >= T(0) ? T(1) : T(-1); });
}

template <typename T>
inline Tensor<T> square(const Tensor<T>& a) {
    return detail::unary_op(
        "square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

// round(clamp(x, 0, 1) * 255) / 255 with round-half-away-from-zero; the
// backward pass is the straight-through estimator (identity Jacobian).
template <typename T>
inline Tensor<T> quantize8(const Tensor<T>& a) {
    std::vector<T> out(a.data().size());
    const T* pa = a.data().data();
    for (size_t i = 0; i < out.size(); ++i) {
        T c = std::min(T(1), std::max(T(0), pa[i]));
        out[i] = T(std::round(double(c) * 255.0) / 255.0);
    }
    return detail::make_op<T>("quantize8", a.shape(), std::move(out), {a}, [](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> sum(const Tensor<T>& a) {
    T acc = T(0);
    for (T v : a.data()) acc += v;
    return detail::make_op<T>("sum", Shape{1}, std::vector<T>{acc}, {a}, [](Node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        T g = n.grad[0];
        for (auto& v : p.grad) v += g;
    });
}

template <typename T>
inline Tensor<T> mean(const Tensor<T>& a) {
    check(a.numel() > 0, "mean of empty tensor");
    T acc = T(0);
    for (T v : a.data()) acc += v;
    T inv = T(1) / T(a.numel());
    return detail::make_op<T>("mean", Shape{1}, std::vector<T>{acc * inv}, {a},
                              [inv](Node<T>& n) {
                                  auto& p = *n.parents[0];
                                  if (!p.requires_grad) return;
                                  p.ensure_grad();
                                  T g = n.grad[0] * inv;
                                  for (auto& v : p.grad) v += g;
                              });
}

// ---------------------------------------------------------------------------
// Channel concat / split and spatial crop (NHWC rank-4 tensors)
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
inline void require_rank4(const Tensor<T>& t, const char* op) {
    check(t.rank() == 4, std::string(op) + ": expected NHWC rank-4 tensor, got " +
                             shape_str(t.shape()));
}
}  // namespace detail

template <typename T>
inline Tensor<T> concat_c(const std::vector<Tensor<T>>& parts) {
    check(!parts.empty(), "concat_c: no inputs");
    detail::require_rank4(parts[0], "concat_c");
    int n = parts[0].dim(0), h = parts[0].dim(1), w = parts[0].dim(2);
    int ctotal = 0;
    std::vector<int> coff;
    for (const auto& p : parts) {
        detail::require_rank4(p, "concat_c");
        check(p.dim(0) == n && p.dim(1) == h && p.dim(2) == w,
              "concat_c: spatial/batch mismatch " + shape_str(p.shape()) + " vs " +
                  shape_str(parts[0].shape()));
        coff.push_back(ctotal);
        ctotal += p.dim(3);
    }
    std::vector<T> out(size_t(n) * h * w * ctotal);
    long pixels = long(n) * h * w;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const T* src = parts[pi].data().data();
        int pc = parts[pi].dim(3);
        int off = coff[pi];
        for (long px = 0; px < pixels; ++px)
            for (int c = 0; c < pc; ++c) out[size_t(px * ctotal + off + c)] = src[px * pc + c];
    }
    std::vector<int> pcs;
    for (const auto& p : parts) pcs.push_back(p.dim(3));
    return detail::make_op<T>(
        "concat_c", Shape{n, h, w, ctotal}, std::move(out), parts,
        [pixels, ctotal, pcs, coff](Node<T>& nd) {
            for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
                auto& p = *nd.parents[pi];
                if (!p.requires_grad) continue;
                p.ensure_grad();
                int pc = pcs[pi], off = coff[pi];
                for (long px = 0; px < pixels; ++px)
                    for (int c = 0; c < pc; ++c)
                        p.grad[size_t(px * pc + c)] += nd.grad[size_t(px * ctotal + off + c)];
            }
        });
}

template <typename T>
inline std::vector<Tensor<T>> split_c(const Tensor<T>& t, const std::vector<int>& sizes) {
    detail::require_rank4(t, "split_c");
    int ctotal = t.dim(3);
    int acc = 0;
    for (int s : sizes) acc += s;
    check(acc == ctotal, "split_c: sizes sum " + std::to_string(acc) + " != channels " +
                             std::to_string(ctotal));
    int n = t.dim(0), h = t.dim(1), w = t.dim(2);
    long pixels = long(n) * h * w;
    std::vector<Tensor<T>> outs;
    int off = 0;
    for (int s : sizes) {
        std::vector<T> val(size_t(pixels) * s);
        const T* src = t.data().data();
        for (long px = 0; px < pixels; ++px)
            for (int c = 0; c < s; ++c) val[size_t(px * s + c)] = src[px * ctotal + off + c];
        int off_copy = off, s_copy = s;
        outs.push_back(detail::make_op<T>(
            "split_c", Shape{n, h, w, s}, std::move(val), {t},
            [pixels, ctotal, off_copy, s_copy](Node<T>& nd) {
                auto& p = *nd.parents[0];
                if (!p.requires_grad) return;
                p.ensure_grad();
                for (long px = 0; px < pixels; ++px)
                    for (int c = 0; c < s_copy; ++c)
                        p.grad[size_t(px * ctotal + off_copy + c)] +=
                            nd.grad[size_t(px * s_copy + c)];
            }));
        off += s;
    }
    return outs;
}

template <typename T>
inline Tensor<T> crop(const Tensor<T>& t, int y0, int x0, int h, int w) {
    detail::require_rank4(t, "crop");
    int n = t.dim(0), ih = t.dim(1), iw = t.dim(2), c = t.dim(3);
    check(y0 >= 0 && x0 >= 0 && h >= 1 && w >= 1 && y0 + h <= ih && x0 + w <= iw,
          "crop: window [" + std::to_string(y0) + "," + std::to_string(x0) + "," +
              std::to_string(h) + "," + std::to_string(w) + "] outside " + shape_str(t.shape()));
    std::vector<T> out(size_t(n) * h * w * c);
    const T* src = t.data().data();
    for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch)
                    out[size_t((((long(b) * h + y) * w) + x) * c + ch)] =
                        src[size_t((((long(b) * ih + y0 + y) * iw) + x0 + x) * c + ch)];
    return detail::make_op<T>(
        "crop", Shape{n, h, w, c}, std::move(out), {t}, [=](Node<T>& nd) {
            auto& p = *nd.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int b = 0; b < n; ++b)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        for (int ch = 0; ch < c; ++ch)
                            p.grad[size_t((((long(b) * ih + y0 + y) * iw) + x0 + x) * c + ch)] +=
                                nd.grad[size_t((((long(b) * h + y) * w) + x) * c + ch)];
        });
}

// ---------------------------------------------------------------------------
// Gaussian prior helpers
// ---------------------------------------------------------------------------

template <typename T>
inline Tensor<T> gaussian_sample(const Shape& shape, uint64_t seed) {
    return Tensor<T>::from(shape, gaussian_buffer<T>(shape_numel(shape), seed));
}

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log p(z) under the isotropic standard Gaussian: -(|z|^2 + K log 2pi) / 2.
template <typename T>
inline Tensor<T> gaussian_logpdf(const Tensor<T>& z) {
    Tensor<T> s = sum(square(z));
    return mul_scalar(add_scalar(s, T(double(z.numel()) * kLog2Pi)), T(-0.5));
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Repeated calls accumulate into
// parameter grads; zero them between steps.
template <typename T>
inline void backward(const Tensor<T>& loss) {
    check(loss.numel() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
    check(loss.attached(), "backward: loss is not attached to the tape");

    // Iterative post-order DFS yields a topological order of the graph.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    struct Frame {
        Node<T>* n;
        size_t next;
    };
    std::vector<Frame> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            Node<T>* p = f.n->parents[f.next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

}  // namespace irn
