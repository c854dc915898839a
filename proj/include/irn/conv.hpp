#pragma once

#include <vector>

#include "irn/tensor.hpp"
#include "irn/threads.hpp"

namespace irn {
namespace gemm {

// C(M x N) = A(M x K) * B(K x N) [+ bias]. Each output row is produced by one
// thread with a fixed k-ascending accumulation order, so results do not depend
// on the thread count.
template <typename T>
inline void nn(const T* A, const T* B, T* C, long M, long K, long N, const T* bias) {
    parallel_blocks(M, [&](long i0, long i1) {
        std::vector<T> acc(static_cast<size_t>(N));
        for (long i = i0; i < i1; ++i) {
            if (bias)
                for (long j = 0; j < N; ++j) acc[size_t(j)] = bias[j];
            else
                for (long j = 0; j < N; ++j) acc[size_t(j)] = T(0);
            const T* __restrict a = A + i * K;
            for (long k = 0; k < K; ++k) {
                T av = a[k];
                const T* __restrict b = B + k * N;
                T* __restrict c = acc.data();
                for (long j = 0; j < N; ++j) c[j] += av * b[j];
            }
            T* out = C + i * N;
            for (long j = 0; j < N; ++j) out[j] = acc[size_t(j)];
        }
    });
}

// C(K x N) += A(M x K)^T * B(M x N). Partitioned over K so each C element is
// owned by one thread; accumulation runs over i ascending.
template <typename T>
inline void at_b_acc(const T* A, const T* B, T* C, long M, long K, long N) {
    parallel_blocks(K, [&](long k0, long k1) {
        for (long i = 0; i < M; ++i) {
            const T* __restrict a = A + i * K;
            const T* __restrict b = B + i * N;
            for (long k = k0; k < k1; ++k) {
                T av = a[k];
                T* __restrict c = C + k * N;
                for (long j = 0; j < N; ++j) c[j] += av * b[j];
            }
        }
    });
}

// C(M x K) [+]= A(M x N) * B(K x N)^T: rows of A dotted with rows of B.
template <typename T>
inline void a_bt(const T* A, const T* B, T* C, long M, long N, long K, bool accumulate) {
    parallel_blocks(M, [&](long i0, long i1) {
        for (long i = i0; i < i1; ++i) {
            const T* __restrict a = A + i * N;
            for (long k = 0; k < K; ++k) {
                const T* __restrict b = B + k * N;
                T acc = T(0);
                for (long j = 0; j < N; ++j) acc += a[j] * b[j];
                if (accumulate)
                    C[i * K + k] += acc;
                else
                    C[i * K + k] = acc;
            }
        }
    });
}

}  // namespace gemm

struct ConvSpec {
    int n, ih, iw, cin;
    int kh, kw, cout;
    int stride, pad;
    int oh, ow;
    long rows() const { return long(n) * oh * ow; }
    long cols() const { return long(kh) * kw * cin; }
};

namespace detail {

template <typename T>
inline ConvSpec conv_spec(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
    require_rank4(x, "conv2d");
    check(w.rank() == 4, "conv2d: weight must be (kh,kw,cin,cout), got " + shape_str(w.shape()));
    ConvSpec s;
    s.n = x.dim(0);
    s.ih = x.dim(1);
    s.iw = x.dim(2);
    s.cin = x.dim(3);
    s.kh = w.dim(0);
    s.kw = w.dim(1);
    s.cout = w.dim(3);
    s.stride = stride;
    s.pad = pad;
    check(w.dim(2) == s.cin, "conv2d: input channels " + std::to_string(s.cin) +
                                 " vs weight channels " + std::to_string(w.dim(2)));
    check(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
    s.oh = (s.ih + 2 * pad - s.kh) / stride + 1;
    s.ow = (s.iw + 2 * pad - s.kw) / stride + 1;
    check(s.oh >= 1 && s.ow >= 1, "conv2d: kernel larger than padded input");
    return s;
}

// Patch matrix: row (n, oy, ox) holds the receptive field in (kh, kw, cin)
// order, matching the weight layout. Out-of-bounds taps are zero.
template <typename T>
inline std::vector<T> im2col(const T* x, const ConvSpec& s) {
    long M = s.rows(), K = s.cols();
    std::vector<T> cols(size_t(M) * K);
    parallel_for(M, [&](long r) {
        long ow = r % s.ow;
        long oy = (r / s.ow) % s.oh;
        long n = r / (long(s.ow) * s.oh);
        T* dst = cols.data() + r * K;
        int iy0 = int(oy) * s.stride - s.pad;
        int ix0 = int(ow) * s.stride - s.pad;
        for (int ky = 0; ky < s.kh; ++ky) {
            int iy = iy0 + ky;
            for (int kx = 0; kx < s.kw; ++kx) {
                int ix = ix0 + kx;
                T* d = dst + (long(ky) * s.kw + kx) * s.cin;
                if (iy < 0 || iy >= s.ih || ix < 0 || ix >= s.iw) {
                    for (int c = 0; c < s.cin; ++c) d[c] = T(0);
                } else {
                    const T* src = x + ((long(n) * s.ih + iy) * s.iw + ix) * s.cin;
                    for (int c = 0; c < s.cin; ++c) d[c] = src[c];
                }
            }
        }
    });
    return cols;
}

// Scatter of the patch-matrix gradient back onto the input. Parallel over the
// batch only: rows of one image may touch overlapping input pixels.
template <typename T>
inline void col2im_acc(const T* dcols, const ConvSpec& s, T* dx) {
    parallel_for(s.n, [&](long n) {
        for (int oy = 0; oy < s.oh; ++oy)
            for (int ox = 0; ox < s.ow; ++ox) {
                long r = (n * s.oh + oy) * s.ow + ox;
                const T* src = dcols + r * s.cols();
                int iy0 = oy * s.stride - s.pad;
                int ix0 = ox * s.stride - s.pad;
                for (int ky = 0; ky < s.kh; ++ky) {
                    int iy = iy0 + ky;
                    if (iy < 0 || iy >= s.ih) continue;
                    for (int kx = 0; kx < s.kw; ++kx) {
                        int ix = ix0 + kx;
                        if (ix < 0 || ix >= s.iw) continue;
                        const T* sp = src + (long(ky) * s.kw + kx) * s.cin;
                        T* dp = dx + ((n * s.ih + iy) * s.iw + ix) * s.cin;
                        for (int c = 0; c < s.cin; ++c) dp[c] += sp[c];
                    }
                }
            }
    });
}

}  // namespace detail

// 2-D convolution, NHWC activations, (kh,kw,cin,cout) weights, optional bias.
// The patch matrix is rebuilt during backward instead of being cached.
template <typename T>
inline Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                        int stride = 1, int pad = 0) {
    ConvSpec s = detail::conv_spec(x, w, stride, pad);
    const T* bp = nullptr;
    if (bias.valid()) {
        check(bias.rank() == 1 && bias.dim(0) == s.cout,
              "conv2d: bias shape " + shape_str(bias.shape()) + " vs cout " +
                  std::to_string(s.cout));
        bp = bias.data().data();
    }
    std::vector<T> cols = detail::im2col(x.data().data(), s);
    std::vector<T> out(size_t(s.rows()) * s.cout);
    gemm::nn(cols.data(), w.data().data(), out.data(), s.rows(), s.cols(), s.cout, bp);
    cols.clear();
    cols.shrink_to_fit();

    std::vector<Tensor<T>> inputs = {x, w};
    if (bias.valid()) inputs.push_back(bias);
    bool has_bias = bias.valid();
    return detail::make_op<T>(
        "conv2d", Shape{s.n, s.oh, s.ow, s.cout}, std::move(out), std::move(inputs),
        [s, has_bias](Node<T>& nd) {
            auto& px = *nd.parents[0];
            auto& pw = *nd.parents[1];
            long M = s.rows(), K = s.cols(), N = s.cout;
            const T* dout = nd.grad.data();
            std::vector<T> cols;
            if (pw.requires_grad || px.requires_grad)
                cols = detail::im2col(px.value.data(), s);
            if (pw.requires_grad) {
                pw.ensure_grad();
                gemm::at_b_acc(cols.data(), dout, pw.grad.data(), M, K, N);
            }
            if (has_bias) {
                auto& pb = *nd.parents[2];
                if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (long i = 0; i < M; ++i)
                        for (long j = 0; j < N; ++j) pb.grad[size_t(j)] += dout[i * N + j];
                }
            }
            if (px.requires_grad) {
                px.ensure_grad();
                std::vector<T> dcols(size_t(M) * K);
                gemm::a_bt(dout, pw.value.data(), dcols.data(), M, N, K, false);
                detail::col2im_acc(dcols.data(), s, px.grad.data());
            }
        });
}

// Fully connected layer on (N, D) inputs; higher-rank inputs are treated as
// (batch, everything-else).
template <typename T>
inline Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    check(x.rank() >= 2, "linear: input rank must be >= 2");
    long batch = x.dim(0);
    long d = x.numel() / batch;
    check(w.rank() == 2 && w.dim(0) == d,
          "linear: weight " + shape_str(w.shape()) + " vs flattened input dim " +
              std::to_string(d));
    long m = w.dim(1);
    const T* bp = nullptr;
    if (bias.valid()) {
        check(bias.rank() == 1 && bias.dim(0) == m, "linear: bias shape mismatch");
        bp = bias.data().data();
    }
    std::vector<T> out(size_t(batch) * m);
    gemm::nn(x.data().data(), w.data().data(), out.data(), batch, d, m, bp);
    std::vector<Tensor<T>> inputs = {x, w};
    if (bias.valid()) inputs.push_back(bias);
    bool has_bias = bias.valid();
    return detail::make_op<T>(
        "linear", Shape{int(batch), int(m)}, std::move(out), std::move(inputs),
        [batch, d, m, has_bias](Node<T>& nd) {
            auto& px = *nd.parents[0];
            auto& pw = *nd.parents[1];
            const T* dout = nd.grad.data();
            if (pw.requires_grad) {
                pw.ensure_grad();
                gemm::at_b_acc(px.value.data(), dout, pw.grad.data(), batch, d, m);
            }
            if (has_bias) {
                auto& pb = *nd.parents[2];
                if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (long i = 0; i < batch; ++i)
                        for (long j = 0; j < m; ++j) pb.grad[size_t(j)] += dout[i * m + j];
                }
            }
            if (px.requires_grad) {
                px.ensure_grad();
                gemm::a_bt(dout, pw.value.data(), px.grad.data(), batch, m, d, true);
            }
        });
}

// Per-pixel channel mix y = W x over NHWC, used by the 1x1 invertible
// convolution. W is (cout, cin).
template <typename T>
inline Tensor<T> channel_matmul(const Tensor<T>& x, const Tensor<T>& w) {
    detail::require_rank4(x, "channel_matmul");
    check(w.rank() == 2, "channel_matmul: W must be rank 2");
    int cin = x.dim(3), cout = w.dim(0);
    check(w.dim(1) == cin, "channel_matmul: W " + shape_str(w.shape()) + " vs channels " +
                               std::to_string(cin));
    long px = x.numel() / cin;
    std::vector<T> out(size_t(px) * cout);
    gemm::a_bt(x.data().data(), w.data().data(), out.data(), px, cin, cout, false);
    return detail::make_op<T>(
        "channel_matmul", Shape{x.dim(0), x.dim(1), x.dim(2), cout}, std::move(out), {x, w},
        [px, cin, cout](Node<T>& nd) {
            auto& pxn = *nd.parents[0];
            auto& pwn = *nd.parents[1];
            const T* dout = nd.grad.data();
            if (pwn.requires_grad) {
                pwn.ensure_grad();
                gemm::at_b_acc(dout, pxn.value.data(), pwn.grad.data(), px, cout, cin);
            }
            if (pxn.requires_grad) {
                pxn.ensure_grad();
                std::vector<T> dx(size_t(px) * cin);
                gemm::nn(dout, pwn.value.data(), dx.data(), px, cout, cin, (const T*)nullptr);
                for (size_t i = 0; i < dx.size(); ++i) pxn.grad[i] += dx[i];
            }
        });
}

}  // namespace irn
