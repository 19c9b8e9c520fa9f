#include "srt/layers.hpp"

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include <cmath>

namespace srt {

Linear Linear::make(ParameterStore& store, const std::string& name, int in, int out,
                    double stddev, Rng& rng, bool with_bias) {
    Linear l;
    l.weight = &store.add(name + ".weight", truncated_normal(in, out, stddev, rng));
    if (with_bias) l.bias = &store.add(name + ".bias", Matrix::Zero(1, out));
    return l;
}

ag::Var Linear::operator()(ag::Graph& g, ag::Var x, const ForwardMode& mode) const {
    ag::Var y = ag::matmul(x, g.param(*weight));
    if (bias != nullptr) y = ag::add_row(y, g.param(*bias));
    if (lora.active()) {
        ag::Var xd = x;
        if (mode.training && lora.dropout > 0.0) {
            if (mode.dropout_rng == nullptr) fail(ErrorCode::kInvalidConfig, "dropout without rng");
            std::bernoulli_distribution keep(1.0 - lora.dropout);
            Matrix mask(x.rows(), x.cols());
            const double inv = 1.0 / (1.0 - lora.dropout);
            for (Eigen::Index i = 0; i < mask.size(); ++i) {
                mask.data()[i] = keep(*mode.dropout_rng) ? inv : 0.0;
            }
            xd = ag::mul_const(x, mask);
        }
        ag::Var delta = ag::matmul(ag::matmul(xd, g.param(*lora.a)), g.param(*lora.b));
        y = ag::add(y, ag::scale(delta, lora.scale));
    }
    return y;
}

void Linear::apply(const Matrix& x, Matrix& y) const {
    dense_rows(x, weight->value, bias != nullptr ? &bias->value : nullptr, y);
    if (lora.active()) {
        Matrix xa;
        Matrix delta;
        dense_rows(x, lora.a->value, nullptr, xa);
        dense_rows(xa, lora.b->value, nullptr, delta);
        y += delta * lora.scale;
    }
}

LayerNorm LayerNorm::make(ParameterStore& store, const std::string& name, int width) {
    LayerNorm ln;
    ln.gamma = &store.add(name + ".gamma", Matrix::Ones(1, width));
    ln.beta = &store.add(name + ".beta", Matrix::Zero(1, width));
    return ln;
}

ag::Var LayerNorm::operator()(ag::Graph& g, ag::Var x) const {
    return ag::layer_norm(x, g.param(*gamma), g.param(*beta));
}

void LayerNorm::apply(const Matrix& x, Matrix& y) const {
    constexpr double kEps = 1e-5;
    y.resize(x.rows(), x.cols());
    const Eigen::Index n = x.cols();
    const double* gm = gamma->value.data();
    const double* bt = beta->value.data();
    // Sequential sums keep each row's result independent of the batch layout.
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double* xr = x.row(i).data();
        double* yr = y.row(i).data();
        double mean = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + kEps);
        for (Eigen::Index j = 0; j < n; ++j) yr[j] = (xr[j] - mean) * inv * gm[j] + bt[j];
    }
}

Attention Attention::make(ParameterStore& store, const std::string& name, int width, int heads,
                          double stddev, Rng& rng) {
    if (heads <= 0 || width % heads != 0) {
        fail(ErrorCode::kInvalidConfig, name + ": width " + std::to_string(width) +
                                            " not divisible by heads " + std::to_string(heads));
    }
    Attention a;
    a.q = Linear::make(store, name + ".q", width, width, stddev, rng);
    a.k = Linear::make(store, name + ".k", width, width, stddev, rng);
    a.v = Linear::make(store, name + ".v", width, width, stddev, rng);
    a.o = Linear::make(store, name + ".o", width, width, stddev, rng);
    a.heads = heads;
    return a;
}

ag::Var Attention::operator()(ag::Graph& g, ag::Var xq, ag::Var xkv, bool causal,
                              const ForwardMode& mode) const {
    ag::Var qv = q(g, xq, mode);
    ag::Var kv = k(g, xkv, mode);
    ag::Var vv = v(g, xkv, mode);
    return o(g, ag::multi_head_attention(qv, kv, vv, heads, causal), mode);
}

FeedForward FeedForward::make(ParameterStore& store, const std::string& name, int width,
                              int hidden, double stddev, Rng& rng) {
    FeedForward f;
    f.fc1 = Linear::make(store, name + ".fc1", width, hidden, stddev, rng);
    f.fc2 = Linear::make(store, name + ".fc2", hidden, width, stddev, rng);
    return f;
}

ag::Var FeedForward::operator()(ag::Graph& g, ag::Var x, const ForwardMode& mode) const {
    return fc2(g, ag::gelu(fc1(g, x, mode)), mode);
}

TransformerBlock TransformerBlock::make(ParameterStore& store, const std::string& name,
                                        int width, int heads, int hidden, double stddev,
                                        Rng& rng) {
    TransformerBlock b;
    b.ln1 = LayerNorm::make(store, name + ".ln1", width);
    b.attn = Attention::make(store, name + ".attn", width, heads, stddev, rng);
    b.ln2 = LayerNorm::make(store, name + ".ln2", width);
    b.ffn = FeedForward::make(store, name + ".ffn", width, hidden, stddev, rng);
    return b;
}

ag::Var TransformerBlock::operator()(ag::Graph& g, ag::Var x, bool causal,
                                     const ForwardMode& mode) const {
    ag::Var h = ln1(g, x);
    x = ag::add(x, attn(g, h, h, causal, mode));
    return ag::add(x, ffn(g, ln2(g, x), mode));
}

namespace {

// y[r, j0:j0+C] for R rows starting at r0. Accumulators start at zero and add
// x*w in k order, the same arithmetic for every tile shape.
template <int R, int C>
inline void dense_tile(const double* x, Eigen::Index ldx, const double* w, Eigen::Index ldw,
                       Eigen::Index depth, double* y, Eigen::Index ldy) {
    double acc[R][C] = {};
    for (Eigen::Index k = 0; k < depth; ++k) {
        const double* wr = w + k * ldw;
        for (int r = 0; r < R; ++r) {
            const double a = x[r * ldx + k];
            for (int c = 0; c < C; ++c) acc[r][c] += a * wr[c];
        }
    }
    for (int r = 0; r < R; ++r) {
        for (int c = 0; c < C; ++c) y[r * ldy + c] = acc[r][c];
    }
}

#if defined(__SSE2__)
// 4 x 4 tile held in eight SSE registers; same per-element order as above
// (separate multiply and add, k ascending).
inline void dense_tile_4x4(const double* x, Eigen::Index ldx, const double* w, Eigen::Index ldw,
                           Eigen::Index depth, double* y, Eigen::Index ldy) {
    __m128d c00 = _mm_setzero_pd(), c01 = _mm_setzero_pd();
    __m128d c10 = _mm_setzero_pd(), c11 = _mm_setzero_pd();
    __m128d c20 = _mm_setzero_pd(), c21 = _mm_setzero_pd();
    __m128d c30 = _mm_setzero_pd(), c31 = _mm_setzero_pd();
    const double* x0 = x;
    const double* x1 = x + ldx;
    const double* x2 = x + 2 * ldx;
    const double* x3 = x + 3 * ldx;
    for (Eigen::Index k = 0; k < depth; ++k) {
        const double* wr = w + k * ldw;
        const __m128d w0 = _mm_loadu_pd(wr);
        const __m128d w1 = _mm_loadu_pd(wr + 2);
        __m128d a = _mm_set1_pd(x0[k]);
        c00 = _mm_add_pd(c00, _mm_mul_pd(a, w0));
        c01 = _mm_add_pd(c01, _mm_mul_pd(a, w1));
        a = _mm_set1_pd(x1[k]);
        c10 = _mm_add_pd(c10, _mm_mul_pd(a, w0));
        c11 = _mm_add_pd(c11, _mm_mul_pd(a, w1));
        a = _mm_set1_pd(x2[k]);
        c20 = _mm_add_pd(c20, _mm_mul_pd(a, w0));
        c21 = _mm_add_pd(c21, _mm_mul_pd(a, w1));
        a = _mm_set1_pd(x3[k]);
        c30 = _mm_add_pd(c30, _mm_mul_pd(a, w0));
        c31 = _mm_add_pd(c31, _mm_mul_pd(a, w1));
    }
    _mm_storeu_pd(y, c00);
    _mm_storeu_pd(y + 2, c01);
    _mm_storeu_pd(y + ldy, c10);
    _mm_storeu_pd(y + ldy + 2, c11);
    _mm_storeu_pd(y + 2 * ldy, c20);
    _mm_storeu_pd(y + 2 * ldy + 2, c21);
    _mm_storeu_pd(y + 3 * ldy, c30);
    _mm_storeu_pd(y + 3 * ldy + 2, c31);
}
#endif

template <int R>
void dense_block(const double* x, Eigen::Index ldx, const Matrix& w, Eigen::Index depth, double* y,
                 Eigen::Index ldy) {
    const Eigen::Index n = w.cols();
    const double* wd = w.data();
    Eigen::Index j = 0;
    for (; j + 4 <= n; j += 4) {
#if defined(__SSE2__)
        if constexpr (R == 4) {
            dense_tile_4x4(x, ldx, wd + j, n, depth, y + j, ldy);
            continue;
        }
#endif
        dense_tile<R, 4>(x, ldx, wd + j, n, depth, y + j, ldy);
    }
    for (; j < n; ++j) dense_tile<R, 1>(x, ldx, wd + j, n, depth, y + j, ldy);
}

}  // namespace

void dense_rows(const Matrix& x, const Matrix& w, const Matrix* bias, Matrix& y) {
    if (x.cols() != w.rows()) {
        fail(ErrorCode::kConfigMismatch,
             "dense shape mismatch " + shape_string(x) + " * " + shape_string(w));
    }
    const Eigen::Index n = w.cols();
    const Eigen::Index depth = w.rows();
    const Eigen::Index rows = x.rows();
    y.resize(rows, n);
    // Register tiles reuse each loaded weight across a block of rows. Every
    // output element accumulates in plain k order, so a row's result never
    // depends on which other rows share its block.
    const double* xd = x.data();
    double* yd = y.data();
    Eigen::Index i = 0;
    for (; i + 4 <= rows; i += 4) dense_block<4>(xd + i * depth, depth, w, depth, yd + i * n, n);
    for (; i < rows; ++i) dense_block<1>(xd + i * depth, depth, w, depth, yd + i * n, n);
    if (bias != nullptr) {
        const double* br = bias->data();
        for (Eigen::Index r = 0; r < rows; ++r) {
            double* yr = yd + r * n;
            for (Eigen::Index j = 0; j < n; ++j) yr[j] += br[j];
        }
    }
}

void gelu_inplace(Matrix& x) {
    constexpr double kC = 0.7978845608028654;
    constexpr double kA = 0.044715;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        x.data()[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
    }
}

Matrix sinusoidal_positions(Eigen::Index rows, Eigen::Index width) {
    Matrix pe(rows, width);
    for (Eigen::Index pos = 0; pos < rows; ++pos) {
        for (Eigen::Index i = 0; i < width; ++i) {
            const double freq =
                std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
        }
    }
    return pe;
}

}  // namespace srt
