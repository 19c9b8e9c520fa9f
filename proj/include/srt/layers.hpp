#pragma once

#include "srt/autograd.hpp"
#include "srt/parameters.hpp"

#include <string>

namespace srt {

struct ForwardMode {
    bool training = false;
    Rng* dropout_rng = nullptr;  // required when training with dropout > 0
};

struct LoraWeights {
    Parameter* a = nullptr;  // in x r, small random
    Parameter* b = nullptr;  // r x out, zero at injection
    double scale = 0.0;      // alpha / r
    double dropout = 0.0;

    bool active() const { return a != nullptr; }
};

// y = x W + b, optionally plus scale * dropout(x) A B.
struct Linear {
    Parameter* weight = nullptr;  // in x out
    Parameter* bias = nullptr;    // 1 x out, optional
    LoraWeights lora;

    static Linear make(ParameterStore& store, const std::string& name, int in, int out,
                       double stddev, Rng& rng, bool with_bias = true);

    Eigen::Index in() const { return weight->value.rows(); }
    Eigen::Index out() const { return weight->value.cols(); }

    ag::Var operator()(ag::Graph& g, ag::Var x, const ForwardMode& mode) const;
    // Inference path: per-row arithmetic is independent of how many rows are stacked.
    void apply(const Matrix& x, Matrix& y) const;
};

struct LayerNorm {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;

    static LayerNorm make(ParameterStore& store, const std::string& name, int width);
    ag::Var operator()(ag::Graph& g, ag::Var x) const;
    void apply(const Matrix& x, Matrix& y) const;
};

struct Attention {
    Linear q, k, v, o;
    int heads = 1;

    static Attention make(ParameterStore& store, const std::string& name, int width, int heads,
                          double stddev, Rng& rng);
    ag::Var operator()(ag::Graph& g, ag::Var xq, ag::Var xkv, bool causal,
                       const ForwardMode& mode) const;
};

struct FeedForward {
    Linear fc1, fc2;

    static FeedForward make(ParameterStore& store, const std::string& name, int width, int hidden,
                            double stddev, Rng& rng);
    ag::Var operator()(ag::Graph& g, ag::Var x, const ForwardMode& mode) const;
};

// Pre-norm self-attention block: x + Attn(LN(x)), then x + FFN(LN(x)).
struct TransformerBlock {
    LayerNorm ln1;
    Attention attn;
    LayerNorm ln2;
    FeedForward ffn;

    static TransformerBlock make(ParameterStore& store, const std::string& name, int width,
                                 int heads, int hidden, double stddev, Rng& rng);
    ag::Var operator()(ag::Graph& g, ag::Var x, bool causal, const ForwardMode& mode) const;
};

// y = x W (+ b) with a fixed k-ordered accumulation per output element.
void dense_rows(const Matrix& x, const Matrix& w, const Matrix* bias, Matrix& y);
void gelu_inplace(Matrix& x);
Matrix sinusoidal_positions(Eigen::Index rows, Eigen::Index width);

}  // namespace srt
