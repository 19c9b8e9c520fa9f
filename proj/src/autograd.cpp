#include "srt/autograd.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace srt {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidInput: return "InvalidInput";
        case ErrorCode::kConfigMismatch: return "ConfigMismatch";
        case ErrorCode::kInvalidToken: return "InvalidToken";
        case ErrorCode::kAlreadyWrapped: return "AlreadyWrapped";
        case ErrorCode::kInvalidSample: return "InvalidSample";
        case ErrorCode::kParseMiss: return "ParseMiss";
        case ErrorCode::kDivergence: return "DivergenceError";
        case ErrorCode::kInvalidConfig: return "InvalidConfig";
        case ErrorCode::kParseError: return "ParseError";
        case ErrorCode::kSchemaError: return "SchemaError";
        case ErrorCode::kInvalidSpec: return "InvalidSpec";
        case ErrorCode::kBatchTooLarge: return "BatchTooLarge";
        case ErrorCode::kIo: return "IoError";
    }
    return "Unknown";
}

std::string shape_string(const Matrix& m) {
    std::ostringstream os;
    os << "(" << m.rows() << " x " << m.cols() << ")";
    return os.str();
}

namespace ag {

const Matrix& Var::value() const { return graph_->value(*this); }

Var Graph::input(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::leaf(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, record_, {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::param(Parameter& p) {
    // Parameter leaves read p.value in place; the parameter must outlive the graph.
    nodes_.push_back(Node{Matrix(), {}, record_ && p.trainable, {}, &p});
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix Graph::grad(Var v) const {
    const Node& n = nodes_[static_cast<size_t>(v.id())];
    if (n.grad.size() == 0) return Matrix::Zero(v.rows(), v.cols());
    return n.grad;
}

Var Graph::emit(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return emit(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Graph::emit(Matrix value, std::span<const Var> parents, Backward backward) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || nodes_[static_cast<size_t>(p.id())].needs_grad;
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    if (needs) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Graph::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[static_cast<size_t>(v.id())];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

void Graph::backward(Var target) {
    Node& t = nodes_[static_cast<size_t>(target.id())];
    if (value(target).size() != 1) fail(ErrorCode::kInvalidInput, "backward target must be 1x1");
    if (!t.needs_grad) return;
    for (Node& n : nodes_) n.grad.resize(0, 0);
    t.grad = Matrix::Ones(1, 1);
    for (int i = target.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        if (n.backward) {
            // Closures only touch parents (lower ids), never append nodes.
            n.backward(*this, n.grad);
        } else if (n.param != nullptr && n.param->trainable) {
            if (n.param->grad.size() == 0) {
                n.param->grad = n.grad;
            } else {
                n.param->grad += n.grad;
            }
        }
    }
}

Var matmul(Var a, Var b) {
    Graph& g = *a.graph();
    if (a.cols() != b.rows()) {
        fail(ErrorCode::kConfigMismatch,
             "matmul shape mismatch " + shape_string(a.value()) + " * " + shape_string(b.value()));
    }
    Matrix out = a.value() * b.value();
    return g.emit(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& go) {
        if (gr.needs_grad(a)) gr.accumulate(a, go * b.value().transpose());
        if (gr.needs_grad(b)) gr.accumulate(b, a.value().transpose() * go);
    });
}

Var matmul_nt(Var a, Var b) {
    Graph& g = *a.graph();
    if (a.cols() != b.cols()) {
        fail(ErrorCode::kConfigMismatch,
             "matmul_nt shape mismatch " + shape_string(a.value()) + " * " +
                 shape_string(b.value()) + "^T");
    }
    Matrix out = a.value() * b.value().transpose();
    return g.emit(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& go) {
        if (gr.needs_grad(a)) gr.accumulate(a, go * b.value());
        if (gr.needs_grad(b)) gr.accumulate(b, go.transpose() * a.value());
    });
}

Var add(Var a, Var b) {
    Graph& g = *a.graph();
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorCode::kConfigMismatch,
             "add shape mismatch " + shape_string(a.value()) + " + " + shape_string(b.value()));
    }
    Matrix out = a.value() + b.value();
    return g.emit(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& go) {
        gr.accumulate(a, go);
        gr.accumulate(b, go);
    });
}

Var add_row(Var a, Var row) {
    Graph& g = *a.graph();
    if (row.rows() != 1 || row.cols() != a.cols()) {
        fail(ErrorCode::kConfigMismatch, "add_row shape mismatch " + shape_string(a.value()) +
                                             " + " + shape_string(row.value()));
    }
    Matrix out = a.value().rowwise() + row.value().row(0);
    return g.emit(std::move(out), {a, row}, [a, row](Graph& gr, const Matrix& go) {
        gr.accumulate(a, go);
        if (gr.needs_grad(row)) gr.accumulate(row, go.colwise().sum());
    });
}

Var scale(Var a, double s) {
    Graph& g = *a.graph();
    Matrix out = a.value() * s;
    return g.emit(std::move(out), {a}, [a, s](Graph& gr, const Matrix& go) {
        gr.accumulate(a, go * s);
    });
}

Var relu(Var a) {
    Graph& g = *a.graph();
    Matrix out = a.value().cwiseMax(0.0);
    return g.emit(std::move(out), {a}, [a](Graph& gr, const Matrix& go) {
        gr.accumulate(a, (a.value().array() > 0.0).select(go, 0.0));
    });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
    Graph& g = *a.graph();
    const Matrix& x = a.value();
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        out.data()[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    }
    return g.emit(std::move(out), {a}, [a](Graph& gr, const Matrix& go) {
        const Matrix& xv = a.value();
        Matrix d(xv.rows(), xv.cols());
        for (Eigen::Index i = 0; i < xv.size(); ++i) {
            const double v = xv.data()[i];
            const double u = kGeluC * (v + kGeluA * v * v * v);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            d.data()[i] = go.data()[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
        }
        gr.accumulate(a, d);
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    Graph& g = *x.graph();
    const Matrix& xv = x.value();
    const Eigen::Index n = xv.cols();
    if (gamma.cols() != n || beta.cols() != n) {
        fail(ErrorCode::kConfigMismatch, "layer_norm width mismatch");
    }
    Matrix xhat(xv.rows(), n);
    RowVector inv_std(xv.rows());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const double mean = xv.row(i).mean();
        const double var = (xv.row(i).array() - mean).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
    }
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                 beta.value().row(0).array();
    return g.emit(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat, inv_std](Graph& gr, const Matrix& go) {
                      if (gr.needs_grad(gamma)) {
                          gr.accumulate(gamma, (go.array() * xhat.array()).colwise().sum().matrix());
                      }
                      if (gr.needs_grad(beta)) gr.accumulate(beta, go.colwise().sum());
                      if (gr.needs_grad(x)) {
                          const Matrix dxhat = go.array().rowwise() * gamma.value().row(0).array();
                          Matrix dx(dxhat.rows(), dxhat.cols());
                          for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                              const double m1 = dxhat.row(i).mean();
                              const double m2 = dxhat.row(i).dot(xhat.row(i)) /
                                                static_cast<double>(dxhat.cols());
                              dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 -
                                                        xhat.row(i).array() * m2);
                          }
                          gr.accumulate(x, dx);
                      }
                  });
}

Var softmax_rows(Var scores, bool causal, Eigen::Index causal_offset) {
    Graph& g = *scores.graph();
    const Matrix& s = scores.value();
    Matrix p = Matrix::Zero(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const Eigen::Index limit = causal ? std::min<Eigen::Index>(s.cols(), i + causal_offset + 1)
                                          : s.cols();
        double mx = s(i, 0);
        for (Eigen::Index j = 1; j < limit; ++j) mx = std::max(mx, s(i, j));
        double z = 0.0;
        for (Eigen::Index j = 0; j < limit; ++j) {
            p(i, j) = std::exp(s(i, j) - mx);
            z += p(i, j);
        }
        for (Eigen::Index j = 0; j < limit; ++j) p(i, j) /= z;
    }
    Matrix pc = p;
    return g.emit(std::move(p), {scores}, [scores, pc](Graph& gr, const Matrix& go) {
        Matrix d(pc.rows(), pc.cols());
        for (Eigen::Index i = 0; i < pc.rows(); ++i) {
            const double dot = go.row(i).dot(pc.row(i));
            d.row(i) = pc.row(i).array() * (go.row(i).array() - dot);
        }
        gr.accumulate(scores, d);
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) fail(ErrorCode::kInvalidInput, "concat_rows of nothing");
    Graph& g = *parts.front().graph();
    const Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != cols) fail(ErrorCode::kConfigMismatch, "concat_rows width mismatch");
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::vector<Eigen::Index> offsets;
    Eigen::Index r = 0;
    for (const Var& p : parts) {
        offsets.push_back(r);
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return g.emit(std::move(out), parts, [ps, offsets](Graph& gr, const Matrix& go) {
        for (size_t k = 0; k < ps.size(); ++k) {
            if (gr.needs_grad(ps[k])) gr.accumulate(ps[k], go.middleRows(offsets[k], ps[k].rows()));
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) fail(ErrorCode::kInvalidInput, "concat_cols of nothing");
    Graph& g = *parts.front().graph();
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) fail(ErrorCode::kConfigMismatch, "concat_cols height mismatch");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::vector<Eigen::Index> offsets;
    Eigen::Index c = 0;
    for (const Var& p : parts) {
        offsets.push_back(c);
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return g.emit(std::move(out), parts, [ps, offsets](Graph& gr, const Matrix& go) {
        for (size_t k = 0; k < ps.size(); ++k) {
            if (gr.needs_grad(ps[k])) gr.accumulate(ps[k], go.middleCols(offsets[k], ps[k].cols()));
        }
    });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    Graph& g = *a.graph();
    if (start < 0 || count < 0 || start + count > a.rows()) {
        fail(ErrorCode::kInvalidInput, "slice_rows out of range");
    }
    Matrix out = a.value().middleRows(start, count);
    return g.emit(std::move(out), {a}, [a, start, count](Graph& gr, const Matrix& go) {
        Matrix d = Matrix::Zero(a.rows(), a.cols());
        d.middleRows(start, count) = go;
        gr.accumulate(a, d);
    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    Graph& g = *a.graph();
    if (start < 0 || count < 0 || start + count > a.cols()) {
        fail(ErrorCode::kInvalidInput, "slice_cols out of range");
    }
    Matrix out = a.value().middleCols(start, count);
    return g.emit(std::move(out), {a}, [a, start, count](Graph& gr, const Matrix& go) {
        Matrix d = Matrix::Zero(a.rows(), a.cols());
        d.middleCols(start, count) = go;
        gr.accumulate(a, d);
    });
}

Var gather_rows(Var table, std::span<const int> ids) {
    Graph& g = *table.graph();
    const Matrix& t = table.value();
    Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= t.rows()) {
            fail(ErrorCode::kInvalidToken, "token id " + std::to_string(ids[i]) + " out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
    }
    std::vector<int> idv(ids.begin(), ids.end());
    return g.emit(std::move(out), {table}, [table, idv](Graph& gr, const Matrix& go) {
        Matrix d = Matrix::Zero(table.rows(), table.cols());
        for (size_t i = 0; i < idv.size(); ++i) d.row(idv[i]) += go.row(static_cast<Eigen::Index>(i));
        gr.accumulate(table, d);
    });
}

Var mul_const(Var a, const Matrix& mask) {
    Graph& g = *a.graph();
    Matrix out = a.value().cwiseProduct(mask);
    return g.emit(std::move(out), {a}, [a, mask](Graph& gr, const Matrix& go) {
        gr.accumulate(a, go.cwiseProduct(mask));
    });
}

Var sum(Var a) {
    Graph& g = *a.graph();
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return g.emit(std::move(out), {a}, [a](Graph& gr, const Matrix& go) {
        gr.accumulate(a, Matrix::Constant(a.rows(), a.cols(), go(0, 0)));
    });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
    Graph& g = *logits.graph();
    const Matrix& z = logits.value();
    if (static_cast<Eigen::Index>(targets.size()) != z.rows()) {
        fail(ErrorCode::kInvalidInput, "cross_entropy target count mismatch");
    }
    Matrix probs(z.rows(), z.cols());
    double total = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double mx = z.row(i).maxCoeff();
        double zsum = 0.0;
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            probs(i, j) = std::exp(z(i, j) - mx);
            zsum += probs(i, j);
        }
        probs.row(i) /= zsum;
        const int t = targets[static_cast<size_t>(i)];
        if (t < 0) continue;
        if (t >= z.cols()) fail(ErrorCode::kInvalidToken, "target id out of range");
        total += -(z(i, t) - mx - std::log(zsum));
        ++counted;
    }
    if (counted == 0) fail(ErrorCode::kInvalidInput, "cross_entropy with no counted targets");
    Matrix out(1, 1);
    out(0, 0) = total / counted;
    std::vector<int> tv(targets.begin(), targets.end());
    return g.emit(std::move(out), {logits},
                  [logits, probs, tv, counted](Graph& gr, const Matrix& go) {
                      Matrix d = Matrix::Zero(probs.rows(), probs.cols());
                      const double w = go(0, 0) / counted;
                      for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                          const int t = tv[static_cast<size_t>(i)];
                          if (t < 0) continue;
                          d.row(i) = probs.row(i) * w;
                          d(i, t) -= w;
                      }
                      gr.accumulate(logits, d);
                  });
}

Var multi_head_attention(Var q, Var k, Var v, int heads, bool causal) {
    Graph& g = *q.graph();
    const Eigen::Index width = q.cols();
    if (heads <= 0 || width % heads != 0) {
        fail(ErrorCode::kConfigMismatch, "attention width not divisible by heads");
    }
    if (k.cols() != width || v.cols() != width || k.rows() != v.rows()) {
        fail(ErrorCode::kConfigMismatch, "attention q/k/v shape mismatch");
    }
    const Eigen::Index dh = width / heads;
    const Eigen::Index nq = q.rows();
    const Eigen::Index nk = k.rows();
    const Eigen::Index offset = nk - nq;
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    auto probs = std::make_shared<std::vector<Matrix>>(static_cast<size_t>(heads));
    Matrix out(nq, width);
    for (int h = 0; h < heads; ++h) {
        Matrix sc = (q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose()) * s;
        Matrix& p = (*probs)[static_cast<size_t>(h)];
        p = Matrix::Zero(nq, nk);
        for (Eigen::Index i = 0; i < nq; ++i) {
            const Eigen::Index limit = causal ? std::min<Eigen::Index>(nk, i + offset + 1) : nk;
            double mx = sc(i, 0);
            for (Eigen::Index j = 1; j < limit; ++j) mx = std::max(mx, sc(i, j));
            double z = 0.0;
            for (Eigen::Index j = 0; j < limit; ++j) {
                p(i, j) = std::exp(sc(i, j) - mx);
                z += p(i, j);
            }
            p.row(i).head(limit) /= z;
        }
        out.middleCols(h * dh, dh) = p * v.value().middleCols(h * dh, dh);
    }
    return g.emit(std::move(out), {q, k, v},
                  [q, k, v, heads, dh, s, probs](Graph& gr, const Matrix& go) {
                      Matrix dq = Matrix::Zero(q.rows(), q.cols());
                      Matrix dk = Matrix::Zero(k.rows(), k.cols());
                      Matrix dv = Matrix::Zero(v.rows(), v.cols());
                      for (int h = 0; h < heads; ++h) {
                          const Matrix& p = (*probs)[static_cast<size_t>(h)];
                          const auto goh = go.middleCols(h * dh, dh);
                          dv.middleCols(h * dh, dh).noalias() += p.transpose() * goh;
                          Matrix dp = goh * v.value().middleCols(h * dh, dh).transpose();
                          for (Eigen::Index i = 0; i < p.rows(); ++i) {
                              const double dot = dp.row(i).dot(p.row(i));
                              dp.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
                          }
                          dq.middleCols(h * dh, dh).noalias() += (dp * k.value().middleCols(h * dh, dh)) * s;
                          dk.middleCols(h * dh, dh).noalias() += (dp.transpose() * q.value().middleCols(h * dh, dh)) * s;
                      }
                      gr.accumulate(q, dq);
                      gr.accumulate(k, dk);
                      gr.accumulate(v, dv);
                  });
}

}  // namespace ag
}  // namespace srt
