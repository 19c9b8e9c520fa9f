#include "srt/optimizer.hpp"

#include <cmath>

namespace srt {

AdamW::AdamW(ParameterStore& store, const AdamWConfig& cfg) : cfg_(cfg) {
    for (auto& [name, p] : store.items()) {
        if (!p.trainable) continue;
        slots_.emplace(name, Slot{&p, Matrix::Zero(p.value.rows(), p.value.cols()),
                                  Matrix::Zero(p.value.rows(), p.value.cols())});
    }
}

double AdamW::step(double lr) {
    double sq = 0.0;
    for (auto& [name, s] : slots_) {
        if (s.param->grad.size() == 0) s.param->grad = Matrix::Zero(s.param->value.rows(), s.param->value.cols());
        sq += s.param->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) fail(ErrorCode::kDivergence, "non-finite gradient norm");
    const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, s] : slots_) {
        Parameter& p = *s.param;
        const Matrix g = p.grad * clip;
        s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
        s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            const double mh = s.m.data()[i] / bc1;
            const double vh = s.v.data()[i] / bc2;
            double w = p.value.data()[i];
            w -= lr * cfg_.weight_decay * w;
            w -= lr * mh / (std::sqrt(vh) + cfg_.eps);
            p.value.data()[i] = round_to_float(w);
        }
    }
    return norm;
}

}  // namespace srt
