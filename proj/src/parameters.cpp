#include "srt/parameters.hpp"

namespace srt {

Parameter& ParameterStore::add(const std::string& name, Matrix value) {
    if (params_.count(name) != 0) fail(ErrorCode::kInvalidConfig, "duplicate parameter " + name);
    Parameter p;
    p.name = name;
    p.value = std::move(value);
    return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorCode::kConfigMismatch, "unknown parameter " + name);
    return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorCode::kConfigMismatch, "unknown parameter " + name);
    return it->second;
}

std::vector<std::string> ParameterStore::names(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, p] : params_) {
        if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
    }
    return out;
}

size_t ParameterStore::count_values(const std::string& prefix) const {
    size_t n = 0;
    for (const auto& [name, p] : params_) {
        if (name.compare(0, prefix.size(), prefix) == 0) n += static_cast<size_t>(p.value.size());
    }
    return n;
}

void ParameterStore::set_trainable(const std::set<std::string>& names) {
    for (const auto& n : names) {
        if (params_.count(n) == 0) fail(ErrorCode::kConfigMismatch, "unknown parameter " + n);
    }
    for (auto& [name, p] : params_) {
        p.trainable = names.count(name) != 0;
        if (!p.trainable) p.grad.resize(0, 0);
    }
}

std::set<std::string> ParameterStore::trainable_names() const {
    std::set<std::string> out;
    for (const auto& [name, p] : params_) {
        if (p.trainable) out.insert(name);
    }
    return out;
}

void ParameterStore::zero_grad() {
    for (auto& [name, p] : params_) {
        if (p.trainable) {
            p.grad.setZero(p.value.rows(), p.value.cols());
        }
    }
}

std::string namespace_of(const std::string& name) {
    const auto slash = name.find('/');
    return slash == std::string::npos ? std::string() : name.substr(0, slash);
}

Matrix truncated_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        double z = dist(rng);
        while (z < -2.0 || z > 2.0) z = dist(rng);
        m.data()[i] = round_to_float(z * stddev);
    }
    return m;
}

Rng component_rng(uint64_t seed, const std::string& component) {
    // FNV-1a over the component name, mixed with the run seed.
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : component) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(h), static_cast<uint32_t>(h >> 32)};
    return Rng(seq);
}

}  // namespace srt
