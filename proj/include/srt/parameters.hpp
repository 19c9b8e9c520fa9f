#pragma once

#include "srt/autograd.hpp"

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace srt {

using Rng = std::mt19937_64;

// Named parameters grouped by namespace prefix ("encoder/", "adapter/", "llm/",
// "llm_lora/"). Element addresses are stable for the life of the store.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;

    Parameter& add(const std::string& name, Matrix value);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::vector<std::string> names(const std::string& prefix = "") const;
    size_t count_values(const std::string& prefix = "") const;

    // Marks exactly `names` trainable; everything else frozen.
    void set_trainable(const std::set<std::string>& names);
    std::set<std::string> trainable_names() const;
    void zero_grad();

    std::map<std::string, Parameter>& items() { return params_; }
    const std::map<std::string, Parameter>& items() const { return params_; }

private:
    std::map<std::string, Parameter> params_;
};

std::string namespace_of(const std::string& name);

// Truncated normal (cut at two standard deviations), rounded to float32.
Matrix truncated_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

// Independent deterministic stream for a named component.
Rng component_rng(uint64_t seed, const std::string& component);

}  // namespace srt
