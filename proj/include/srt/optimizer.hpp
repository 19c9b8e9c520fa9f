#pragma once

#include "srt/parameters.hpp"

#include <map>
#include <string>

namespace srt {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
};

// Decoupled weight decay Adam. Moment buffers are created only for the
// parameters that were trainable when the optimizer was built.
class AdamW {
public:
    AdamW(ParameterStore& store, const AdamWConfig& cfg = {});

    // Applies one update with the gradients currently held by the store.
    // Returns the pre-clipping global gradient norm.
    double step(double lr);

    int64_t steps() const { return t_; }
    size_t slot_count() const { return slots_.size(); }
    bool has_slot(const std::string& name) const { return slots_.count(name) != 0; }

private:
    struct Slot {
        Parameter* param;
        Matrix m;
        Matrix v;
    };

    AdamWConfig cfg_;
    std::map<std::string, Slot> slots_;
    int64_t t_ = 0;
};

}  // namespace srt
