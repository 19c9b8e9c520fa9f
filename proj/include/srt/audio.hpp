#pragma once

#include "srt/layers.hpp"

#include <string>
#include <vector>

namespace srt {

struct Waveform {
    std::vector<float> samples;  // mono, [-1, 1]
    int sample_rate = 16000;
};

struct MelConfig {
    int sample_rate = 16000;
    int n_fft = 400;   // 25 ms
    int hop = 160;     // 10 ms
    int n_mels = 80;
    double f_min = 0.0;
    double f_max = 8000.0;
};

struct MelFeatures {
    Matrix frames;  // n_frames x n_mels
    double hop_seconds = 0.01;

    Eigen::Index n_frames() const { return frames.rows(); }
    Eigen::Index n_mels() const { return frames.cols(); }
};

// log10 floor for zero-energy bins.
inline constexpr double kLogMelFloor = -10.0;

// Slaney-style triangular filters, n_mels x (n_fft/2 + 1).
Matrix mel_filterbank(const MelConfig& cfg);

// Centered Hann-windowed STFT power spectrum projected onto the mel bank.
MelFeatures extract_features(const Waveform& w, const MelConfig& cfg = {});

Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

struct EncoderConfig {
    std::string backend = "standin";  // "external" is reserved for pretrained encoders
    int n_mels = 80;
    int dim = 128;
    int layers = 2;
    int heads = 4;
    int ffn = 512;
    int stride = 2;
};

// Frozen speech encoder H = Encoder(X). The stand-in average-pools frames by
// `stride`, projects to `dim`, adds sinusoidal positions and runs
// non-causal transformer blocks.
class SpeechEncoder {
public:
    SpeechEncoder(ParameterStore& store, const EncoderConfig& cfg, uint64_t seed);
    SpeechEncoder(const SpeechEncoder&) = delete;
    SpeechEncoder& operator=(const SpeechEncoder&) = delete;

    const EncoderConfig& config() const { return cfg_; }
    Eigen::Index output_steps(Eigen::Index n_frames) const;
    Matrix encode(const MelFeatures& f) const;

private:
    EncoderConfig cfg_;
    Linear in_proj_;
    std::vector<TransformerBlock> blocks_;
    LayerNorm ln_out_;
};

}  // namespace srt
