#include "srt/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>

namespace srt {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
    return hz / f_sp;
}

double mel_to_hz(double mel) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
    return f_sp * mel;
}

// FFTW planning is not thread-safe.
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

uint32_t read_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t read_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::ostream& os, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}
void put_u16(std::ostream& os, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
}

}  // namespace

Matrix mel_filterbank(const MelConfig& cfg) {
    const int n_bins = cfg.n_fft / 2 + 1;
    Matrix fb = Matrix::Zero(cfg.n_mels, n_bins);
    const double mel_lo = hz_to_mel(cfg.f_min);
    const double mel_hi = hz_to_mel(cfg.f_max);
    std::vector<double> pts(static_cast<size_t>(cfg.n_mels + 2));
    for (int i = 0; i < cfg.n_mels + 2; ++i) {
        pts[static_cast<size_t>(i)] =
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(cfg.n_mels + 1));
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = pts[static_cast<size_t>(m)];
        const double ce = pts[static_cast<size_t>(m + 1)];
        const double hi = pts[static_cast<size_t>(m + 2)];
        const double enorm = 2.0 / (hi - lo);
        for (int k = 0; k < n_bins; ++k) {
            const double f = k * static_cast<double>(cfg.sample_rate) / cfg.n_fft;
            const double up = (f - lo) / (ce - lo);
            const double down = (hi - f) / (hi - ce);
            fb(m, k) = std::max(0.0, std::min(up, down)) * enorm;
        }
    }
    return fb;
}

MelFeatures extract_features(const Waveform& w, const MelConfig& cfg) {
    if (w.samples.empty()) fail(ErrorCode::kInvalidInput, "empty waveform");
    if (w.sample_rate != cfg.sample_rate) {
        fail(ErrorCode::kInvalidInput, "sample rate " + std::to_string(w.sample_rate) +
                                           " != " + std::to_string(cfg.sample_rate) +
                                           " (resample first)");
    }
    const auto len = static_cast<Eigen::Index>(w.samples.size());
    const Eigen::Index n_frames = (len + cfg.hop - 1) / cfg.hop;
    const int n_fft = cfg.n_fft;
    const int n_bins = n_fft / 2 + 1;
    const int half = n_fft / 2;

    std::vector<double> window(static_cast<size_t>(n_fft));
    for (int i = 0; i < n_fft; ++i) window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft);

    auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<size_t>(n_fft)));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<size_t>(n_bins)));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        plan = fftw_plan_dft_r2c_1d(n_fft, in, out, FFTW_ESTIMATE);
    }

    const Matrix fb = mel_filterbank(cfg);
    MelFeatures f;
    f.hop_seconds = static_cast<double>(cfg.hop) / cfg.sample_rate;
    f.frames.resize(n_frames, cfg.n_mels);
    RowVector power(n_bins);
    for (Eigen::Index t = 0; t < n_frames; ++t) {
        const Eigen::Index start = t * cfg.hop - half;
        for (int i = 0; i < n_fft; ++i) {
            const Eigen::Index idx = start + i;
            const double s = (idx >= 0 && idx < len) ? w.samples[static_cast<size_t>(idx)] : 0.0;
            in[i] = s * window[static_cast<size_t>(i)];
        }
        fftw_execute(plan);
        for (int k = 0; k < n_bins; ++k) power(k) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
        for (int m = 0; m < cfg.n_mels; ++m) {
            const double e = fb.row(m).dot(power);
            f.frames(t, m) = std::log10(std::max(e, 1e-10));
        }
    }
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return f;
}

Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::kIo, "cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
        std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
        fail(ErrorCode::kParseError, path + ": not a RIFF/WAVE file");
    }
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const unsigned char* data = nullptr;
    size_t data_len = 0;
    size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const uint32_t size = read_u32(&buf[pos + 4]);
        const unsigned char* body = &buf[pos + 8];
        const size_t avail = std::min<size_t>(size, buf.size() - pos - 8);
        if (std::memcmp(&buf[pos], "fmt ", 4) == 0 && avail >= 16) {
            format = read_u16(body);
            channels = read_u16(body + 2);
            rate = read_u32(body + 4);
            bits = read_u16(body + 14);
            if (format == 0xFFFE && avail >= 26) format = read_u16(body + 24);
        } else if (std::memcmp(&buf[pos], "data", 4) == 0) {
            data = body;
            data_len = avail;
        }
        pos += 8 + size + (size & 1u);
    }
    if (data == nullptr || rate == 0) fail(ErrorCode::kParseError, path + ": missing fmt or data chunk");
    if (channels != 1) fail(ErrorCode::kInvalidInput, path + ": only mono audio is supported");
    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    if (format == 1 && bits == 16) {
        w.samples.resize(data_len / 2);
        for (size_t i = 0; i < w.samples.size(); ++i) {
            const auto v = static_cast<int16_t>(read_u16(data + 2 * i));
            w.samples[i] = static_cast<float>(v) / 32768.0f;
        }
    } else if (format == 3 && bits == 32) {
        w.samples.resize(data_len / 4);
        for (size_t i = 0; i < w.samples.size(); ++i) {
            const uint32_t u = read_u32(data + 4 * i);
            float v;
            std::memcpy(&v, &u, 4);
            w.samples[i] = v;
        }
    } else {
        fail(ErrorCode::kInvalidInput, path + ": unsupported sample format (PCM16 or float32 only)");
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::kIo, "cannot write " + path);
    const auto n = static_cast<uint32_t>(w.samples.size());
    os.write("RIFF", 4);
    put_u32(os, 36 + n * 2);
    os.write("WAVEfmt ", 8);
    put_u32(os, 16);
    put_u16(os, 1);
    put_u16(os, 1);
    put_u32(os, static_cast<uint32_t>(w.sample_rate));
    put_u32(os, static_cast<uint32_t>(w.sample_rate) * 2);
    put_u16(os, 2);
    put_u16(os, 16);
    os.write("data", 4);
    put_u32(os, n * 2);
    for (float s : w.samples) {
        const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
        put_u16(os, static_cast<uint16_t>(static_cast<int16_t>(std::lround(c * 32767.0))));
    }
    if (!os) fail(ErrorCode::kIo, "short write to " + path);
}

SpeechEncoder::SpeechEncoder(ParameterStore& store, const EncoderConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
    if (cfg_.backend == "external") {
        fail(ErrorCode::kInvalidConfig,
             "the external encoder backend is not available in this build; use 'standin'");
    }
    if (cfg_.backend != "standin") {
        fail(ErrorCode::kInvalidConfig, "unknown encoder backend '" + cfg_.backend + "'");
    }
    if (cfg_.n_mels < 1 || cfg_.dim < 1 || cfg_.layers < 0 || cfg_.stride < 1 || cfg_.ffn < 1) {
        fail(ErrorCode::kInvalidConfig, "encoder dims must be positive");
    }
    Rng rng = component_rng(seed, "encoder");
    in_proj_ = Linear::make(store, "encoder/in_proj", cfg_.n_mels, cfg_.dim,
                            1.0 / std::sqrt(static_cast<double>(cfg_.n_mels)), rng);
    for (int i = 0; i < cfg_.layers; ++i) {
        blocks_.push_back(TransformerBlock::make(store, "encoder/layers." + std::to_string(i),
                                                 cfg_.dim, cfg_.heads, cfg_.ffn,
                                                 1.0 / std::sqrt(static_cast<double>(cfg_.dim)), rng));
    }
    ln_out_ = LayerNorm::make(store, "encoder/ln_out", cfg_.dim);
}

Eigen::Index SpeechEncoder::output_steps(Eigen::Index n_frames) const {
    return (n_frames + cfg_.stride - 1) / cfg_.stride;
}

Matrix SpeechEncoder::encode(const MelFeatures& f) const {
    if (f.n_mels() != cfg_.n_mels) {
        fail(ErrorCode::kConfigMismatch, "features have " + std::to_string(f.n_mels()) +
                                             " mels, encoder expects " +
                                             std::to_string(cfg_.n_mels));
    }
    if (f.n_frames() < 1) fail(ErrorCode::kInvalidInput, "no feature frames");
    const Eigen::Index steps = output_steps(f.n_frames());
    Matrix pooled = Matrix::Zero(steps, cfg_.n_mels);
    for (Eigen::Index t = 0; t < steps; ++t) {
        const Eigen::Index lo = t * cfg_.stride;
        const Eigen::Index hi = std::min(f.n_frames(), lo + cfg_.stride);
        for (Eigen::Index r = lo; r < hi; ++r) pooled.row(t) += f.frames.row(r);
        pooled.row(t) /= static_cast<double>(hi - lo);
    }
    ag::Graph g(false);
    const ForwardMode mode;
    ag::Var x = in_proj_(g, g.input(std::move(pooled)), mode);
    x = ag::add(x, g.input(sinusoidal_positions(steps, cfg_.dim)));
    for (const auto& b : blocks_) x = b(g, x, false, mode);
    return ln_out_(g, x).value();
}

}  // namespace srt
