#include "srt/datasets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace srt {

namespace fs = std::filesystem;

namespace {

std::string field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) fail(ErrorCode::kSchemaError, where + ": missing field '" + key + "'");
    if (!j[key].is_string()) fail(ErrorCode::kSchemaError, where + ": field '" + key + "' must be a string");
    return j[key].get<std::string>();
}

std::optional<std::string> optional_field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) fail(ErrorCode::kSchemaError, where + ": field '" + key + "' must be a string");
    return j[key].get<std::string>();
}

void check_tag(const std::string& code, const TagRegistry& tags, const std::string& where) {
    if (!tags.find(code)) fail(ErrorCode::kSchemaError, where + ": unregistered language '" + code + "'");
}

// Character templates are keyed by byte value so every language shares them.
Matrix char_templates(const SyntheticSpec& spec) {
    Rng rng = component_rng(spec.seed, "synth/mel");
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix t(256, spec.n_mels);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = round_to_float(n(rng));
    return t;
}

std::vector<std::string> make_inventory(Rng& rng, int count, const std::string& consonants,
                                        const std::string& vowels, std::set<std::string>& used) {
    std::vector<std::string> words;
    std::uniform_int_distribution<int> syl(1, 2);
    std::uniform_int_distribution<size_t> ci(0, consonants.size() - 1);
    std::uniform_int_distribution<size_t> vi(0, vowels.size() - 1);
    int guard = 0;
    while (static_cast<int>(words.size()) < count) {
        if (++guard > 100000) fail(ErrorCode::kInvalidSpec, "cannot build a word inventory of that size");
        std::string w;
        const int n = syl(rng);
        for (int s = 0; s < n; ++s) {
            w.push_back(consonants[ci(rng)]);
            w.push_back(vowels[vi(rng)]);
        }
        if (used.insert(w).second) words.push_back(w);
    }
    return words;
}

}  // namespace

std::vector<ManifestRow> load_manifest(const std::string& path, const TagRegistry& tags) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::kIo, "cannot open manifest " + path);
    std::vector<ManifestRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::kParseError, where + ": " + e.what());
        }
        if (!j.is_object()) fail(ErrorCode::kParseError, where + ": expected a JSON object");
        ManifestRow r;
        r.audio = field(j, "audio", where);
        r.src = field(j, "src", where);
        r.transcription = field(j, "transcription", where);
        r.tgt = optional_field(j, "tgt", where);
        r.translation = optional_field(j, "translation", where);
        check_tag(r.src, tags, where);
        if (r.tgt) {
            check_tag(*r.tgt, tags, where);
            if (*r.tgt == r.src) fail(ErrorCode::kSchemaError, where + ": src and tgt are equal");
            if (!r.translation) fail(ErrorCode::kSchemaError, where + ": missing field 'translation'");
        } else if (r.translation) {
            fail(ErrorCode::kSchemaError, where + ": missing field 'tgt'");
        }
        if (contains_tag_surface(r.transcription, tags)) {
            fail(ErrorCode::kSchemaError, where + ": transcription contains a language tag");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail(ErrorCode::kIo, "cannot write " + path);
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["audio"] = r.audio;
        j["src"] = r.src;
        j["transcription"] = r.transcription;
        if (r.tgt) j["tgt"] = *r.tgt;
        if (r.translation) j["translation"] = *r.translation;
        os << j.dump() << "\n";
    }
    if (!os) fail(ErrorCode::kIo, "short write to " + path);
}

SrtSample to_sample(const ManifestRow& row, const TagRegistry& tags) {
    SrtSample s;
    s.audio_ref = row.audio;
    s.src = tags.require(row.src);
    if (row.tgt) s.tgt = tags.require(*row.tgt);
    s.transcription = row.transcription;
    s.translation = row.translation;
    return s;
}

MelFeatures FeatureStore::get(const std::string& audio_ref, const std::string& base_dir) {
    const auto hash = audio_ref.find('#');
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() || base_dir.empty() ? fp.string() : (fs::path(base_dir) / fp).string();
    };
    MelFeatures f;
    if (hash != std::string::npos) {
        const std::string file = resolve(audio_ref.substr(0, hash));
        const std::string key = audio_ref.substr(hash + 1);
        auto it = blobs_.find(file);
        if (it == blobs_.end()) it = blobs_.emplace(file, read_blob(file)).first;
        auto t = it->second.find(key);
        if (t == it->second.end()) fail(ErrorCode::kIo, file + " has no features named " + key);
        f.frames = t->second;
        f.hop_seconds = static_cast<double>(mel_.hop) / mel_.sample_rate;
        return f;
    }
    return extract_features(read_wav(resolve(audio_ref)), mel_);
}

const std::vector<ManifestRow>& SyntheticCorpus::rows(TaskKind kind) const {
    switch (kind) {
        case TaskKind::kAsr: return asr;
        case TaskKind::kSmt: return smt;
        case TaskKind::kSrt: return srt;
    }
    return asr;
}

Matrix synth_mel_features(const std::string& text, const SyntheticSpec& spec) {
    static thread_local std::pair<uint64_t, int> key{~0ull, -1};
    static thread_local Matrix templates;
    if (key.first != spec.seed || key.second != spec.n_mels) {
        templates = char_templates(spec);
        key = {spec.seed, spec.n_mels};
    }
    const Eigen::Index per = spec.frames_per_char;
    Matrix m(static_cast<Eigen::Index>(text.size()) * per, spec.n_mels);
    for (size_t i = 0; i < text.size(); ++i) {
        for (Eigen::Index r = 0; r < per; ++r) {
            m.row(static_cast<Eigen::Index>(i) * per + r) = templates.row(static_cast<unsigned char>(text[i]));
        }
    }
    return m;
}

Waveform synth_waveform(const std::string& text, const SyntheticSpec& spec) {
    // One 50 ms chirp per character; start and end pitch depend on the byte value.
    constexpr int kRate = 16000;
    constexpr int kPerChar = 800;
    constexpr double kPi = 3.14159265358979323846;
    Waveform w;
    w.sample_rate = kRate;
    w.samples.reserve(text.size() * kPerChar);
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const double f0 = 200.0 + 25.0 * (c % 64);
        const double f1 = f0 + 400.0 + 50.0 * (c / 64) + 7.0 * static_cast<double>(spec.seed % 13);
        double phase = 0.0;
        for (int i = 0; i < kPerChar; ++i) {
            const double f = f0 + (f1 - f0) * i / kPerChar;
            phase += 2.0 * kPi * f / kRate;
            const double env = std::sin(kPi * i / kPerChar);
            w.samples.push_back(static_cast<float>(0.5 * env * std::sin(phase)));
        }
    }
    return w;
}

SyntheticCorpus synth_corpus(const SyntheticSpec& spec) {
    if (spec.n_samples < 1) fail(ErrorCode::kInvalidSpec, "n_samples must be >= 1");
    if (spec.languages.empty()) fail(ErrorCode::kInvalidSpec, "at least one language is required");
    const bool translation = spec.tasks.count(TaskKind::kSmt) || spec.tasks.count(TaskKind::kSrt);
    if (translation && spec.languages.size() < 2) {
        fail(ErrorCode::kInvalidSpec, "translation tasks need at least two languages");
    }
    if (spec.min_words < 1 || spec.max_words < spec.min_words || spec.concepts < 1) {
        fail(ErrorCode::kInvalidSpec, "bad word count range");
    }
    for (const auto& l : spec.languages) TagRegistry::builtin().require(l);

    SyntheticCorpus c;
    c.languages = spec.languages;
    Rng rng = component_rng(spec.seed, "synth/words");
    // Disjoint letter sets keep the languages visibly distinct.
    static const std::vector<std::pair<std::string, std::string>> kAlphabets = {
        {"bdfgklmnprstvz", "aeiou"}, {"bcdghkmnprstwz", "aeiouy"}, {"cdfjlmnpqrstvx", "aeiou"},
        {"bdgklmnprstvwz", "aeiu"}};
    std::set<std::string> used;
    std::vector<std::vector<std::string>> inventories;
    for (size_t l = 0; l < spec.languages.size(); ++l) {
        const auto& [cons, vow] = kAlphabets[l % kAlphabets.size()];
        inventories.push_back(make_inventory(rng, spec.concepts, cons, vow, used));
    }
    c.dictionary.resize(static_cast<size_t>(spec.concepts));
    for (int k = 0; k < spec.concepts; ++k) {
        for (auto& inv : inventories) c.dictionary[static_cast<size_t>(k)].push_back(inv[static_cast<size_t>(k)]);
    }

    std::uniform_int_distribution<int> nw(spec.min_words, spec.max_words);
    std::uniform_int_distribution<int> concept_dist(0, spec.concepts - 1);
    std::set<std::string> seen;
    const size_t L = spec.languages.size();
    int guard = 0;
    for (int i = 0; i < spec.n_samples; ++i) {
        const size_t src = static_cast<size_t>(i) % L;
        const size_t tgt = (src + 1) % L;
        std::vector<int> concepts;
        std::string y, z;
        do {
            if (++guard > 1000000) fail(ErrorCode::kInvalidSpec, "cannot draw enough distinct utterances");
            concepts.assign(static_cast<size_t>(nw(rng)), 0);
            for (int& k : concepts) k = concept_dist(rng);
            y.clear();
            z.clear();
            for (size_t w = 0; w < concepts.size(); ++w) {
                if (w > 0) {
                    y += ' ';
                    z += ' ';
                }
                y += c.dictionary[static_cast<size_t>(concepts[w])][src];
                z += c.dictionary[static_cast<size_t>(concepts[w])][tgt];
            }
        } while (!seen.insert(y).second);

        char key[32];
        std::snprintf(key, sizeof(key), "utt%04d", i);
        std::string audio;
        if (spec.audio == AudioMode::kSynthMel) {
            c.features[key] = synth_mel_features(y, spec);
            audio = std::string("features.bin#") + key;
        } else {
            audio = std::string("wav/") + key + ".wav";
            c.audio[audio] = synth_waveform(y, spec);
        }
        if (spec.tasks.count(TaskKind::kAsr)) {
            c.asr.push_back(ManifestRow{audio, spec.languages[src], y, std::nullopt, std::nullopt});
        }
        if (L >= 2) {
            const ManifestRow r{audio, spec.languages[src], y, spec.languages[tgt], z};
            if (spec.tasks.count(TaskKind::kSmt)) c.smt.push_back(r);
            if (spec.tasks.count(TaskKind::kSrt)) c.srt.push_back(r);
        }
    }
    return c;
}

void write_corpus(const std::string& dir, const SyntheticCorpus& corpus) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
    if (!corpus.asr.empty()) write_manifest((fs::path(dir) / "asr.jsonl").string(), corpus.asr);
    if (!corpus.smt.empty()) write_manifest((fs::path(dir) / "smt.jsonl").string(), corpus.smt);
    if (!corpus.srt.empty()) write_manifest((fs::path(dir) / "srt.jsonl").string(), corpus.srt);
    if (!corpus.features.empty()) write_blob((fs::path(dir) / "features.bin").string(), corpus.features);
    for (const auto& [rel, w] : corpus.audio) {
        const fs::path p = fs::path(dir) / rel;
        fs::create_directories(p.parent_path(), ec);
        write_wav(p.string(), w);
    }
    std::ofstream os((fs::path(dir) / "dictionary.tsv").string(), std::ios::trunc);
    if (!os) fail(ErrorCode::kIo, "cannot write dictionary.tsv");
    os << "concept";
    for (const auto& l : corpus.languages) os << '\t' << l;
    os << '\n';
    for (size_t k = 0; k < corpus.dictionary.size(); ++k) {
        os << k;
        for (const auto& w : corpus.dictionary[k]) os << '\t' << w;
        os << '\n';
    }
}

std::string dictionary_translate(const SyntheticCorpus& corpus, const std::string& text,
                                 const std::string& from, const std::string& to) {
    auto index = [&](const std::string& l) {
        auto it = std::find(corpus.languages.begin(), corpus.languages.end(), l);
        if (it == corpus.languages.end()) fail(ErrorCode::kInvalidInput, "language not in corpus: " + l);
        return static_cast<size_t>(it - corpus.languages.begin());
    };
    const size_t a = index(from), b = index(to);
    std::istringstream in(text);
    std::string word, out;
    while (in >> word) {
        auto it = std::find_if(corpus.dictionary.begin(), corpus.dictionary.end(),
                               [&](const std::vector<std::string>& e) { return e[a] == word; });
        if (it == corpus.dictionary.end()) fail(ErrorCode::kInvalidInput, "word not in dictionary: " + word);
        if (!out.empty()) out += ' ';
        out += (*it)[b];
    }
    return out;
}

}  // namespace srt
