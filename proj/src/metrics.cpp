#include "srt/metrics.hpp"

#include "srt/common.hpp"

#include <json.hpp>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace srt {

namespace {

std::u32string to_u32(std::string_view s) {
    const icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    std::u32string out;
    out.reserve(static_cast<size_t>(u.length()));
    for (int32_t i = 0; i < u.length();) {
        const UChar32 c = u.char32At(i);
        out.push_back(static_cast<char32_t>(c));
        i += U16_LENGTH(c);
    }
    return out;
}

std::string to_utf8(const std::u32string& s) {
    icu::UnicodeString u;
    for (char32_t c : s) u.append(static_cast<UChar32>(c));
    std::string out;
    u.toUTF8String(out);
    return out;
}

const icu::Normalizer2& nfc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || n == nullptr) fail(ErrorCode::kInvalidConfig, "ICU NFC normalizer unavailable");
    return *n;
}

bool py_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || (c >= 0x1C && c <= 0x20) || c == 0x85 || c == 0xA0 ||
           c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 ||
           c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool symbol_class(char32_t c) {
    return (c >= U'{' && c <= U'~') || (c >= U'[' && c <= U'`') || (c >= U' ' && c <= U'&') ||
           (c >= U'(' && c <= U'+') || (c >= U':' && c <= U'@') || c == U'/';
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

// Leftmost non-overlapping substitution of a two-character pattern, the way
// a regex engine scans.
template <typename First, typename Second, typename Emit>
std::u32string sub_pairs(const std::u32string& s, First first, Second second, Emit emit) {
    std::u32string out;
    out.reserve(s.size() * 2);
    size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && first(s[i]) && second(s[i + 1])) {
            emit(out, s[i], s[i + 1]);
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

std::vector<std::u32string> split_u32(const std::u32string& s) {
    std::vector<std::u32string> out;
    std::u32string cur;
    for (char32_t c : s) {
        if (py_space(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string join(const std::vector<std::u32string>& parts) {
    std::u32string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.push_back(U' ');
        out += parts[i];
    }
    return to_utf8(out);
}

void check_parallel(size_t refs, size_t hyps) {
    if (refs != hyps) {
        fail(ErrorCode::kInvalidInput, "reference and hypothesis counts differ (" +
                                           std::to_string(refs) + " vs " + std::to_string(hyps) + ")");
    }
}

}  // namespace

std::string normalize_text(std::string_view text) {
    const icu::Normalizer2& n = nfc();
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString u = n.normalize(
        icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))), status);
    u.toLower(icu::Locale::getRoot());
    u = n.normalize(u, status);
    if (U_FAILURE(status)) fail(ErrorCode::kInvalidInput, "text normalization failed");
    icu::UnicodeString mapped;
    for (int32_t i = 0; i < u.length();) {
        const UChar32 c = u.char32At(i);
        i += U16_LENGTH(c);
        const int32_t mask = U_GET_GC_MASK(c);
        if ((mask & U_GC_P_MASK) != 0 || u_isUWhiteSpace(c) || py_space(static_cast<char32_t>(c))) {
            mapped.append(static_cast<UChar32>(' '));
        } else {
            mapped.append(c);
        }
    }
    std::string utf8;
    mapped.toUTF8String(utf8);
    std::string out;
    bool pending = false;
    for (char ch : utf8) {
        if (ch == ' ') {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(ch);
    }
    return out;
}

double WerStats::rate() const {
    if (ref_words == 0) {
        if (insertions == 0) return 0.0;
        fail(ErrorCode::kInvalidInput, "references contain no words");
    }
    return static_cast<double>(substitutions + deletions + insertions) / static_cast<double>(ref_words);
}

WerStats wer_stats(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
    check_parallel(refs.size(), hyps.size());
    WerStats st;
    for (size_t s = 0; s < refs.size(); ++s) {
        const auto r = split_whitespace(normalize_text(refs[s]));
        const auto h = split_whitespace(normalize_text(hyps[s]));
        const size_t n = r.size(), m = h.size();
        // cost plus (sub, del, ins) breakdown of one optimal alignment
        struct Cell {
            size_t cost, sub, del, ins;
        };
        std::vector<Cell> prev(m + 1), cur(m + 1);
        for (size_t j = 0; j <= m; ++j) prev[j] = Cell{j, 0, 0, j};
        for (size_t i = 1; i <= n; ++i) {
            cur[0] = Cell{i, 0, i, 0};
            for (size_t j = 1; j <= m; ++j) {
                const bool same = r[i - 1] == h[j - 1];
                Cell diag = prev[j - 1];
                diag.cost += same ? 0 : 1;
                diag.sub += same ? 0 : 1;
                Cell del = prev[j];
                del.cost += 1;
                del.del += 1;
                Cell ins = cur[j - 1];
                ins.cost += 1;
                ins.ins += 1;
                Cell best = diag;
                if (del.cost < best.cost) best = del;
                if (ins.cost < best.cost) best = ins;
                cur[j] = best;
            }
            std::swap(prev, cur);
        }
        st.substitutions += prev[m].sub;
        st.deletions += prev[m].del;
        st.insertions += prev[m].ins;
        st.ref_words += n;
    }
    return st;
}

double wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
    return wer_stats(refs, hyps).rate();
}

std::string BleuSignature::to_string() const {
    return std::string("nrefs:1|case:mixed|eff:no|tok:") +
           (tokenizer == BleuTokenizer::k13a ? "13a" : "char") + "|smooth:exp";
}

BleuTokenizer bleu_tokenizer_for(std::string_view lang) {
    static const std::set<std::string_view> kChar = {"jpn", "kor", "tha", "yue", "zho"};
    return kChar.count(lang) ? BleuTokenizer::kChar : BleuTokenizer::k13a;
}

std::string tokenize_13a(std::string_view line) {
    std::string s(line);
    replace_all(s, "<skipped>", "");
    replace_all(s, "-\n", "");
    replace_all(s, "\n", " ");
    if (s.find('&') != std::string::npos) {
        replace_all(s, "&quot;", "\"");
        replace_all(s, "&amp;", "&");
        replace_all(s, "&lt;", "<");
        replace_all(s, "&gt;", ">");
    }
    std::u32string u = to_u32(" " + s + " ");
    std::u32string step;
    step.reserve(u.size() * 3);
    for (char32_t c : u) {
        if (symbol_class(c)) {
            step.push_back(U' ');
            step.push_back(c);
            step.push_back(U' ');
        } else {
            step.push_back(c);
        }
    }
    auto period = [](char32_t c) { return c == U'.' || c == U','; };
    auto not_digit = [](char32_t c) { return !is_digit(c); };
    step = sub_pairs(step, not_digit, period, [](std::u32string& o, char32_t a, char32_t b) {
        o.push_back(a);
        o.push_back(U' ');
        o.push_back(b);
        o.push_back(U' ');
    });
    step = sub_pairs(step, period, not_digit, [](std::u32string& o, char32_t a, char32_t b) {
        o.push_back(U' ');
        o.push_back(a);
        o.push_back(U' ');
        o.push_back(b);
    });
    step = sub_pairs(step, is_digit, [](char32_t c) { return c == U'-'; },
                     [](std::u32string& o, char32_t a, char32_t b) {
                         o.push_back(a);
                         o.push_back(U' ');
                         o.push_back(b);
                         o.push_back(U' ');
                     });
    return join(split_u32(step));
}

std::string tokenize_char(std::string_view line) {
    std::vector<std::u32string> parts;
    for (char32_t c : to_u32(line)) {
        if (!py_space(c)) parts.emplace_back(1, c);
    }
    return join(parts);
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& p : split_u32(to_u32(text))) out.push_back(to_utf8(p));
    return out;
}

BleuStats bleu_stats(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                     const BleuSignature& sig) {
    check_parallel(refs.size(), hyps.size());
    if (refs.empty()) fail(ErrorCode::kInvalidInput, "empty corpus");
    if (sig.max_order < 1 || sig.max_order > 4) fail(ErrorCode::kInvalidConfig, "max_order must be 1..4");
    auto tok = [&](const std::string& s) {
        return split_whitespace(sig.tokenizer == BleuTokenizer::k13a ? tokenize_13a(s) : tokenize_char(s));
    };
    BleuStats st;
    for (size_t i = 0; i < refs.size(); ++i) {
        const auto r = tok(refs[i]);
        const auto h = tok(hyps[i]);
        st.sys_len += h.size();
        st.ref_len += r.size();
        for (int n = 1; n <= sig.max_order; ++n) {
            std::map<std::vector<std::string>, size_t> rc, hc;
            for (size_t j = 0; j + static_cast<size_t>(n) <= r.size(); ++j) {
                ++rc[std::vector<std::string>(r.begin() + static_cast<std::ptrdiff_t>(j),
                                              r.begin() + static_cast<std::ptrdiff_t>(j) + n)];
            }
            for (size_t j = 0; j + static_cast<size_t>(n) <= h.size(); ++j) {
                ++hc[std::vector<std::string>(h.begin() + static_cast<std::ptrdiff_t>(j),
                                              h.begin() + static_cast<std::ptrdiff_t>(j) + n)];
            }
            size_t match = 0;
            for (const auto& [g, c] : hc) {
                auto it = rc.find(g);
                if (it != rc.end()) match += std::min(c, it->second);
            }
            st.correct[static_cast<size_t>(n - 1)] += match;
            st.total[static_cast<size_t>(n - 1)] += h.size() >= static_cast<size_t>(n) ? h.size() - static_cast<size_t>(n) + 1 : 0;
        }
    }
    return st;
}

double bleu_from_stats(const BleuStats& st, int max_order) {
    std::array<double, 4> prec{};
    double smooth = 1.0;
    for (int n = 1; n <= max_order; ++n) {
        const auto i = static_cast<size_t>(n - 1);
        if (st.total[i] == 0) break;
        if (st.correct[i] == 0) {
            smooth *= 2.0;
            prec[i] = 100.0 / (smooth * static_cast<double>(st.total[i]));
        } else {
            prec[i] = 100.0 * static_cast<double>(st.correct[i]) / static_cast<double>(st.total[i]);
        }
    }
    double bp = 1.0;
    if (st.sys_len < st.ref_len) {
        bp = st.sys_len > 0 ? std::exp(1.0 - static_cast<double>(st.ref_len) / static_cast<double>(st.sys_len)) : 0.0;
    }
    double logsum = 0.0;
    for (int n = 0; n < max_order; ++n) {
        const double p = prec[static_cast<size_t>(n)];
        logsum += p == 0.0 ? -9999999999.0 : std::log(p);
    }
    return bp * std::exp(logsum / max_order);
}

double bleu(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
            const BleuSignature& sig) {
    return bleu_from_stats(bleu_stats(refs, hyps, sig), sig.max_order);
}

EvalReport aggregate(const std::vector<DirectionScore>& scores) {
    if (scores.empty()) fail(ErrorCode::kInvalidInput, "no direction scores");
    EvalReport rep;
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::string> order;
    std::map<std::string, std::pair<double, size_t>> per_src;
    double total = 0.0;
    for (const auto& d : scores) {
        if (!seen.insert({d.src, d.tgt}).second) {
            fail(ErrorCode::kInvalidInput, "duplicate direction " + d.src + "-" + d.tgt);
        }
        if (!per_src.count(d.src)) order.push_back(d.src);
        per_src[d.src].first += d.bleu;
        per_src[d.src].second += 1;
        total += d.bleu;
        rep.directions.push_back(d);
    }
    for (const auto& s : order) {
        rep.source_averages.emplace_back(s, per_src[s].first / static_cast<double>(per_src[s].second));
    }
    rep.global_average = total / static_cast<double>(scores.size());
    return rep;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json dirs = nlohmann::ordered_json::array();
    for (const auto& d : directions) {
        nlohmann::ordered_json e;
        e["src"] = d.src;
        e["tgt"] = d.tgt;
        e["bleu"] = d.bleu;
        e["bleu_signature"] = BleuSignature{bleu_tokenizer_for(d.tgt)}.to_string();
        if (d.wer) e["wer"] = *d.wer;
        dirs.push_back(e);
    }
    j["directions"] = dirs;
    nlohmann::ordered_json avgs = nlohmann::ordered_json::object();
    for (const auto& [s, v] : source_averages) avgs[s] = v;
    j["source_averages"] = avgs;
    j["global_average"] = global_average;
    return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
    std::string out = "src  tgt  BLEU    WER\n";
    char buf[128];
    for (const auto& d : directions) {
        if (d.wer) {
            std::snprintf(buf, sizeof(buf), "%-4s %-4s %6.2f  %6.2f\n", d.src.c_str(), d.tgt.c_str(), d.bleu, 100.0 * *d.wer);
        } else {
            std::snprintf(buf, sizeof(buf), "%-4s %-4s %6.2f       -\n", d.src.c_str(), d.tgt.c_str(), d.bleu);
        }
        out += buf;
    }
    for (const auto& [s, v] : source_averages) {
        std::snprintf(buf, sizeof(buf), "%-4s avg  %6.2f\n", s.c_str(), v);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "all  avg  %6.2f\n", global_average);
    out += buf;
    return out;
}

}  // namespace srt
