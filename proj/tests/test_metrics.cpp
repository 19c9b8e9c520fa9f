#include <doctest.h>

#include "srt/common.hpp"
#include "srt/metrics.hpp"

#include <cmath>
#include <random>
#include <regex>
#include <sstream>

using namespace srt;

namespace {

std::vector<std::string> words(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("13a tokenizer") {
    CHECK(tokenize_13a("Hello, world!") == "Hello , world !");
    CHECK(tokenize_13a("It costs 3.50 dollars.") == "It costs 3.50 dollars .");
    CHECK(tokenize_13a("1,000 and 2-3") == "1,000 and 2 - 3");
    CHECK(tokenize_13a("a &quot;b&quot; &amp; c") == "a \" b \" & c");
    CHECK(tokenize_13a("  many   spaces ") == "many spaces");
    CHECK(tokenize_13a("Straße über") == "Straße über");
}

TEST_CASE("char tokenizer") {
    CHECK(tokenize_char("你好 世界") == "你 好 世 界");
    CHECK(tokenize_char("ab c") == "a b c");
    CHECK(bleu_tokenizer_for("zho") == BleuTokenizer::kChar);
    CHECK(bleu_tokenizer_for("jpn") == BleuTokenizer::kChar);
    CHECK(bleu_tokenizer_for("deu") == BleuTokenizer::k13a);
}

TEST_CASE("normalisation") {
    CHECK(normalize_text("Hello,   World!") == "hello world");
    CHECK(normalize_text("  ÄPFEL  ") == "äpfel");
    // NFD input composes
    CHECK(normalize_text("A\xcc\x88") == "\xc3\xa4");
    CHECK(normalize_text("...") == "");
}

TEST_CASE("known BLEU values") {
    CHECK(bleu({"the cat sat on the mat"}, {"the cat sat on the mat"}) == doctest::Approx(100.0));
    // no 4-gram in the hypothesis at all
    CHECK(bleu({"a b c"}, {"a b c"}) == 0.0);
    // sacrebleu: "the the the the the the the" vs "the cat is on the mat" -> 1.8577
    // (hand-checked: p1 = 2/7, p2..p4 smoothed 1/12, 1/20, 1/32; bp = 1)
    const double p = std::exp((std::log(200.0 / 7) + std::log(100.0 / 12) + std::log(100.0 / 20) + std::log(100.0 / 32)) / 4);
    CHECK(bleu({"the cat is on the mat"}, {"the the the the the the the"}) == doctest::Approx(p).epsilon(1e-12));
    CHECK(BleuSignature{}.to_string() == "nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp");
    CHECK_THROWS_AS(bleu({"a"}, {}), Error);
}

TEST_CASE("known WER values") {
    CHECK(wer({"the cat sat"}, {"the cat sat"}) == 0.0);
    CHECK(wer({"the cat sat"}, {"The cat, sat!"}) == 0.0);
    const WerStats st = wer_stats({"a b c d"}, {"a x c d e"});
    CHECK(st.substitutions == 1);
    CHECK(st.insertions == 1);
    CHECK(st.deletions == 0);
    CHECK(st.rate() == doctest::Approx(0.5));
    CHECK(wer({"a b"}, {""}) == 1.0);
    CHECK(wer({"", "a b"}, {"", "a"}) == 0.5);
    CHECK_THROWS_AS(wer({""}, {"x"}), Error);
}

TEST_CASE("aggregate averages per source and globally") {
    const std::vector<DirectionScore> s = {{"deu", "eng", 30.0, {}}, {"deu", "fra", 20.0, {}}, {"eng", "deu", 10.0, 0.2}};
    const EvalReport r = aggregate(s);
    REQUIRE(r.source_averages.size() == 2);
    CHECK(r.source_averages[0].first == "deu");
    CHECK(r.source_averages[0].second == 25.0);
    CHECK(r.global_average == 20.0);
    CHECK(r.to_json().find("\"global_average\"") != std::string::npos);
    CHECK(r.to_table().find("deu") != std::string::npos);
    auto dup = s;
    dup.push_back(s[0]);
    CHECK_THROWS_AS(aggregate(dup), Error);
}

TEST_CASE("split matches str.split") {
    CHECK(split_whitespace(" a\tb c\n") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_whitespace("").empty());
    CHECK(words("x  y") == std::vector<std::string>{"x", "y"});
}

}
