#include "srt/decoding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <new>

namespace srt {

void DecodeConfig::validate() const {
    if (beam_size < 1) fail(ErrorCode::kInvalidConfig, "beam_size must be >= 1");
    if (max_new_tokens < 1) fail(ErrorCode::kInvalidConfig, "max_new_tokens must be >= 1");
}

Strategy parse_strategy(const std::string& name) {
    if (name == "greedy") return Strategy::kGreedy;
    if (name == "beam") return Strategy::kBeam;
    fail(ErrorCode::kInvalidConfig, "unknown decode strategy '" + name + "' (greedy|beam)");
}

const char* strategy_name(Strategy s) { return s == Strategy::kGreedy ? "greedy" : "beam"; }

void log_softmax_rows(Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double* r = m.row(i).data();
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < m.cols(); ++j) mx = std::max(mx, r[j]);
        double z = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) z += std::exp(r[j] - mx);
        const double lz = mx + std::log(z);
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[j] -= lz;
    }
}

std::vector<int> StepScorer::advance(std::span<const int> states, std::span<const int> tokens,
                                     Matrix& logp) {
    std::vector<int> out = extend(states, tokens, logp);
    for (int s : states) release(s);
    return out;
}

// --- LmScorer ---------------------------------------------------------------

LmScorer::LmScorer(const LanguageModel& lm, std::span<const FusedInput> prefixes, int max_new_tokens)
    : lm_(lm), prefixes_(prefixes) {
    Eigen::Index longest = 0;
    for (const auto& z : prefixes) {
        if (z.embeddings.cols() != lm.config().dim) {
            fail(ErrorCode::kConfigMismatch, "prefix width differs from the language model");
        }
        if (z.rows() < 1) fail(ErrorCode::kInvalidInput, "empty prefix");
        longest = std::max(longest, z.rows());
    }
    capacity_ = longest + max_new_tokens;
    if (capacity_ > lm.config().max_positions) {
        fail(ErrorCode::kInvalidInput, "prefix of " + std::to_string(longest) + " rows plus " +
                                           std::to_string(max_new_tokens) +
                                           " new tokens exceeds max_positions");
    }
}

int LmScorer::vocab_size() const { return lm_.config().vocab_size; }
int LmScorer::eos() const { return lm_.vocab().eos(); }

int LmScorer::allocate() {
    if (!free_.empty()) {
        const int id = free_.back();
        free_.pop_back();
        pool_[static_cast<size_t>(id)]->length = 0;
        return id;
    }
    try {
        pool_.push_back(std::make_unique<LanguageModel::KvCache>(lm_.make_cache(capacity_)));
    } catch (const std::bad_alloc&) {
        fail(ErrorCode::kBatchTooLarge, "out of memory allocating a kv cache");
    }
    return static_cast<int>(pool_.size() - 1);
}

void LmScorer::release(int state) { free_.push_back(state); }

std::vector<int> LmScorer::roots(size_t count, Matrix& logp) {
    if (count != prefixes_.size()) fail(ErrorCode::kInvalidInput, "root count differs from prefixes");
    std::vector<int> ids;
    std::vector<LanguageModel::KvCache*> caches;
    std::vector<Eigen::Index> rows;
    Eigen::Index total = 0;
    for (const auto& z : prefixes_) total += z.rows();
    Matrix inputs(total, lm_.config().dim);
    Eigen::Index at = 0;
    for (const auto& z : prefixes_) {
        const int id = allocate();
        ids.push_back(id);
        caches.push_back(pool_[static_cast<size_t>(id)].get());
        rows.push_back(z.rows());
        inputs.middleRows(at, z.rows()) = z.embeddings;
        at += z.rows();
    }
    lm_.append(caches, rows, inputs, logp);
    log_softmax_rows(logp);
    return ids;
}

std::vector<int> LmScorer::extend(std::span<const int> parents, std::span<const int> tokens,
                                  Matrix& logp) {
    std::vector<int> ids;
    std::vector<LanguageModel::KvCache*> caches;
    for (int p : parents) {
        const int id = allocate();
        LanguageModel::copy_cache(*pool_[static_cast<size_t>(p)], *pool_[static_cast<size_t>(id)]);
        ids.push_back(id);
        caches.push_back(pool_[static_cast<size_t>(id)].get());
    }
    lm_.step(caches, tokens, logp);
    log_softmax_rows(logp);
    return ids;
}

std::vector<int> LmScorer::advance(std::span<const int> states, std::span<const int> tokens,
                                   Matrix& logp) {
    std::vector<LanguageModel::KvCache*> caches;
    for (int s : states) caches.push_back(pool_[static_cast<size_t>(s)].get());
    lm_.step(caches, tokens, logp);
    log_softmax_rows(logp);
    return {states.begin(), states.end()};
}

// --- FunctionScorer ---------------------------------------------------------

FunctionScorer::FunctionScorer(int vocab_size, int eos, Fn fn)
    : vocab_(vocab_size), eos_(eos), fn_(std::move(fn)) {}

std::vector<int> FunctionScorer::roots(size_t count, Matrix& logp) {
    logp.resize(static_cast<Eigen::Index>(count), vocab_);
    std::vector<int> ids;
    for (size_t i = 0; i < count; ++i) {
        states_.push_back(State{i, {}});
        logp.row(static_cast<Eigen::Index>(i)) = fn_(i, {});
        ids.push_back(static_cast<int>(states_.size() - 1));
    }
    return ids;
}

std::vector<int> FunctionScorer::extend(std::span<const int> parents, std::span<const int> tokens,
                                        Matrix& logp) {
    logp.resize(static_cast<Eigen::Index>(parents.size()), vocab_);
    std::vector<int> ids;
    for (size_t i = 0; i < parents.size(); ++i) {
        State s = states_[static_cast<size_t>(parents[i])];
        s.prefix.push_back(tokens[i]);
        logp.row(static_cast<Eigen::Index>(i)) = fn_(s.root, s.prefix);
        states_.push_back(std::move(s));
        ids.push_back(static_cast<int>(states_.size() - 1));
    }
    return ids;
}

// --- search -----------------------------------------------------------------

namespace {

double normalized(double sum, size_t length, double penalty) {
    return sum / std::pow(static_cast<double>(length), penalty);
}

std::vector<Generation> greedy(StepScorer& sc, size_t count, const DecodeConfig& cfg, int eos) {
    Matrix logp;
    std::vector<int> state = sc.roots(count, logp);
    std::vector<Generation> out(count);
    std::vector<double> sum(count, 0.0);
    std::vector<size_t> active(count);
    std::vector<Eigen::Index> row(count);
    for (size_t i = 0; i < count; ++i) {
        active[i] = i;
        row[i] = static_cast<Eigen::Index>(i);
    }
    for (int t = 1; t <= cfg.max_new_tokens && !active.empty(); ++t) {
        std::vector<size_t> still;
        std::vector<int> states;
        std::vector<int> tokens;
        for (size_t item : active) {
            const double* lp = logp.row(row[item]).data();
            int best = 0;
            for (int v = 1; v < logp.cols(); ++v) {
                if (lp[v] > lp[best]) best = v;
            }
            sum[item] += lp[best];
            if (best == eos) {
                out[item].score = normalized(sum[item], static_cast<size_t>(t), cfg.length_penalty);
                sc.release(state[item]);
                continue;
            }
            out[item].tokens.push_back(best);
            if (t == cfg.max_new_tokens) {
                out[item].truncated = true;
                out[item].score = normalized(sum[item], static_cast<size_t>(t), cfg.length_penalty);
                sc.release(state[item]);
                continue;
            }
            still.push_back(item);
            states.push_back(state[item]);
            tokens.push_back(best);
        }
        active = std::move(still);
        if (active.empty()) break;
        std::vector<int> next = sc.advance(states, tokens, logp);
        for (size_t j = 0; j < active.size(); ++j) {
            state[active[j]] = next[j];
            row[active[j]] = static_cast<Eigen::Index>(j);
        }
    }
    return out;
}

struct Hyp {
    int state;
    std::vector<int> tokens;
    double sum;
    Eigen::Index row;
};

struct Finished {
    std::vector<int> tokens;
    double score;
    bool truncated;
};

struct BeamItem {
    std::vector<Hyp> live;
    std::vector<Finished> pool;
    bool done = false;
};

void add_finished(BeamItem& item, Finished f, int k) {
    if (static_cast<int>(item.pool.size()) < k) {
        item.pool.push_back(std::move(f));
        return;
    }
    auto worst = std::min_element(item.pool.begin(), item.pool.end(),
                                  [](const Finished& a, const Finished& b) { return a.score < b.score; });
    if (f.score > worst->score) {
        item.pool.erase(worst);
        item.pool.push_back(std::move(f));
    }
}

double worst_score(const BeamItem& item) {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& f : item.pool) w = std::min(w, f.score);
    return w;
}

std::vector<Generation> beam(StepScorer& sc, size_t count, const DecodeConfig& cfg, int eos) {
    const int k = cfg.beam_size;
    Matrix logp;
    std::vector<int> roots = sc.roots(count, logp);
    std::vector<BeamItem> items(count);
    for (size_t i = 0; i < count; ++i) {
        items[i].live.push_back(Hyp{roots[i], {}, 0.0, static_cast<Eigen::Index>(i)});
    }
    const Eigen::Index V = logp.cols();

    struct Cand {
        double sum;
        int parent;
        int token;
    };
    std::vector<Cand> cands;
    for (int t = 1; t <= cfg.max_new_tokens; ++t) {
        std::vector<int> parents;
        std::vector<int> tokens;
        std::vector<std::pair<size_t, size_t>> slot;  // (item, index in next live)
        std::vector<std::vector<Hyp>> next(count);
        for (size_t i = 0; i < count; ++i) {
            BeamItem& item = items[i];
            if (item.done) continue;
            cands.clear();
            for (size_t h = 0; h < item.live.size(); ++h) {
                const double* lp = logp.row(item.live[h].row).data();
                for (Eigen::Index v = 0; v < V; ++v) {
                    cands.push_back(Cand{item.live[h].sum + lp[v], static_cast<int>(h), static_cast<int>(v)});
                }
            }
            std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
                if (a.sum != b.sum) return a.sum > b.sum;
                if (a.parent != b.parent) return a.parent < b.parent;
                return a.token < b.token;
            });
            for (size_t rank = 0; rank < cands.size(); ++rank) {
                const Cand& c = cands[rank];
                const Hyp& parent = item.live[static_cast<size_t>(c.parent)];
                if (c.token == eos) {
                    // Only EOS among the top-k candidates may finish a hypothesis.
                    if (rank >= static_cast<size_t>(k)) continue;
                    add_finished(item, Finished{parent.tokens,
                                                normalized(c.sum, static_cast<size_t>(t), cfg.length_penalty),
                                                false},
                                 k);
                    continue;
                }
                Hyp h{parent.state, parent.tokens, c.sum, 0};
                h.tokens.push_back(c.token);
                next[i].push_back(std::move(h));
                if (static_cast<int>(next[i].size()) == k) break;
            }
            bool done = next[i].empty();
            if (!done && static_cast<int>(item.pool.size()) == k) {
                double best_live = -std::numeric_limits<double>::infinity();
                for (const auto& h : next[i]) best_live = std::max(best_live, h.sum);
                done = normalized(best_live, static_cast<size_t>(t), cfg.length_penalty) <= worst_score(item);
            }
            if (!done && t == cfg.max_new_tokens) {
                for (const auto& h : next[i]) {
                    add_finished(item, Finished{h.tokens,
                                                normalized(h.sum, static_cast<size_t>(t), cfg.length_penalty),
                                                true},
                                 k);
                }
                done = true;
            }
            if (done) {
                item.done = true;
                next[i].clear();
                continue;
            }
            for (size_t j = 0; j < next[i].size(); ++j) {
                parents.push_back(next[i][j].state);
                tokens.push_back(next[i][j].tokens.back());
                slot.emplace_back(i, j);
            }
        }
        std::vector<int> old;
        for (const auto& item : items) {
            for (const auto& h : item.live) old.push_back(h.state);
        }
        if (!parents.empty()) {
            std::vector<int> fresh = sc.extend(parents, tokens, logp);
            for (size_t r = 0; r < slot.size(); ++r) {
                Hyp& h = next[slot[r].first][slot[r].second];
                h.state = fresh[r];
                h.row = static_cast<Eigen::Index>(r);
            }
        }
        for (int s : old) sc.release(s);
        for (size_t i = 0; i < count; ++i) items[i].live = std::move(next[i]);
        if (parents.empty()) break;
    }

    std::vector<Generation> out(count);
    for (size_t i = 0; i < count; ++i) {
        const auto& pool = items[i].pool;
        size_t best = 0;
        for (size_t j = 1; j < pool.size(); ++j) {
            if (pool[j].score > pool[best].score) best = j;
        }
        if (pool.empty()) fail(ErrorCode::kInvalidInput, "beam search produced no hypothesis");
        out[i] = Generation{pool[best].tokens, pool[best].truncated, pool[best].score};
    }
    return out;
}

void exhaustive(StepScorer& sc, int state, const RowVector& lp, std::vector<int>& prefix, double sum,
                int horizon, double penalty, int eos, Generation& best) {
    const int depth = static_cast<int>(prefix.size()) + 1;
    for (int v = 0; v < lp.cols(); ++v) {
        const double s = sum + lp(v);
        if (v == eos || depth == horizon) {
            const double score = normalized(s, static_cast<size_t>(depth), penalty);
            if (score > best.score) {
                best.score = score;
                best.tokens = prefix;
                if (v != eos) best.tokens.push_back(v);
                best.truncated = v != eos;
            }
            continue;
        }
        Matrix next_lp;
        const int p[] = {state};
        const int tok[] = {v};
        const int child = sc.extend(p, tok, next_lp).front();
        prefix.push_back(v);
        exhaustive(sc, child, next_lp.row(0), prefix, s, horizon, penalty, eos, best);
        prefix.pop_back();
        sc.release(child);
    }
}

}  // namespace

std::vector<Generation> search(StepScorer& scorer, size_t count, const DecodeConfig& cfg) {
    cfg.validate();
    if (count == 0) return {};
    const int eos = cfg.eos_id >= 0 ? cfg.eos_id : scorer.eos();
    if (cfg.strategy == Strategy::kGreedy) return greedy(scorer, count, cfg, eos);
    return beam(scorer, count, cfg, eos);
}

Generation generate(const LanguageModel& lm, const FusedInput& z, const DecodeConfig& cfg) {
    return generate_batch(lm, std::span<const FusedInput>(&z, 1), cfg).front();
}

std::vector<Generation> generate_batch(const LanguageModel& lm, std::span<const FusedInput> batch,
                                       const DecodeConfig& cfg) {
    cfg.validate();
    LmScorer scorer(lm, batch, cfg.max_new_tokens);
    return search(scorer, batch.size(), cfg);
}

Generation exhaustive_search(StepScorer& scorer, int horizon, double length_penalty) {
    if (horizon < 1) fail(ErrorCode::kInvalidConfig, "horizon must be >= 1");
    Matrix lp;
    const int root = scorer.roots(1, lp).front();
    Generation best;
    best.score = -std::numeric_limits<double>::infinity();
    std::vector<int> prefix;
    exhaustive(scorer, root, lp.row(0), prefix, 0.0, horizon, length_penalty, scorer.eos(), best);
    scorer.release(root);
    return best;
}

BenchRow bench_decode(const LanguageModel& lm, std::span<const FusedInput> items,
                      const DecodeConfig& cfg, int batch_size, int repeats) {
    if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "batch size must be >= 1");
    BenchRow row;
    row.strategy = cfg.strategy == Strategy::kGreedy ? "greedy"
                                                     : "beam" + std::to_string(cfg.beam_size);
    row.batch = batch_size;
    row.items = items.size();
    row.wall_seconds = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        for (size_t at = 0; at < items.size(); at += static_cast<size_t>(batch_size)) {
            const size_t n = std::min(items.size() - at, static_cast<size_t>(batch_size));
            generate_batch(lm, items.subspan(at, n), cfg);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.wall_seconds = std::min(row.wall_seconds, secs);
    }
    return row;
}

}  // namespace srt
