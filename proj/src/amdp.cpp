#include "gcrl/amdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "gcrl/jsonio.hpp"

namespace gcrl::amdp {

using abstraction::AbstractTransition;
using nlohmann::json;

const char* to_string(RewardKind k) {
    return k == RewardKind::reach_prob ? "reach_prob" : "neg_distance";
}

RewardKind reward_kind_from_string(const std::string& s) {
    if (s == "reach_prob") return RewardKind::reach_prob;
    if (s == "neg_distance") return RewardKind::neg_distance;
    throw ConfigError("unknown reward kind: '" + s + "'");
}

const char* to_string(DistanceMetric m) {
    return m == DistanceMetric::token_jaccard ? "token_jaccard" : "token_cosine";
}

DistanceMetric distance_metric_from_string(const std::string& s) {
    if (s == "token_jaccard") return DistanceMetric::token_jaccard;
    if (s == "token_cosine") return DistanceMetric::token_cosine;
    throw ConfigError("unknown distance metric: '" + s + "'");
}

int AMDP::state_index(const std::string& token) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == token) return static_cast<int>(i);
    return -1;
}

const SuccessorRow* AMDP::row(int s, Action a) const {
    const std::pair<int, int> key{s, static_cast<int>(a)};
    auto it = std::lower_bound(rows.begin(), rows.end(), key,
                               [](const SuccessorRow& r, const std::pair<int, int>& k) {
                                   return std::pair<int, int>{r.s, r.a} < k;
                               });
    if (it == rows.end() || it->s != key.first || it->a != key.second) return nullptr;
    return &*it;
}

double AMDP::p_hat(int s, Action a, int s_next) const {
    const SuccessorRow* r = row(s, a);
    if (!r || r->total == 0) return 0;
    for (const auto& [idx, count] : r->successors)
        if (idx == s_next) return static_cast<double>(count) / static_cast<double>(r->total);
    return 0;
}

double AMDP::p0_hat(int s) const {
    if (episodes == 0 || s < 0 || s >= static_cast<int>(p0_counts.size())) return 0;
    return static_cast<double>(p0_counts[static_cast<std::size_t>(s)]) /
           static_cast<double>(episodes);
}

AMDP build_amdp(const AbstractDataset& ad, RewardKind reward_kind, double gamma) {
    if (ad.transitions.empty()) throw InputError("build_amdp: empty abstract dataset");
    if (gamma < 0.0 || gamma >= 1.0)
        throw ConfigError("gamma must lie in [0, 1), got " + std::to_string(gamma));

    AMDP m;
    m.states = ad.tokens;
    m.reward_kind = reward_kind;
    m.gamma = gamma;
    m.distinct_low_level = ad.distinct_low_level;
    for (std::size_t i = 0; i < m.states.size(); ++i)
        if (m.states[i] == abstraction::kGoalToken) m.goal_state = static_cast<int>(i);

    m.p0_counts.assign(m.states.size(), 0);
    std::map<std::pair<int, int>, std::map<int, long>> counts;
    for (const AbstractTransition& t : ad.transitions) {
        if (t.step == 0) {
            ++m.p0_counts[static_cast<std::size_t>(t.s)];
            ++m.episodes;
        }
        if (t.s == m.goal_state) continue; // absorbing goal: drop outgoing
        ++counts[{t.s, static_cast<int>(t.a)}][t.s_next];
    }

    m.rows.reserve(counts.size());
    for (const auto& [key, succ] : counts) {
        SuccessorRow row;
        row.s = key.first;
        row.a = key.second;
        for (const auto& [s2, n] : succ) {
            row.successors.emplace_back(s2, n);
            row.total += n;
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

std::optional<double> reward_reach(const AMDP& m, int s, Action a) {
    const SuccessorRow* r = m.row(s, a);
    if (!r) return std::nullopt;
    if (m.goal_state < 0) return 0.0;
    return m.p_hat(s, a, m.goal_state);
}

namespace {

std::map<std::string, long> item_multiset(const std::string& token) {
    std::map<std::string, long> out;
    for (std::string& item : abstraction::token_items(token)) ++out[std::move(item)];
    return out;
}

} // namespace

double token_distance(const std::string& token_a, const std::string& token_b,
                      DistanceMetric metric) {
    const auto ma = item_multiset(token_a);
    const auto mb = item_multiset(token_b);
    if (metric == DistanceMetric::token_jaccard) {
        long inter = 0, uni = 0;
        auto ia = ma.begin();
        auto ib = mb.begin();
        while (ia != ma.end() || ib != mb.end()) {
            if (ib == mb.end() || (ia != ma.end() && ia->first < ib->first)) {
                uni += ia->second;
                ++ia;
            } else if (ia == ma.end() || ib->first < ia->first) {
                uni += ib->second;
                ++ib;
            } else {
                inter += std::min(ia->second, ib->second);
                uni += std::max(ia->second, ib->second);
                ++ia;
                ++ib;
            }
        }
        if (uni == 0) return 0;
        return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
    }
    // token_cosine over multiset count vectors; counts are non-negative so
    // the similarity sits in [0, 1].
    double dot = 0, na = 0, nb = 0;
    for (const auto& [item, ca] : ma) {
        na += static_cast<double>(ca) * ca;
        auto it = mb.find(item);
        if (it != mb.end()) dot += static_cast<double>(ca) * it->second;
    }
    for (const auto& [item, cb] : mb) nb += static_cast<double>(cb) * cb;
    if (na == 0 || nb == 0) return na == nb ? 0 : 1;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double reward_neg_distance(const AMDP& m, int s, Action a, DistanceMetric metric) {
    const SuccessorRow* r = m.row(s, a);
    if (!r) throw InputError("reward_neg_distance: unobserved state-action pair");
    if (m.goal_state < 0)
        throw InputError("reward_neg_distance: no goal state observed in the dataset");
    const std::string& goal_token = m.states[static_cast<std::size_t>(m.goal_state)];
    double acc = 0;
    for (const auto& [s2, count] : r->successors) {
        const double p = static_cast<double>(count) / static_cast<double>(r->total);
        acc += p * token_distance(m.states[static_cast<std::size_t>(s2)], goal_token, metric);
    }
    return -acc;
}

CoverageStats coverage_stats(const AMDP& m) {
    CoverageStats stats;
    stats.n_states = m.states.size();
    stats.observed_pairs = m.rows.size();
    if (!m.rows.empty()) {
        std::vector<long> totals;
        totals.reserve(m.rows.size());
        for (const SuccessorRow& r : m.rows) totals.push_back(r.total);
        std::sort(totals.begin(), totals.end());
        stats.min_count = totals.front();
        const std::size_t n = totals.size();
        stats.median_count = n % 2 == 1
                                 ? static_cast<double>(totals[n / 2])
                                 : (static_cast<double>(totals[n / 2 - 1]) + totals[n / 2]) / 2.0;
    }
    if (m.distinct_low_level > 0 && !m.states.empty())
        stats.low_level_ratio =
            static_cast<double>(m.distinct_low_level) / static_cast<double>(m.states.size());
    return stats;
}

void save_amdp(const AMDP& m, const std::string& path) {
    json counts = json::array();
    for (const SuccessorRow& r : m.rows)
        for (const auto& [s2, n] : r.successors) counts.push_back({r.s, r.a, s2, n});
    json p0 = json::array();
    for (std::size_t i = 0; i < m.p0_counts.size(); ++i)
        if (m.p0_counts[i] > 0) p0.push_back({static_cast<int>(i), m.p0_counts[i]});
    const json j{{"states", m.states},
                 {"counts", std::move(counts)},
                 {"p0_counts", std::move(p0)},
                 {"episodes", m.episodes},
                 {"goal_state", m.goal_state},
                 {"reward_kind", to_string(m.reward_kind)},
                 {"gamma", m.gamma},
                 {"distinct_low_level", m.distinct_low_level}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

AMDP load_amdp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad amdp file: ") + e.what());
    }
    AMDP m;
    try {
        m.states = j.at("states").get<std::vector<std::string>>();
        m.episodes = j.at("episodes").get<long>();
        m.goal_state = j.at("goal_state").get<int>();
        m.reward_kind = reward_kind_from_string(j.at("reward_kind").get<std::string>());
        m.gamma = j.at("gamma").get<double>();
        m.distinct_low_level = j.at("distinct_low_level").get<std::size_t>();
        m.p0_counts.assign(m.states.size(), 0);
        for (const json& e : j.at("p0_counts"))
            m.p0_counts.at(e.at(0).get<std::size_t>()) = e.at(1).get<long>();
        std::map<std::pair<int, int>, SuccessorRow> rows;
        for (const json& e : j.at("counts")) {
            const int s = e.at(0).get<int>();
            const int a = e.at(1).get<int>();
            SuccessorRow& row = rows[{s, a}];
            row.s = s;
            row.a = a;
            const long n = e.at(3).get<long>();
            row.successors.emplace_back(e.at(2).get<int>(), n);
            row.total += n;
        }
        for (auto& [key, row] : rows) {
            std::sort(row.successors.begin(), row.successors.end());
            m.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad amdp file: ") + e.what());
    }
    return m;
}

} // namespace gcrl::amdp
