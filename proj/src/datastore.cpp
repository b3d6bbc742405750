#include "gcrl/datastore.hpp"

#include <deque>
#include <fstream>
#include <map>
#include <optional>

#include "gcrl/jsonio.hpp"
#include "gcrl/rng.hpp"

namespace gcrl::datastore {

using gridworld::Cell;
using gridworld::CellKind;
using gridworld::Direction;
using gridworld::Environment;
using gridworld::GridPos;
using gridworld::StepResult;
using nlohmann::json;

PolicySpec PolicySpec::parse(const std::string& name) {
    PolicySpec spec;
    spec.name = name;
    if (name != "uniform_random" && name != "nav_toggle" && name != "landmark")
        throw ConfigError("unknown behavior policy: '" + name + "'");
    return spec;
}

std::size_t Dataset::n_transitions() const {
    std::size_t n = 0;
    for (const Episode& e : episodes) n += e.steps.size();
    return n;
}

void Dataset::for_each_transition(const std::function<void(const TransitionView&)>& fn) const {
    for (std::size_t ep = 0; ep < episodes.size(); ++ep) {
        LowLevelState cur = episodes[ep].initial;
        for (std::size_t i = 0; i < episodes[ep].steps.size(); ++i) {
            const StepRecord& rec = episodes[ep].steps[i];
            StepResult r = gridworld::step(cur, rec.action);
            fn(TransitionView{cur, rec.action, r.state, rec.valid, static_cast<int>(ep),
                              static_cast<int>(i)});
            cur = std::move(r.state);
        }
    }
}

// ---------------------------------------------------------------------------
// Behavior policies
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<Action, 4> kNavToggleActions = {Action::turn_left, Action::turn_right,
                                                     Action::forward, Action::toggle};

bool nav_walkable(const Cell& c) {
    return c.kind == CellKind::empty || c.kind == CellKind::goal_tile ||
           (c.kind == CellKind::door && c.door == gridworld::DoorState::open);
}

// Greedy navigation helper: BFS distance field toward a landmark over the
// currently walkable cells, cached per (landmark, grid occupancy).
class LandmarkNavigator {
public:
    explicit LandmarkNavigator(const Environment& env) : env_(env) {}

    Action act(const LowLevelState& s, Rng& rng, int step_index, double epsilon,
               int resample_every) {
        if (epsilon >= 1.0 || rng.unit() < epsilon)
            return gridworld::kAllActions[rng.below(gridworld::kActionCount)];
        if (!landmark_ || s.agent_pos == *landmark_ ||
            (resample_every > 0 && step_index > 0 && step_index % resample_every == 0)) {
            resample(rng);
        }
        const std::vector<int>* field = distance_field(s);
        int here = field ? (*field)[index(s.agent_pos)] : -1;
        if (here <= 0) {
            // Unreachable or already there: try one resample, then give up
            // on navigation for this step.
            resample(rng);
            field = distance_field(s);
            here = field ? (*field)[index(s.agent_pos)] : -1;
            if (here <= 0) return gridworld::kAllActions[rng.below(gridworld::kActionCount)];
        }
        // Face the best neighbor, then walk into it.
        Direction want = s.agent_dir;
        int best = here;
        for (int d = 0; d < 4; ++d) {
            const GridPos delta = gridworld::dir_delta(static_cast<Direction>(d));
            const GridPos n{s.agent_pos.col + delta.col, s.agent_pos.row + delta.row};
            if (!s.in_bounds(n) || !nav_walkable(s.at(n))) continue;
            const int dist = (*field)[index(n)];
            if (dist >= 0 && dist < best) {
                best = dist;
                want = static_cast<Direction>(d);
            }
        }
        if (best >= here) return gridworld::kAllActions[rng.below(gridworld::kActionCount)];
        if (want == s.agent_dir) return Action::forward;
        if (gridworld::rotate_right(s.agent_dir) == want) return Action::turn_right;
        return Action::turn_left;
    }

private:
    std::size_t index(GridPos p) const {
        return static_cast<std::size_t>(p.row) * env_.base_state().width + p.col;
    }

    void resample(Rng& rng) {
        const auto& cells = env_.start_cells();
        landmark_ = cells[rng.below(static_cast<std::uint32_t>(cells.size()))];
        cache_.clear();
    }

    // Occupancy signature: walkability can change through toggles and
    // picked/dropped objects, which invalidates the field.
    std::string occupancy(const LowLevelState& s) const {
        std::string sig;
        sig.reserve(s.grid.size());
        for (const Cell& c : s.grid) sig.push_back(nav_walkable(c) ? '1' : '0');
        return sig;
    }

    const std::vector<int>* distance_field(const LowLevelState& s) {
        if (!landmark_) return nullptr;
        std::string key = occupancy(s);
        auto it = cache_.find(key);
        if (it != cache_.end()) return &it->second;

        std::vector<int> field(s.grid.size(), -1);
        if (!nav_walkable(s.at(*landmark_)) && s.at(*landmark_).kind != CellKind::empty)
            return &cache_.emplace(std::move(key), std::move(field)).first->second;
        std::deque<GridPos> queue;
        field[index(*landmark_)] = 0;
        queue.push_back(*landmark_);
        while (!queue.empty()) {
            const GridPos p = queue.front();
            queue.pop_front();
            for (int d = 0; d < 4; ++d) {
                const GridPos delta = gridworld::dir_delta(static_cast<Direction>(d));
                const GridPos n{p.col + delta.col, p.row + delta.row};
                if (!s.in_bounds(n) || !nav_walkable(s.at(n))) continue;
                if (field[index(n)] >= 0) continue;
                field[index(n)] = field[index(p)] + 1;
                queue.push_back(n);
            }
        }
        return &cache_.emplace(std::move(key), std::move(field)).first->second;
    }

    const Environment& env_;
    std::optional<GridPos> landmark_;
    std::map<std::string, std::vector<int>> cache_;
};

} // namespace

Dataset collect(const EnvSpec& env_spec, const PolicySpec& policy, int n_episodes, int max_len,
                std::uint64_t seed) {
    if (n_episodes < 0) throw ConfigError("n_episodes must be non-negative");
    if (max_len < 1) throw ConfigError("max_len must be at least 1");
    if (policy.name != "uniform_random" && policy.name != "nav_toggle" &&
        policy.name != "landmark")
        throw ConfigError("unknown behavior policy: '" + policy.name + "'");

    const Environment env = gridworld::generate_env(env_spec);
    Dataset out;
    out.env_spec = env.spec();
    out.collection_seed = seed;
    out.episodes.reserve(static_cast<std::size_t>(n_episodes));

    for (int ep = 0; ep < n_episodes; ++ep) {
        Rng rng(sub_seed(seed, static_cast<std::uint64_t>(ep)));
        Episode episode;
        episode.initial = env.sample_initial(rng.next_u64());
        episode.steps.reserve(static_cast<std::size_t>(max_len));
        LandmarkNavigator nav(env);

        LowLevelState cur = episode.initial;
        for (int t = 0; t < max_len; ++t) {
            Action a;
            if (policy.name == "uniform_random") {
                a = gridworld::kAllActions[rng.below(gridworld::kActionCount)];
            } else if (policy.name == "nav_toggle") {
                a = kNavToggleActions[rng.below(4)];
            } else {
                a = nav.act(cur, rng, t, policy.epsilon, policy.resample_every);
            }
            StepResult r = gridworld::step(cur, a);
            episode.steps.push_back({a, r.valid});
            cur = std::move(r.state);
        }
        out.episodes.push_back(std::move(episode));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void save(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    const json header{{"env_spec", gridworld::env_spec_json(d.env_spec)},
                      {"n_episodes", d.episodes.size()},
                      {"collection_seed", d.collection_seed},
                      {"format_version", 1}};
    out << header.dump() << '\n';
    d.for_each_transition([&](const TransitionView& t) {
        const json line{{"episode", t.episode_id},
                        {"step", t.step_index},
                        {"x", gridworld::snapshot_json(t.x, /*omit_walls=*/true)},
                        {"a", gridworld::to_string(t.a)},
                        {"x_next", gridworld::snapshot_json(t.x_next, /*omit_walls=*/true)},
                        {"valid", t.valid}};
        out << line.dump() << '\n';
    });
    if (!out) throw Error("write failed: " + path);
}

Dataset load(const std::string& path, bool verify) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);

    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing dataset header", 1);
    ++line_no;

    Dataset d;
    std::size_t declared_episodes = 0;
    try {
        const json header = json::parse(line);
        d.env_spec = gridworld::env_spec_from_json(header.at("env_spec"));
        d.collection_seed = header.at("collection_seed").get<std::uint64_t>();
        declared_episodes = header.at("n_episodes").get<std::size_t>();
        if (header.at("format_version").get<int>() != 1)
            throw ParseError("unsupported format_version", line_no);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad dataset header: ") + e.what(), line_no);
    }

    const Environment env = gridworld::generate_env(d.env_spec);
    const LowLevelState& walls = env.base_state();

    int cur_episode = -1;
    int expected_step = 0;
    LowLevelState replayed;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int episode_id = 0;
        int step_index = 0;
        LowLevelState x, x_next;
        Action a = Action::turn_left;
        bool valid = false;
        try {
            const json j = json::parse(line);
            episode_id = j.at("episode").get<int>();
            step_index = j.at("step").get<int>();
            const auto action = gridworld::action_from_string(j.at("a").get<std::string>());
            if (!action) throw ParseError("unknown action name", line_no);
            a = *action;
            valid = j.at("valid").get<bool>();
            x = gridworld::state_from_snapshot(j.at("x"), &walls);
            x_next = gridworld::state_from_snapshot(j.at("x_next"), &walls);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad transition line: ") + e.what(), line_no);
        }

        if (episode_id != cur_episode) {
            if (episode_id != cur_episode + 1)
                throw ParseError("episode ids must be contiguous and ascending", line_no);
            if (step_index != 0)
                throw ParseError("first transition of an episode must have step 0", line_no);
            cur_episode = episode_id;
            expected_step = 0;
            d.episodes.push_back({x, {}});
            replayed = x;
        }
        if (step_index != expected_step)
            throw ParseError("step indices must increase by one within an episode", line_no);

        if (verify) {
            const std::string where = "episode " + std::to_string(episode_id) + ", step " +
                                      std::to_string(step_index);
            if (!(x == replayed))
                throw IntegrityError("stored state diverges from replay at " + where);
            StepResult r = gridworld::step(replayed, a);
            if (!(r.state == x_next))
                throw IntegrityError("stored x_next does not match replay at " + where);
            if (r.valid != valid)
                throw IntegrityError("stored valid flag does not match replay at " + where);
            replayed = std::move(r.state);
        }
        d.episodes.back().steps.push_back({a, valid});
        ++expected_step;
    }
    if (d.episodes.size() != declared_episodes)
        throw ParseError("header declares " + std::to_string(declared_episodes) +
                             " episodes, file holds " + std::to_string(d.episodes.size()),
                         line_no);
    return d;
}

} // namespace gcrl::datastore
