#include "gcrl/sft.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gcrl/abstraction.hpp"
#include "gcrl/jsonio.hpp"

namespace gcrl::sft {

using nlohmann::json;

namespace {

// "door:3,4=yellow,locked" -> {"3,4", "yellow,locked"}
std::pair<std::string, std::string> split_item(const std::string& item, char head_sep) {
    const std::size_t head = item.find(head_sep);
    const std::size_t eq = item.find('=', head == std::string::npos ? 0 : head);
    if (head == std::string::npos || eq == std::string::npos) return {"", ""};
    return {item.substr(head + 1, eq - head - 1), item.substr(eq + 1)};
}

std::string pos_phrase(const std::string& colrow) {
    const std::size_t comma = colrow.find(',');
    if (comma == std::string::npos) return "(" + colrow + ")";
    return "(" + colrow.substr(0, comma) + ", " + colrow.substr(comma + 1) + ")";
}

} // namespace

std::string render_state_text(const std::string& token) {
    if (token == abstraction::kGoalToken) return "goal reached";

    std::string agent_pos, agent_dir, carry;
    std::vector<std::string> doors, objects;
    for (const std::string& item : abstraction::token_items(token)) {
        if (item.rfind("agent=", 0) == 0) {
            agent_pos = item.substr(6);
        } else if (item.rfind("dir=", 0) == 0) {
            agent_dir = item.substr(4);
        } else if (item.rfind("carry=", 0) == 0) {
            carry = item.substr(6);
        } else if (item.rfind("door:", 0) == 0) {
            const auto [pos, desc] = split_item(item, ':');
            const std::size_t comma = desc.find(',');
            if (comma == std::string::npos) continue;
            doors.push_back("a " + desc.substr(0, comma) + " door at " + pos_phrase(pos) + " is " +
                            desc.substr(comma + 1));
        } else if (item.rfind("obj:", 0) == 0) {
            const auto [pos, desc] = split_item(item, ':');
            objects.push_back("a " + desc + " at " + pos_phrase(pos));
        }
    }

    std::ostringstream out;
    bool first = true;
    auto emit = [&](const std::string& part) {
        if (!first) out << "; ";
        out << part;
        first = false;
    };
    if (!agent_pos.empty() && !agent_dir.empty())
        emit("agent at " + pos_phrase(agent_pos) + " facing " + agent_dir);
    else if (!agent_pos.empty())
        emit("agent at " + pos_phrase(agent_pos));
    else if (!agent_dir.empty())
        emit("agent facing " + agent_dir);
    if (!carry.empty()) emit(carry == "none" ? "carrying nothing" : "carrying a " + carry);
    for (const std::string& d : doors) emit(d);
    for (const std::string& o : objects) emit(o);
    if (first) out << "(featureless state)";
    return out.str();
}

std::vector<SFTRecord> export_sft(const std::vector<PolicyBundle>& bundles) {
    struct Keyed {
        std::string goal_text;
        std::string token;
        SFTRecord record;
    };
    std::vector<Keyed> keyed;
    for (const PolicyBundle& b : bundles) {
        if (!b.amdp || !b.policy) throw IntegrityError("export_sft: missing policy or amdp");
        if (b.policy->action_by_state.size() != b.amdp->n_states())
            throw IntegrityError("export_sft: policy and amdp disagree on state count for goal '" +
                                 b.goal.surface_text + "'");
        const std::string goal_text =
            b.goal.surface_text.empty() ? goals::render_goal(b.goal) : b.goal.surface_text;
        for (std::size_t s = 0; s < b.amdp->n_states(); ++s) {
            if (static_cast<int>(s) == b.amdp->goal_state) continue;
            const auto& action = b.policy->action_by_state[s];
            if (!action) continue;
            keyed.push_back({goal_text,
                             b.amdp->states[s],
                             {goal_text, render_state_text(b.amdp->states[s]),
                              gridworld::to_string(*action)}});
        }
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return std::tie(a.goal_text, a.token) < std::tie(b.goal_text, b.token);
    });
    std::vector<SFTRecord> out;
    out.reserve(keyed.size());
    for (Keyed& k : keyed) out.push_back(std::move(k.record));
    return out;
}

void write_sft(const std::vector<SFTRecord>& records, const std::string& path,
               bool prompt_completion) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const SFTRecord& r : records) {
        json j;
        if (prompt_completion) {
            j = {{"prompt", r.goal_text + "\n" + r.state_text}, {"completion", r.action_text}};
        } else {
            j = {{"goal", r.goal_text}, {"state", r.state_text}, {"action", r.action_text}};
        }
        out << j.dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

std::vector<SFTRecord> import_sft(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::vector<SFTRecord> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            SFTRecord r{j.at("goal").get<std::string>(), j.at("state").get<std::string>(),
                        j.at("action").get<std::string>()};
            if (!gridworld::action_from_string(r.action_text))
                throw ParseError("unknown action name: '" + r.action_text + "'", line_no);
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad sft record: ") + e.what(), line_no);
        }
    }
    return out;
}

} // namespace gcrl::sft
