#pragma once

#include <string>
#include <vector>

#include "gcrl/amdp.hpp"
#include "gcrl/goals.hpp"
#include "gcrl/solver.hpp"

namespace gcrl::sft {

using amdp::AMDP;
using goals::Goal;
using solver::Policy;

// One supervised example: instruction, readable state, optimal action.
struct SFTRecord {
    std::string goal_text;
    std::string state_text;
    std::string action_text;
    bool operator==(const SFTRecord&) const = default;
};

// Human-readable rendering of an abstract-state token: agent pose, carried
// item, doors, then goal-relevant objects, in token order.
std::string render_state_text(const std::string& token);

struct PolicyBundle {
    Goal goal;
    const AMDP* amdp = nullptr;
    const Policy* policy = nullptr;
};

// One record per (goal, state) in each policy's domain, the absorbing goal
// state excluded; ordered by (goal text, state token). Throws
// IntegrityError on a policy/AMDP state-count mismatch.
std::vector<SFTRecord> export_sft(const std::vector<PolicyBundle>& bundles);

// JSONL {"goal", "state", "action"}; prompt_completion instead emits
// {"prompt": goal + "\n" + state, "completion": action} for fine-tuning
// toolchains.
void write_sft(const std::vector<SFTRecord>& records, const std::string& path,
               bool prompt_completion = false);

// Parses the {"goal","state","action"} form; ParseError carries the line
// number, unknown action names included.
std::vector<SFTRecord> import_sft(const std::string& path);

} // namespace gcrl::sft
