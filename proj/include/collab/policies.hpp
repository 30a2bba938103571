#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "collab/env.hpp"
#include "collab/types.hpp"

namespace collab {

enum class Subtask : int { FetchOnion = 0, FillPot, FetchPlate, PlateSoup, Deliver, Idle };
inline constexpr int kNumSubtasks = 6;

inline const char* to_string(Subtask s) {
    switch (s) {
        case Subtask::FetchOnion: return "fetch_onion";
        case Subtask::FillPot: return "fill_pot";
        case Subtask::FetchPlate: return "fetch_plate";
        case Subtask::PlateSoup: return "plate_soup";
        case Subtask::Deliver: return "deliver";
        case Subtask::Idle: return "idle";
    }
    return "?";
}

// Subtask weights are calibration constants; they are normalized over the
// currently feasible subtasks at each decision point.
struct PolicyProfile {
    std::array<double, kNumSubtasks> weights{};
    int commitment = 6;
    std::optional<StationKind> idle_station;
    int cycle_period = 0;   // >0: rotate emphasis through a subtask schedule
    double cycle_boost = 0.85;  // blend factor toward the schedule's current subtask
    // Give way for one step after a contested move fails. Symmetric contests
    // livelock unless exactly one side yields, so only the best-response
    // profiles set this.
    bool yield_on_conflict = false;
    // Set a useless held item down on a counter after stalling. Also a
    // best-response-only trait: two stashers can starve the pipeline the
    // teammate's bias is meant to feed.
    bool stash_when_stuck = false;
};

using CellPred = std::function<bool(Cell)>;

namespace detail {

inline constexpr std::array<Action, 4> kMoveOrder{Action::North, Action::South, Action::East,
                                                  Action::West};

}  // namespace detail

// First move of a shortest path toward the goal predicate, BFS over floor
// cells with the other agent treated as an obstacle. Ties break in
// (North, South, East, West) order. Standing on a floor goal cell yields
// Stay; standing next to a non-floor goal cell yields the turn toward it,
// or Interact once facing it. Unreachable goals yield Stay.
inline Action shortest_path_step(const GridState& state, int agent, const CellPred& goal) {
    const Layout& L = *state.layout;
    const Cell start = state.agents[static_cast<size_t>(agent)].pos;
    const Cell other = state.agents[static_cast<size_t>(1 - agent)].pos;

    if (goal(start)) return Action::Stay;
    for (Action dir : detail::kMoveOrder) {
        Cell n = move_target(start, dir);
        if (L.in_bounds(n) && L.at(n) != Tile::Floor && goal(n)) {
            return state.agents[static_cast<size_t>(agent)].facing == dir ? Action::Interact
                                                                          : dir;
        }
    }

    auto is_target = [&](Cell c) {
        if (goal(c)) return true;
        for (Action dir : detail::kMoveOrder) {
            Cell n = move_target(c, dir);
            if (L.in_bounds(n) && L.at(n) != Tile::Floor && goal(n)) return true;
        }
        return false;
    };

    std::vector<char> seen(static_cast<size_t>(L.width * L.height), 0);
    auto idx = [&](Cell c) { return static_cast<size_t>(c.row * L.width + c.col); };
    seen[idx(start)] = 1;
    if (L.is_floor(other)) seen[idx(other)] = 1;

    struct Node {
        Cell cell;
        Action first_move;
    };
    std::deque<Node> queue;
    for (Action dir : detail::kMoveOrder) {
        Cell n = move_target(start, dir);
        if (!L.is_floor(n) || seen[idx(n)]) continue;
        seen[idx(n)] = 1;
        queue.push_back({n, dir});
    }
    while (!queue.empty()) {
        Node node = queue.front();
        queue.pop_front();
        if (is_target(node.cell)) return node.first_move;
        for (Action dir : detail::kMoveOrder) {
            Cell n = move_target(node.cell, dir);
            if (!L.is_floor(n) || seen[idx(n)]) continue;
            seen[idx(n)] = 1;
            queue.push_back({n, node.first_move});
        }
    }
    return Action::Stay;
}

// Teammate position's closest station kind by Manhattan distance, ties in
// StationKind order. This is the coarse state used by the PLASTIC baseline.
inline StationKind nearest_station_kind(const GridState& state, int agent) {
    const Layout& L = *state.layout;
    const Cell pos = state.agents[static_cast<size_t>(agent)].pos;
    StationKind best = StationKind::OnionPile;
    int best_dist = INT32_MAX;
    for (int k = 0; k < kNumStations; ++k) {
        auto kind = static_cast<StationKind>(k);
        for (Cell c : L.cells_of(tile_of(kind))) {
            int d = std::abs(c.row - pos.row) + std::abs(c.col - pos.col);
            if (d < best_dist) {
                best_dist = d;
                best = kind;
            }
        }
    }
    return best;
}

inline bool pot_fillable(const PotState& p) {
    return p.onion_count < 3 && !p.ready && p.cook_timer == 0;
}

// Pot a plate-carrier should head to: ready first, then the cooking pot
// closest to done, then row-major position. Pots that are neither ready nor
// cooking are not worth camping.
inline std::optional<Cell> choose_soup_pot(const GridState& s) {
    std::optional<Cell> best;
    auto rank = [&](const PotState& p) { return std::tuple(p.ready ? 0 : 1, p.cook_timer); };
    for (const auto& [cell, pot] : s.pots) {
        if (!pot.ready && pot.cook_timer == 0) continue;
        if (!best || rank(pot) < rank(s.pots.at(*best))) best = cell;
    }
    return best;
}

// Deposits concentrate on the fullest fillable pot so a batch completes as
// early as possible.
inline std::optional<Cell> choose_fill_pot(const GridState& s) {
    std::optional<Cell> best;
    for (const auto& [cell, pot] : s.pots) {
        if (!pot_fillable(pot)) continue;
        if (!best || pot.onion_count > s.pots.at(*best).onion_count) best = cell;
    }
    return best;
}

inline bool chebyshev_adjacent(Cell a, Cell b) {
    return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)) <= 1;
}

inline bool orthogonal_adjacent(Cell a, Cell b) {
    return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1;
}

// Standing here would block someone's interaction with a station.
inline bool blocks_station_access(const Layout& L, Cell c) {
    for (Action dir : detail::kMoveOrder) {
        Cell n = move_target(c, dir);
        if (!L.in_bounds(n)) continue;
        Tile t = L.at(n);
        if (t != Tile::Wall && t != Tile::Floor) return true;
    }
    return false;
}

// Where to linger near `targets` without getting in anyone's way. Tiers relax
// from "beside the target, off every station's access cell" down to "beside
// the target"; the first tier with any layout cell wins.
inline CellPred lingering_spot_pred(const Layout& L, const GridState& s,
                                    std::vector<Cell> targets) {
    auto near_target = [&L, targets](Cell c) {
        if (!L.is_floor(c)) return false;
        for (Cell t : targets)
            if (chebyshev_adjacent(c, t)) return true;
        return false;
    };
    auto off_access = [&L](Cell c) { return !blocks_station_access(L, c); };
    auto not_orth = [targets](Cell c) {
        for (Cell t : targets)
            if (orthogonal_adjacent(c, t)) return false;
        return true;
    };
    std::vector<CellPred> tiers{
        [=](Cell c) { return near_target(c) && off_access(c); },
        [=](Cell c) { return near_target(c) && not_orth(c); },
        near_target,
    };
    for (const auto& tier : tiers) {
        for (int r = 0; r < L.height; ++r)
            for (int c = 0; c < L.width; ++c)
                if (tier({r, c})) return tier;
    }
    (void)s;
    return near_target;
}

// A scripted agent: samples a subtask from profile weights over the feasible
// set, commits to it for a fixed number of steps, and walks BFS paths toward
// the subtask's station. Pure function of (observation, commitment state,
// rng stream).
class SubtaskPolicy {
public:
    SubtaskPolicy(PolicyProfile profile, int agent, std::uint64_t seed)
        : profile_(std::move(profile)), agent_(agent), rng_(seed) {}

    Action act(const Observation& obs) {
        const GridState& s = obs.state;
        Action action = decide(s);
        const Cell pos = s.agents[static_cast<size_t>(agent_)].pos;
        if (profile_.yield_on_conflict && is_move(action) && last_was_move_ &&
            pos == last_pos_ && move_target(last_pos_, last_action_) == move_target(pos, action)) {
            Cell target = move_target(pos, action);
            bool occupied = s.agents[static_cast<size_t>(1 - agent_)].pos == target;
            if (s.layout->is_floor(target) && !occupied) action = Action::Stay;  // give way once
        }
        last_pos_ = pos;
        last_action_ = action;
        last_was_move_ = is_move(action);
        return action;
    }

    Subtask current_subtask() const { return current_; }

private:
    Action decide(const GridState& s) {
        // Soup in hand always goes to the window, whatever the profile says.
        if (s.agents[static_cast<size_t>(agent_)].held == HeldItem::Soup &&
            !s.layout->cells_of(Tile::ServeWindow).empty()) {
            current_ = Subtask::Deliver;
            remaining_ = 0;
            return execute(s, Subtask::Deliver);
        }
        if (remaining_ <= 0 || !feasible(s, current_)) {
            if (!resample(s)) {
                remaining_ = 0;
                ++stalled_;
                // Holding an item nothing can use blocks the whole pipeline;
                // after a grace period, set it down on a free counter.
                if (profile_.stash_when_stuck &&
                    s.agents[static_cast<size_t>(agent_)].held != HeldItem::Nothing &&
                    stalled_ > 3 * profile_.commitment) {
                    const Layout& L = *s.layout;
                    return shortest_path_step(s, agent_, [&](Cell c) {
                        return L.at(c) == Tile::Wall && s.counters.find(c) == s.counters.end();
                    });
                }
                return step_off_access_cells(s);
            }
            stalled_ = 0;
        }
        --remaining_;
        return execute(s, current_);
    }

    // A Stay out of a pathing call means the target is unreachable right now;
    // drop the commitment so another subtask can be tried next step. Waiting
    // may not happen on a station access cell: camping there is how two
    // agents end up each blocking the cell the other needs.
    Action step_off_access_cells(const GridState& s) {
        const Layout& L = *s.layout;
        const Cell pos = s.agents[static_cast<size_t>(agent_)].pos;
        if (!blocks_station_access(L, pos)) return Action::Stay;
        return shortest_path_step(s, agent_, [&L](Cell c) {
            return L.is_floor(c) && !blocks_station_access(L, c);
        });
    }

    Action path_or_give_up(const GridState& s, const CellPred& goal) {
        Action a = shortest_path_step(s, agent_, goal);
        if (a == Action::Stay) {
            remaining_ = 0;
            return step_off_access_cells(s);
        }
        return a;
    }

    // FillPot and PlateSoup are feasible with empty hands too: the agent
    // first fetches the onion or plate they need. Onions are only worth
    // fetching while some pot can take them.
    bool feasible(const GridState& s, Subtask task) const {
        HeldItem held = s.agents[static_cast<size_t>(agent_)].held;
        auto any_fillable = [&] {
            for (const auto& [c, p] : s.pots)
                if (pot_fillable(p)) return true;
            return false;
        };
        switch (task) {
            case Subtask::FetchOnion:
                return held == HeldItem::Nothing &&
                       !s.layout->cells_of(Tile::OnionPile).empty() && any_fillable();
            case Subtask::FillPot: {
                if (held != HeldItem::Onion &&
                    !(held == HeldItem::Nothing &&
                      !s.layout->cells_of(Tile::OnionPile).empty()))
                    return false;
                return any_fillable();
            }
            case Subtask::FetchPlate:
                return held == HeldItem::Nothing && !s.layout->cells_of(Tile::PlatePile).empty();
            case Subtask::PlateSoup: {
                if (held != HeldItem::Plate &&
                    !(held == HeldItem::Nothing &&
                      !s.layout->cells_of(Tile::PlatePile).empty()))
                    return false;
                return choose_soup_pot(s).has_value();
            }
            case Subtask::Deliver:
                return held == HeldItem::Soup &&
                       !s.layout->cells_of(Tile::ServeWindow).empty();
            case Subtask::Idle:
                // An onion in hand with a pot that can take it is never idled
                // away; plates may be hoarded, that is a legitimate bias for
                // teammate profiles. Stashing profiles must not idle with a
                // dead plate or the set-it-down recovery never fires.
                if (held == HeldItem::Onion && any_fillable()) return false;
                if (profile_.stash_when_stuck && held == HeldItem::Plate &&
                    !choose_soup_pot(s).has_value())
                    return false;
                return true;
        }
        return false;
    }

    std::array<double, kNumSubtasks> effective_weights(const GridState& s) const {
        auto w = profile_.weights;
        if (profile_.cycle_period > 0) {
            // Rotating emphasis schedule: each slice of the period blends the
            // base weights toward one subtask. The rotation visits cooking,
            // plating, lingering, scooping and delivering in a fixed order, so
            // the behavior has a recognizable temporal signature.
            static constexpr std::array<Subtask, 5> rotation{
                Subtask::FillPot, Subtask::FetchPlate, Subtask::Idle, Subtask::PlateSoup,
                Subtask::Deliver};
            int slice = std::max(1, profile_.cycle_period / 5);
            auto boosted = rotation[static_cast<size_t>((s.t / slice) % 5)];
            double alpha = std::clamp(profile_.cycle_boost, 0.0, 1.0);
            double total = 0.0;
            for (double x : w) total += x;
            for (int i = 0; i < kNumSubtasks; ++i) w[static_cast<size_t>(i)] *= (1.0 - alpha);
            w[static_cast<size_t>(boosted)] += alpha * std::max(total, 1.0);
        }
        return w;
    }

    bool resample(const GridState& s) {
        auto w = effective_weights(s);
        double total = 0.0;
        for (int i = 0; i < kNumSubtasks; ++i) {
            if (!feasible(s, static_cast<Subtask>(i))) w[static_cast<size_t>(i)] = 0.0;
            total += w[static_cast<size_t>(i)];
        }
        if (total <= 0.0) return false;
        double r = u64_to_unit(rng_()) * total;
        double acc = 0.0;
        int chosen = -1;
        for (int i = 0; i < kNumSubtasks; ++i) {
            acc += w[static_cast<size_t>(i)];
            if (w[static_cast<size_t>(i)] > 0.0 && r < acc) {
                chosen = i;
                break;
            }
        }
        if (chosen < 0) {
            for (int i = kNumSubtasks - 1; i >= 0; --i) {
                if (w[static_cast<size_t>(i)] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        current_ = static_cast<Subtask>(chosen);
        remaining_ = profile_.commitment;
        return true;
    }

    Action execute(const GridState& s, Subtask task) {
        const Layout& L = *s.layout;
        const Cell pos = s.agents[static_cast<size_t>(agent_)].pos;
        auto station_pred = [&](Tile kind) {
            return [&L, kind](Cell c) { return L.at(c) == kind; };
        };
        const HeldItem held = s.agents[static_cast<size_t>(agent_)].held;
        switch (task) {
            case Subtask::FetchOnion:
                return path_or_give_up(s, station_pred(Tile::OnionPile));
            case Subtask::FillPot: {
                if (held == HeldItem::Nothing)
                    return path_or_give_up(s, station_pred(Tile::OnionPile));
                auto target = choose_fill_pot(s);
                if (!target) return Action::Stay;
                return path_or_give_up(s, [&](Cell c) { return c == *target; });
            }
            case Subtask::FetchPlate:
                return path_or_give_up(s, station_pred(Tile::PlatePile));
            case Subtask::PlateSoup: {
                if (held == HeldItem::Nothing)
                    return path_or_give_up(s, station_pred(Tile::PlatePile));
                auto target = choose_soup_pot(s);
                if (!target) return Action::Stay;
                if (s.pots.at(*target).ready)
                    return path_or_give_up(s, [&](Cell c) { return c == *target; });
                // Wait beside the pot without squatting on anyone's access cell.
                auto waiting = lingering_spot_pred(L, s, {*target});
                if (waiting(pos)) return Action::Stay;
                return shortest_path_step(s, agent_, waiting);
            }
            case Subtask::Deliver:
                return path_or_give_up(s, station_pred(Tile::ServeWindow));
            case Subtask::Idle: {
                if (!profile_.idle_station) return step_off_access_cells(s);
                auto loiter = lingering_spot_pred(L, s, L.cells_of(tile_of(*profile_.idle_station)));
                if (loiter(pos)) return Action::Stay;
                return shortest_path_step(s, agent_, loiter);
            }
        }
        return Action::Stay;
    }

    PolicyProfile profile_;
    int agent_;
    std::mt19937_64 rng_;
    Subtask current_ = Subtask::Idle;
    int remaining_ = 0;
    int stalled_ = 0;
    Cell last_pos_{-1, -1};
    Action last_action_ = Action::Stay;
    bool last_was_move_ = false;
};

// --- Shipped profiles -------------------------------------------------------

namespace detail {

inline std::array<std::optional<PolicyProfile>, kNumTypes>& teammate_overrides() {
    static std::array<std::optional<PolicyProfile>, kNumTypes> v;
    return v;
}

inline std::array<std::optional<PolicyProfile>, kNumTypes>& best_response_overrides() {
    static std::array<std::optional<PolicyProfile>, kNumTypes> v;
    return v;
}

inline int& default_commitment() {
    static int v = 6;
    return v;
}

}  // namespace detail

// Calibration hooks, set once at startup from the config file.
inline void set_default_commitment(int commitment) { detail::default_commitment() = commitment; }

inline void set_teammate_profile_override(TeammateType type,
                                          std::optional<PolicyProfile> profile) {
    detail::teammate_overrides()[static_cast<size_t>(type)] = std::move(profile);
}

inline void set_best_response_profile_override(TeammateType type,
                                               std::optional<PolicyProfile> profile) {
    detail::best_response_overrides()[static_cast<size_t>(type)] = std::move(profile);
}

// Weight order: FetchOnion, FillPot, FetchPlate, PlateSoup, Deliver, Idle.
inline PolicyProfile teammate_profile(TeammateType type) {
    if (const auto& o = detail::teammate_overrides()[static_cast<size_t>(type)]) return *o;
    PolicyProfile p;
    p.commitment = detail::default_commitment();
    switch (type) {
        case TeammateType::Default:
            p.weights = {0.2, 0.2, 0.2, 0.2, 0.2, 0.0};
            p.commitment = 3;  // short commitments keep its mixture steady
            break;
        case TeammateType::PotFocused:
            p.weights = {0.45, 0.45, 0.0, 0.0, 0.02, 0.08};
            p.idle_station = StationKind::Pot;
            break;
        case TeammateType::PlateFocused:
            p.weights = {0.04, 0.04, 0.45, 0.04, 0.08, 0.35};
            p.idle_station = StationKind::PlatePile;
            break;
        case TeammateType::ServeFocused:
            p.weights = {0.03, 0.03, 0.10, 0.40, 0.40, 0.04};
            p.idle_station = StationKind::Pot;  // waits where the soup appears
            break;
        case TeammateType::Mixed:
            p.weights = {0.2, 0.2, 0.2, 0.2, 0.2, 0.0};
            p.cycle_period = 30;
            p.cycle_boost = 0.85;
            p.idle_station = StationKind::ServeWindow;  // its idle stop is unique
            break;
    }
    return p;
}

// Complementary scripted policies standing in for trained best responses.
inline PolicyProfile best_response_profile(TeammateType predicted) {
    if (const auto& o = detail::best_response_overrides()[static_cast<size_t>(predicted)])
        return *o;
    PolicyProfile p;
    p.commitment = detail::default_commitment();
    p.yield_on_conflict = true;
    p.stash_when_stuck = true;
    switch (predicted) {
        case TeammateType::Default:
            p.weights = {0.30, 0.30, 0.02, 0.18, 0.12, 0.08};
            break;
        case TeammateType::Mixed:
            // the scheduled mixed teammate spends long stretches plate-side,
            // so its complement cooks like the plate-focused response
            p.weights = {0.33, 0.33, 0.01, 0.16, 0.12, 0.05};
            break;
        case TeammateType::PotFocused:
            p.weights = {0.04, 0.04, 0.14, 0.60, 0.12, 0.06};
            break;
        case TeammateType::PlateFocused:
            p.weights = {0.33, 0.33, 0.01, 0.16, 0.12, 0.05};
            break;
        case TeammateType::ServeFocused:
            // hand-tuned distinct variants consistently lost to the plate
            // complement here: the serve teammate owns the pot/plate zones,
            // so its partner should cook and convert exactly like the
            // plate-focused complement
            p.weights = {0.33, 0.33, 0.01, 0.16, 0.12, 0.05};
            break;
    }
    return p;
}

inline SubtaskPolicy make_teammate_policy(TeammateType type, int agent, std::uint64_t seed) {
    return SubtaskPolicy(teammate_profile(type), agent, seed);
}

inline SubtaskPolicy make_best_response_policy(TeammateType predicted, int agent,
                                               std::uint64_t seed) {
    return SubtaskPolicy(best_response_profile(predicted), agent, seed);
}

}  // namespace collab
