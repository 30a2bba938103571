#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "collab/errors.hpp"
#include "collab/types.hpp"

namespace collab {

// --- Layout ---------------------------------------------------------------

// ASCII map characters:
//   W wall/counter, ' ' floor, O onion pile, D plate pile, P pot,
//   X serve window, 1/2 agent start cells (floor).
struct Layout {
    std::string name;
    int width = 0;
    int height = 0;
    std::vector<Tile> tiles;  // row-major
    std::array<Cell, 2> start_positions{};

    Tile at(Cell c) const { return tiles[static_cast<size_t>(c.row * width + c.col)]; }
    bool in_bounds(Cell c) const {
        return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width;
    }
    bool is_floor(Cell c) const { return in_bounds(c) && at(c) == Tile::Floor; }

    std::vector<Cell> cells_of(Tile kind) const {
        std::vector<Cell> out;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                if (at({r, c}) == kind) out.push_back({r, c});
        return out;
    }
};

inline Tile tile_of(StationKind k) {
    switch (k) {
        case StationKind::OnionPile: return Tile::OnionPile;
        case StationKind::Pot: return Tile::Pot;
        case StationKind::PlatePile: return Tile::PlatePile;
        case StationKind::ServeWindow: return Tile::ServeWindow;
    }
    return Tile::Wall;
}

inline Layout load_layout(const std::string& text, const std::string& name = "layout") {
    std::vector<std::string> rows;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        rows.push_back(line);
    }
    while (!rows.empty() && rows.back().empty()) rows.pop_back();
    if (rows.empty()) throw NonRectangular("layout '" + name + "': empty map");

    const size_t width = rows[0].size();
    for (const auto& r : rows)
        if (r.size() != width)
            throw NonRectangular("layout '" + name + "': ragged rows (expected width " +
                                 std::to_string(width) + ")");

    Layout out;
    out.name = name;
    out.width = static_cast<int>(width);
    out.height = static_cast<int>(rows.size());
    out.tiles.assign(width * rows.size(), Tile::Wall);

    int agents_seen = 0;
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            char ch = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
            Tile t;
            switch (ch) {
                case 'W': t = Tile::Wall; break;
                case ' ': t = Tile::Floor; break;
                case 'O': t = Tile::OnionPile; break;
                case 'D': t = Tile::PlatePile; break;
                case 'P': t = Tile::Pot; break;
                case 'X': t = Tile::ServeWindow; break;
                case '1':
                case '2': {
                    t = Tile::Floor;
                    int idx = ch - '1';
                    if (idx < 2) out.start_positions[static_cast<size_t>(idx)] = {r, c};
                    ++agents_seen;
                    break;
                }
                default:
                    throw UnknownChar("layout '" + name + "': unknown character '" +
                                      std::string(1, ch) + "' at row " + std::to_string(r));
            }
            out.tiles[static_cast<size_t>(r * out.width + c)] = t;
        }
    }

    if (agents_seen != 2)
        throw WrongAgentCount("layout '" + name + "': expected 2 agent markers, found " +
                              std::to_string(agents_seen));
    for (Tile needed : {Tile::OnionPile, Tile::PlatePile, Tile::Pot, Tile::ServeWindow}) {
        if (out.cells_of(needed).empty()) {
            const char* kind = needed == Tile::OnionPile    ? "OnionPile"
                               : needed == Tile::PlatePile  ? "PlatePile"
                               : needed == Tile::Pot        ? "Pot"
                                                            : "ServeWindow";
            throw MissingStation("layout '" + name + "': no " + std::string(kind) + " tile");
        }
    }
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            bool boundary = r == 0 || c == 0 || r == out.height - 1 || c == out.width - 1;
            if (boundary && out.at({r, c}) == Tile::Floor)
                throw Error("layout '" + name + "': floor on boundary at row " +
                            std::to_string(r) + ", col " + std::to_string(c));
        }
    }
    return out;
}

inline Layout load_layout_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open layout file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    std::string stem = path;
    if (auto pos = stem.find_last_of("/\\"); pos != std::string::npos) stem = stem.substr(pos + 1);
    if (auto pos = stem.rfind('.'); pos != std::string::npos) stem = stem.substr(0, pos);
    return load_layout(buf.str(), stem);
}

// --- State ----------------------------------------------------------------

struct EnvConfig {
    int horizon = 400;
    double reward_per_delivery = 20.0;
    int cook_time = 20;
    double gamma = 1.0;
    int handoff_window = 10;  // steps within which a counter pickup counts as a handoff
};

struct PotState {
    int onion_count = 0;
    int cook_timer = 0;
    bool ready = false;
    bool operator==(const PotState&) const = default;
};

struct AgentState {
    Cell pos;
    Action facing = Action::North;  // one of North/South/East/West
    HeldItem held = HeldItem::Nothing;
    bool operator==(const AgentState&) const = default;
};

// Item resting on a counter (wall) cell, with provenance for handoff detection.
struct CounterItem {
    HeldItem item = HeldItem::Nothing;
    int placed_by = 0;
    int placed_at = 0;
    bool operator==(const CounterItem&) const = default;
};

struct GridState {
    std::shared_ptr<const Layout> layout;
    std::array<AgentState, 2> agents{};
    std::map<Cell, PotState> pots;
    std::map<Cell, CounterItem> counters;
    int t = 0;

    bool operator==(const GridState& o) const {
        return layout->name == o.layout->name && agents == o.agents && pots == o.pots &&
               counters == o.counters && t == o.t;
    }
};

struct StepEvents {
    bool delivered = false;
    bool pot_interaction = false;
    bool plate_pickup = false;
    bool onion_pickup = false;
    bool blocked = false;
    bool handoff = false;
    bool operator==(const StepEvents&) const = default;
};

struct StepResult {
    GridState state;
    double reward = 0.0;
    std::array<StepEvents, 2> events{};
};

// Full-state observation; partial observability in this artifact comes only
// from the unknown teammate policy, never from hidden grid content.
struct Observation {
    GridState state;
    int observer = 0;
};

// The seed parameter is accepted for interface symmetry; dynamics are
// deterministic, so reset is a pure function of (layout, cfg).
inline GridState reset(const Layout& layout, const EnvConfig& /*cfg*/, std::uint64_t /*seed*/ = 0) {
    GridState s;
    s.layout = std::make_shared<Layout>(layout);
    for (int i = 0; i < 2; ++i) {
        s.agents[static_cast<size_t>(i)].pos = layout.start_positions[static_cast<size_t>(i)];
        s.agents[static_cast<size_t>(i)].facing = Action::North;
        s.agents[static_cast<size_t>(i)].held = HeldItem::Nothing;
    }
    for (Cell c : layout.cells_of(Tile::Pot)) s.pots[c] = PotState{};
    s.t = 0;
    return s;
}

inline Cell move_target(Cell from, Action dir) {
    switch (dir) {
        case Action::North: return {from.row - 1, from.col};
        case Action::South: return {from.row + 1, from.col};
        case Action::East: return {from.row, from.col + 1};
        case Action::West: return {from.row, from.col - 1};
        default: return from;
    }
}

inline bool is_move(Action a) {
    return a == Action::North || a == Action::South || a == Action::East || a == Action::West;
}

inline Cell faced_cell(const GridState& s, int agent) {
    const auto& ag = s.agents[static_cast<size_t>(agent)];
    return move_target(ag.pos, ag.facing);
}

// One synchronous step. Order inside a step: cooking pots tick down, then
// Interact actions apply in agent index order at pre-move positions, then
// movement resolves simultaneously. Contested moves (same target or swap)
// leave both agents in place with blocked set.
inline StepResult step(const GridState& state, Action a0, Action a1, const EnvConfig& cfg) {
    if (state.t >= cfg.horizon)
        throw EpisodeOver("step called at t=" + std::to_string(state.t) + " with horizon " +
                          std::to_string(cfg.horizon));

    StepResult res;
    res.state = state;
    GridState& s = res.state;
    const Layout& L = *s.layout;
    const std::array<Action, 2> acts{a0, a1};

    for (auto& [cell, pot] : s.pots) {
        if (pot.cook_timer > 0) {
            --pot.cook_timer;
            if (pot.cook_timer == 0) pot.ready = true;
        }
    }

    for (int i = 0; i < 2; ++i) {
        if (acts[static_cast<size_t>(i)] != Action::Interact) continue;
        auto& ag = s.agents[static_cast<size_t>(i)];
        auto& ev = res.events[static_cast<size_t>(i)];
        Cell target = faced_cell(s, i);
        if (!L.in_bounds(target)) continue;
        switch (L.at(target)) {
            case Tile::OnionPile:
                if (ag.held == HeldItem::Nothing) {
                    ag.held = HeldItem::Onion;
                    ev.onion_pickup = true;
                }
                break;
            case Tile::PlatePile:
                if (ag.held == HeldItem::Nothing) {
                    ag.held = HeldItem::Plate;
                    ev.plate_pickup = true;
                }
                break;
            case Tile::Pot: {
                auto& pot = s.pots.at(target);
                if (ag.held == HeldItem::Onion && pot.onion_count < 3 && !pot.ready &&
                    pot.cook_timer == 0) {
                    ag.held = HeldItem::Nothing;
                    ++pot.onion_count;
                    if (pot.onion_count == 3) pot.cook_timer = cfg.cook_time;
                    ev.pot_interaction = true;
                } else if (ag.held == HeldItem::Plate && pot.ready) {
                    ag.held = HeldItem::Soup;
                    pot = PotState{};
                    ev.pot_interaction = true;
                }
                break;
            }
            case Tile::ServeWindow:
                if (ag.held == HeldItem::Soup) {
                    ag.held = HeldItem::Nothing;
                    res.reward += cfg.reward_per_delivery;
                    ev.delivered = true;
                }
                break;
            case Tile::Wall: {
                auto it = s.counters.find(target);
                if (ag.held != HeldItem::Nothing && it == s.counters.end()) {
                    s.counters[target] = CounterItem{ag.held, i, s.t};
                    ag.held = HeldItem::Nothing;
                } else if (ag.held == HeldItem::Nothing && it != s.counters.end()) {
                    ag.held = it->second.item;
                    if (it->second.item == HeldItem::Onion) ev.onion_pickup = true;
                    if (it->second.item == HeldItem::Plate) ev.plate_pickup = true;
                    if (it->second.placed_by != i &&
                        s.t - it->second.placed_at <= cfg.handoff_window) {
                        res.events[0].handoff = true;
                        res.events[1].handoff = true;
                    }
                    s.counters.erase(it);
                }
                break;
            }
            case Tile::Floor:
                break;
        }
    }

    std::array<Cell, 2> cur{s.agents[0].pos, s.agents[1].pos};
    std::array<Cell, 2> want = cur;
    for (int i = 0; i < 2; ++i) {
        Action a = acts[static_cast<size_t>(i)];
        if (!is_move(a)) continue;
        auto& ag = s.agents[static_cast<size_t>(i)];
        ag.facing = a;
        Cell tgt = move_target(cur[static_cast<size_t>(i)], a);
        if (!L.is_floor(tgt)) {
            res.events[static_cast<size_t>(i)].blocked = true;
        } else {
            want[static_cast<size_t>(i)] = tgt;
        }
    }
    if (want[0] == want[1]) {
        for (int i = 0; i < 2; ++i) {
            if (want[static_cast<size_t>(i)] != cur[static_cast<size_t>(i)]) {
                want[static_cast<size_t>(i)] = cur[static_cast<size_t>(i)];
                res.events[static_cast<size_t>(i)].blocked = true;
            }
        }
    } else if (want[0] == cur[1] && want[1] == cur[0]) {
        want = cur;
        res.events[0].blocked = true;
        res.events[1].blocked = true;
    }
    s.agents[0].pos = want[0];
    s.agents[1].pos = want[1];

    ++s.t;
    return res;
}

inline Observation observe(const GridState& state, int agent) {
    return Observation{state, agent};
}

// --- Debug rendering --------------------------------------------------------

inline std::string render_ascii(const GridState& s) {
    const Layout& L = *s.layout;
    std::vector<std::string> rows(static_cast<size_t>(L.height),
                                  std::string(static_cast<size_t>(L.width), '?'));
    for (int r = 0; r < L.height; ++r) {
        for (int c = 0; c < L.width; ++c) {
            char ch = ' ';
            switch (L.at({r, c})) {
                case Tile::Wall: ch = 'W'; break;
                case Tile::Floor: ch = ' '; break;
                case Tile::OnionPile: ch = 'O'; break;
                case Tile::PlatePile: ch = 'D'; break;
                case Tile::Pot: ch = 'P'; break;
                case Tile::ServeWindow: ch = 'X'; break;
            }
            rows[static_cast<size_t>(r)][static_cast<size_t>(c)] = ch;
        }
    }
    for (int i = 0; i < 2; ++i) {
        Cell p = s.agents[static_cast<size_t>(i)].pos;
        rows[static_cast<size_t>(p.row)][static_cast<size_t>(p.col)] = static_cast<char>('1' + i);
    }
    std::string out;
    for (auto& r : rows) {
        out += r;
        out += '\n';
    }
    return out;
}

// --- JSON codecs ------------------------------------------------------------

inline nlohmann::json events_to_json(const StepEvents& e) {
    return {{"delivered", e.delivered},   {"pot_interaction", e.pot_interaction},
            {"plate_pickup", e.plate_pickup}, {"onion_pickup", e.onion_pickup},
            {"blocked", e.blocked},       {"handoff", e.handoff}};
}

inline StepEvents events_from_json(const nlohmann::json& j) {
    StepEvents e;
    e.delivered = j.at("delivered").get<bool>();
    e.pot_interaction = j.at("pot_interaction").get<bool>();
    e.plate_pickup = j.at("plate_pickup").get<bool>();
    e.onion_pickup = j.at("onion_pickup").get<bool>();
    e.blocked = j.at("blocked").get<bool>();
    e.handoff = j.at("handoff").get<bool>();
    return e;
}

inline nlohmann::json state_to_json(const GridState& s) {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : s.agents) {
        agents.push_back({{"row", a.pos.row},
                          {"col", a.pos.col},
                          {"facing", static_cast<int>(a.facing)},
                          {"held", static_cast<int>(a.held)}});
    }
    nlohmann::json pots = nlohmann::json::array();
    for (const auto& [cell, pot] : s.pots) {
        pots.push_back({{"row", cell.row},
                        {"col", cell.col},
                        {"onions", pot.onion_count},
                        {"timer", pot.cook_timer},
                        {"ready", pot.ready}});
    }
    nlohmann::json counters = nlohmann::json::array();
    for (const auto& [cell, item] : s.counters) {
        counters.push_back({{"row", cell.row},
                            {"col", cell.col},
                            {"item", static_cast<int>(item.item)},
                            {"placed_by", item.placed_by},
                            {"placed_at", item.placed_at}});
    }
    return {{"layout", s.layout->name},
            {"agents", agents},
            {"pots", pots},
            {"counters", counters},
            {"t", s.t}};
}

inline GridState state_from_json(const nlohmann::json& j, std::shared_ptr<const Layout> layout) {
    if (j.at("layout").get<std::string>() != layout->name)
        throw Error("state layout '" + j.at("layout").get<std::string>() +
                    "' does not match provided layout '" + layout->name + "'");
    GridState s;
    s.layout = std::move(layout);
    int i = 0;
    for (const auto& a : j.at("agents")) {
        auto& ag = s.agents[static_cast<size_t>(i++)];
        ag.pos = {a.at("row").get<int>(), a.at("col").get<int>()};
        ag.facing = static_cast<Action>(a.at("facing").get<int>());
        ag.held = static_cast<HeldItem>(a.at("held").get<int>());
    }
    for (const auto& p : j.at("pots")) {
        PotState pot;
        pot.onion_count = p.at("onions").get<int>();
        pot.cook_timer = p.at("timer").get<int>();
        pot.ready = p.at("ready").get<bool>();
        s.pots[{p.at("row").get<int>(), p.at("col").get<int>()}] = pot;
    }
    for (const auto& c : j.at("counters")) {
        CounterItem item;
        item.item = static_cast<HeldItem>(c.at("item").get<int>());
        item.placed_by = c.at("placed_by").get<int>();
        item.placed_at = c.at("placed_at").get<int>();
        s.counters[{c.at("row").get<int>(), c.at("col").get<int>()}] = item;
    }
    s.t = j.at("t").get<int>();
    return s;
}

inline nlohmann::json observation_to_json(const Observation& o) {
    return {{"state", state_to_json(o.state)}, {"observer", o.observer}};
}

inline Observation observation_from_json(const nlohmann::json& j,
                                         std::shared_ptr<const Layout> layout) {
    return Observation{state_from_json(j.at("state"), std::move(layout)),
                       j.at("observer").get<int>()};
}

}  // namespace collab
