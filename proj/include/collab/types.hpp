#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "collab/errors.hpp"

namespace collab {

enum class Action : int { North = 0, South, East, West, Stay, Interact };
inline constexpr int kNumActions = 6;

enum class HeldItem : int { Nothing = 0, Onion, Plate, Soup };
inline constexpr int kNumHeldItems = 4;

enum class Tile : int { Wall = 0, Floor, OnionPile, PlatePile, Pot, ServeWindow };

// Station kinds an agent can interact with, in a fixed order used for
// feature names and tie-breaking.
enum class StationKind : int { OnionPile = 0, Pot, PlatePile, ServeWindow };
inline constexpr int kNumStations = 4;

enum class TeammateType : int {
    Default = 0,
    PotFocused,
    PlateFocused,
    ServeFocused,
    Mixed,
};
inline constexpr int kNumTypes = 5;

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
    auto operator<=>(const Cell&) const = default;
};

inline const char* to_string(Action a) {
    switch (a) {
        case Action::North: return "north";
        case Action::South: return "south";
        case Action::East: return "east";
        case Action::West: return "west";
        case Action::Stay: return "stay";
        case Action::Interact: return "interact";
    }
    return "?";
}

inline const char* to_string(HeldItem h) {
    switch (h) {
        case HeldItem::Nothing: return "nothing";
        case HeldItem::Onion: return "onion";
        case HeldItem::Plate: return "plate";
        case HeldItem::Soup: return "soup";
    }
    return "?";
}

inline const char* to_string(StationKind k) {
    switch (k) {
        case StationKind::OnionPile: return "onion_pile";
        case StationKind::Pot: return "pot";
        case StationKind::PlatePile: return "plate_pile";
        case StationKind::ServeWindow: return "serve_window";
    }
    return "?";
}

// Canonical type strings; these are also the strings the LLM must emit.
inline const char* to_string(TeammateType t) {
    switch (t) {
        case TeammateType::Default: return "default";
        case TeammateType::PotFocused: return "pot_focused";
        case TeammateType::PlateFocused: return "plate_focused";
        case TeammateType::ServeFocused: return "serve_focused";
        case TeammateType::Mixed: return "mixed";
    }
    return "?";
}

inline TeammateType teammate_type_from_string(std::string_view s) {
    for (int i = 0; i < kNumTypes; ++i) {
        auto t = static_cast<TeammateType>(i);
        if (s == to_string(t)) return t;
    }
    throw Error("unknown teammate type: " + std::string(s));
}

inline constexpr std::array<TeammateType, kNumTypes> all_teammate_types() {
    return {TeammateType::Default, TeammateType::PotFocused, TeammateType::PlateFocused,
            TeammateType::ServeFocused, TeammateType::Mixed};
}

// Deterministic 64-bit mix, used to derive independent rng streams from one
// episode seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform double in [0, 1) from a 64-bit word.
inline double u64_to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// FNV-1a, used for prompt hashes and run ids. Not cryptographic.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace collab
