#pragma once

#include <cstdint>

#include "collab/env.hpp"
#include "collab/fingerprint.hpp"
#include "collab/policies.hpp"
#include "collab/types.hpp"

namespace collab {

// Salts for deriving independent rng streams from one episode seed.
inline constexpr std::uint64_t kTeammateSalt = 0xA1;
inline constexpr std::uint64_t kProbeControllerSalt = 0xB2;
inline constexpr std::uint64_t kRoutedControllerSalt = 0xC3;
inline constexpr std::uint64_t kClassifierSalt = 0xD4;

inline std::uint64_t derive_seed(std::uint64_t episode_seed, std::uint64_t salt) {
    return splitmix64(episode_seed ^ splitmix64(salt));
}

struct ProbeResult {
    ProbeHistory history;
    GridState state;  // state after the probe window
    double reward = 0.0;
    int deliveries = 0;
    SubtaskPolicy teammate;
};

// Probe window rollout: the teammate plays its type, the controlled agent
// plays the best response to the default type. The returned teammate policy
// carries its advanced rng/commitment state so an episode can continue from
// where the probe stopped.
inline ProbeResult run_probe(const Layout& layout, TeammateType true_type, int probe_length,
                             const EnvConfig& cfg, std::uint64_t episode_seed) {
    ProbeResult out{
        {},
        reset(layout, cfg, episode_seed),
        0.0,
        0,
        make_teammate_policy(true_type, kTeammateAgent,
                             derive_seed(episode_seed, kTeammateSalt)),
    };
    SubtaskPolicy controller = make_best_response_policy(
        TeammateType::Default, kControlledAgent, derive_seed(episode_seed, kProbeControllerSalt));

    for (int t = 0; t < probe_length; ++t) {
        Observation obs0 = observe(out.state, kTeammateAgent);
        Observation obs1 = observe(out.state, kControlledAgent);
        Action a0 = out.teammate.act(obs0);
        Action a1 = controller.act(obs1);
        StepResult res = step(out.state, a0, a1, cfg);
        out.history.steps.push_back({obs0, a0, a1, res.reward, res.events});
        out.reward += res.reward;
        for (const auto& ev : res.events)
            if (ev.delivered) ++out.deliveries;
        out.state = res.state;
    }
    return out;
}

}  // namespace collab
