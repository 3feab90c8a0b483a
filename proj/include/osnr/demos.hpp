#pragma once

// Built-in demonstration scenarios on a single 5-span link.
//
// demo3:  two players and one 20 dB seeker around 1555 nm.
// demo30: twenty players and ten 20 dB seekers (every third channel) on a
//         1 nm grid with a shallow gain curvature.
//
// The pricing parameters are chosen for this artifact; they are not taken
// from any published parameter set.

#include <osnr/scenario.hpp>

#include <string>

namespace osnr::demos {

[[nodiscard]] inline json demo3_json() {
    json channels = json::array();
    channels.push_back({{"role", "player"}, {"alpha", 1.0}, {"beta", 4.0}, {"a", 1.0}});
    channels.push_back({{"role", "player"}, {"alpha", 1.0}, {"beta", 8.0}, {"a", 1.0}});
    channels.push_back({{"role", "seeker"}, {"target_osnr", "20 dB"}});
    return json{
        {"name", "demo3"},
        {"network",
         {{"links",
           json::array({{{"id", "L1"},
                         {"output_power_mW", 20.0},
                         {"span_count", 5},
                         {"span",
                          {{"loss_dB", 30.0},
                           {"gain", {{"shape", "parabolic"}, {"peak_gain_dB", 30.0}, {"center_nm", 1555.0},
                                     {"curvature_dB_per_nm2", 0.05}}},
                           {"ase", {{"nsp", 1.5}, {"optical_bandwidth_GHz", 12.5}}}}}}})}}},
        {"channel_grid", {{"center_nm", 1555.0}, {"spacing_nm", 1.0}}},
        {"tx_noise", {{"fraction", 0.005}, {"reference_input_mW", 1.0}}},
        {"channels", channels},
        {"run", {{"solver", "auto"}, {"tol", 1e-8}, {"max_iter", 10000}, {"u0_mW", 0.5}}}};
}

[[nodiscard]] inline json demo30_json() {
    json channels = json::array();
    int player = 0;
    for (int i = 0; i < 30; ++i) {
        if (i % 3 == 2) {
            channels.push_back({{"role", "seeker"}, {"target_osnr", "20 dB"}});
        } else {
            channels.push_back({{"role", "player"}, {"alpha", 1.0}, {"beta", 2.0 + 0.1 * player}, {"a", 1.0}});
            ++player;
        }
    }
    return json{
        {"name", "demo30"},
        {"network",
         {{"links",
           json::array({{{"id", "L1"},
                         {"output_power_mW", 200.0},
                         {"span_count", 5},
                         {"span",
                          {{"loss_dB", 30.0},
                           {"gain", {{"shape", "parabolic"}, {"peak_gain_dB", 30.0}, {"center_nm", 1555.0},
                                     {"curvature_dB_per_nm2", 0.005}}},
                           {"ase", {{"nsp", 1.5}, {"optical_bandwidth_GHz", 12.5}}}}}}})}}},
        {"channel_grid", {{"center_nm", 1555.0}, {"spacing_nm", 1.0}}},
        {"tx_noise", {{"fraction", 0.005}, {"reference_input_mW", 1.0}}},
        {"channels", channels},
        {"run", {{"solver", "auto"}, {"tol", 1e-8}, {"max_iter", 10000}, {"u0_mW", 0.5}}}};
}

[[nodiscard]] inline Scenario demo3() { return parse_scenario(demo3_json(), "demo3"); }
[[nodiscard]] inline Scenario demo30() { return parse_scenario(demo30_json(), "demo30"); }

}  // namespace osnr::demos
