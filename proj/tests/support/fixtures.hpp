#pragma once

#include <osnr/model.hpp>

#include <cmath>

namespace fixtures {

inline osnr::SystemMatrix fixture_a_system() {
    osnr::SystemMatrix sys;
    sys.gamma.resize(2, 2);
    sys.gamma << 0.001, 0.002, 0.002, 0.001;
    sys.n0 = osnr::Vector::Constant(2, 0.01);
    return sys;
}

/// Player (alpha 1, beta 2, a 0.01) on channel 1, 20 dB seeker on channel 2.
inline osnr::ServicePartition fixture_a_partition() {
    return osnr::ServicePartition({osnr::PlayerParams{1.0, 2.0, 0.01}, osnr::SeekerParams{100.0}});
}

/// Fixture A with a_1 = 2.5 and beta_1 / alpha_1 = 1.
inline osnr::ServicePartition fixture_a_prime_partition() {
    return osnr::ServicePartition({osnr::PlayerParams{1.0, 1.0, 2.5}, osnr::SeekerParams{100.0}});
}

inline osnr::StackedSystem fixture_a() { return osnr::assemble(fixture_a_system(), fixture_a_partition()); }
inline osnr::StackedSystem fixture_a_prime() {
    return osnr::assemble(fixture_a_system(), fixture_a_prime_partition());
}

/// Player set u1 + u2 = 1 lies strictly outside the seeker half-plane u1 + u2 >= 2.
inline osnr::StackedSystem fixture_b() {
    osnr::Matrix gt(1, 2);
    gt << 1.0, 1.0;
    osnr::Matrix gh(1, 2);
    gh << 1.0, 1.0;
    return osnr::stack_from_blocks(gt, osnr::Vector::Constant(1, 1.0), gh, osnr::Vector::Constant(1, 2.0));
}

}  // namespace fixtures
