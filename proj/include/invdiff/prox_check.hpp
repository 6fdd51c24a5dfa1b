#pragma once

#include <cstdint>

namespace invdiff {

struct ProxCheckReport {
    int cases = 0;
    bool vacuous = false;
    double max_moreau = 0.0; // |prox + conjugate prox - x|, max over entries
    double max_kkt = 0.0;    // ellipsoid multiplier sign/slackness/feasibility
    double max_oracle = 0.0; // prox vs direct-minimization reference

    bool pass() const;
};

/// Random-case battery over the prox operators; `inject_bug` perturbs one
/// result so tests can confirm the harness actually rejects.
ProxCheckReport run_prox_check(std::uint64_t seed, int cases, bool inject_bug = false);

} // namespace invdiff
