#pragma once

#include <map>

#include "optonet/sim.hpp"
#include "optonet/time_flow.hpp"
#include "optonet/types.hpp"

namespace optonet {

struct GuardbandResult {
  Nanos raw_ns = 0;        // before headroom
  Nanos guardband_ns = 0;  // raw + headroom
  Nanos min_slice_ns = 0;  // 10x guardband keeps the duty cycle above 90%
};

// guardband = rotation variance + estimator error converted to wire time
// (rounded up) + twice the sync error, plus headroom.
GuardbandResult guardband_calc(Nanos rotation_variance_ns,
                               std::int64_t estimator_error_bytes,
                               std::int64_t bandwidth_bps, Nanos sync_error_ns,
                               Nanos headroom_ns);

// Install the full optical schedule and every time-flow table before time
// zero; endpoints self-regulate slices from there (the TO workflow).
inline void preload_to(Simulator& sim, const OpticalSchedule& schedule,
                       const std::map<NodeId, TimeFlowTable>& tables) {
  sim.preload(schedule, tables);
}

// The TA workflow: every interval a fresh TM is collected and the callback's
// plan deployed, new entries first and the topology switch after, so no
// instant sees new circuits without their routes.
inline void run_ta_loop(Simulator& sim, Nanos interval_ns, TaCallback cb) {
  sim.set_ta_loop(interval_ns, std::move(cb));
}

}  // namespace optonet
