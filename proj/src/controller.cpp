#include "optonet/controller.hpp"

#include "optonet/errors.hpp"

namespace optonet {

GuardbandResult guardband_calc(Nanos rotation_variance_ns,
                               std::int64_t estimator_error_bytes,
                               std::int64_t bandwidth_bps, Nanos sync_error_ns,
                               Nanos headroom_ns) {
  if (rotation_variance_ns < 0 || estimator_error_bytes < 0 ||
      sync_error_ns < 0 || headroom_ns < 0)
    throw SchemaError("guardband inputs must be >= 0");
  Nanos est_ns = 0;
  if (estimator_error_bytes > 0) {
    if (bandwidth_bps <= 0)
      throw SchemaError("bandwidth must be positive when an estimator error is given");
    std::int64_t bits = estimator_error_bytes * 8;
    est_ns = (bits * 1'000'000'000LL + bandwidth_bps - 1) / bandwidth_bps;
  }
  GuardbandResult r;
  r.raw_ns = rotation_variance_ns + est_ns + 2 * sync_error_ns;
  r.guardband_ns = r.raw_ns + headroom_ns;
  r.min_slice_ns = 10 * r.guardband_ns;
  return r;
}

}  // namespace optonet
