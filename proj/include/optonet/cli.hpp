#pragma once

#include <optional>
#include <string>
#include <vector>

#include "optonet/json_io.hpp"
#include "optonet/types.hpp"

namespace optonet::cli {

// Exit codes shared by all subcommands: 0 success, 2 schema error,
// 3 infeasibility, 1 unexpected failure.
constexpr int kOk = 0;
constexpr int kUnexpected = 1;
constexpr int kSchema = 2;
constexpr int kInfeasible = 3;

struct RunOptions {
  std::vector<std::string> scenario_paths;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  int jobs = 1;
  bool trace = false;
};

int cmd_run(const RunOptions& opt, std::ostream& log);
int cmd_validate(const std::string& scenario_path, std::ostream& log);
int cmd_oracle(const std::string& scenario_path, NodeId src, NodeId dst,
               SliceId ts, int max_hop, std::ostream& log);
int cmd_guardband(Nanos rotation_variance_ns, std::int64_t estimator_error_bytes,
                  std::int64_t bandwidth_bps, Nanos sync_error_ns,
                  Nanos headroom_ns, std::ostream& log);

}  // namespace optonet::cli
