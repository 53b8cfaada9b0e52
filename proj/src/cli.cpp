#include "optonet/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "optonet/controller.hpp"
#include "optonet/errors.hpp"
#include "optonet/oracle.hpp"
#include "optonet/scenario.hpp"

namespace optonet::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string fct_csv(const Metrics& m) {
  std::ostringstream os;
  os << "flow_id,src_host,dst_host,size_bytes,arrival_ns,completion_ns,"
        "fct_ns,completed,reorder_events\n";
  for (const FlowResult& f : m.flows) {
    Nanos fct = f.completed ? f.completion_ns - f.arrival_ns : -1;
    os << f.flow_id << ',' << f.src_host << ',' << f.dst_host << ','
       << f.size_bytes << ',' << f.arrival_ns << ','
       << (f.completed ? f.completion_ns : -1) << ',' << fct << ','
       << (f.completed ? 1 : 0) << ',' << f.reorder_events << '\n';
  }
  return os.str();
}

std::string buffer_csv(const Metrics& m, std::size_t node_count) {
  std::ostringstream os;
  os << "slice,node,port,max_buffer_bytes,delivered_bits\n";
  for (const SliceSample& s : m.slices) {
    std::size_t span = node_count ? s.port_max_bytes.size() / node_count : 0;
    for (std::size_t n = 0; n < node_count; ++n)
      for (std::size_t p = 0; p < span; ++p)
        os << s.slice_abs << ',' << n << ',' << p << ','
           << s.port_max_bytes[n * span + p] << ','
           << s.port_delivered_bits[n * span + p] << '\n';
  }
  return os.str();
}

void print_summary(const std::string& name, const Json& summary,
                   std::ostream& log) {
  log << name << ": fct p50/p95/p99/p999 ns = "
      << summary["fct_ns"]["p50"].get<double>() << "/"
      << summary["fct_ns"]["p95"].get<double>() << "/"
      << summary["fct_ns"]["p99"].get<double>() << "/"
      << summary["fct_ns"]["p999"].get<double>()
      << ", throughput_bps = " << summary["throughput_bps"].get<double>()
      << ", loss_rate = " << summary["loss_rate"].get<double>()
      << ", reorder_events = " << summary["reorder_events"].get<std::uint64_t>()
      << "\n";
}

// Runs one scenario document (which may be hybrid) and writes its outputs.
Json run_one(const Json& doc, const fs::path& dir, bool trace,
             std::ostream& log) {
  fs::create_directories(dir);
  if (doc.value("workflow", "to") == std::string("hybrid")) {
    if (!doc.contains("inner") || !doc.contains("outer"))
      throw SchemaError("hybrid scenario needs \"inner\" and \"outer\"");
    Json merged;
    merged["inner"] = run_one(doc["inner"], dir / "inner", trace, log);
    merged["outer"] = run_one(doc["outer"], dir / "outer", trace, log);
    write_text(dir / "metrics.json", merged.dump(2) + "\n");
    Json resolved = doc;
    write_text(dir / "resolved.json", resolved.dump(2) + "\n");
    return merged;
  }

  Scenario sc = scenario_from_json(doc);
  std::ofstream trace_out;
  if (trace) trace_out.open(dir / "trace.log");
  RunOutput out = run_scenario(sc, trace ? &trace_out : nullptr);
  Json summary = metrics_to_json(out.metrics);
  write_text(dir / "metrics.json", summary.dump(2) + "\n");
  write_text(dir / "resolved.json", out.resolved.dump(2) + "\n");
  write_text(dir / "fct.csv", fct_csv(out.metrics));
  write_text(dir / "buffer.csv", buffer_csv(out.metrics, sc.sim.node_count));
  print_summary(sc.name, summary, log);
  return summary;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const SchemaError*>(&e)) return kSchema;
  if (dynamic_cast<const Error*>(&e)) return kInfeasible;
  return kUnexpected;
}

}  // namespace

int cmd_run(const RunOptions& opt, std::ostream& log) {
  if (opt.scenario_paths.empty()) {
    log << "no scenario files given\n";
    return kSchema;
  }
  std::mutex log_mu;
  std::vector<int> codes(opt.scenario_paths.size(), kOk);
  auto work = [&](std::size_t i) {
    const std::string& path = opt.scenario_paths[i];
    try {
      std::ifstream in(path);
      if (!in) throw SchemaError("cannot open scenario file: " + path);
      Json doc;
      try {
        in >> doc;
      } catch (const Json::exception& e) {
        throw SchemaError(std::string("scenario is not valid json: ") + e.what());
      }
      if (opt.seed_override) {
        if (!doc.contains("sim")) doc["sim"] = Json::object();
        doc["sim"]["seed"] = *opt.seed_override;
      }
      std::string name = doc.value("name", fs::path(path).stem().string());
      std::ostringstream local;
      run_one(doc, fs::path(opt.out_dir) / name, opt.trace, local);
      std::lock_guard<std::mutex> lock(log_mu);
      log << local.str();
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(log_mu);
      log << path << ": " << e.what() << "\n";
      codes[i] = classify(e);
    }
  };
  if (opt.jobs <= 1 || opt.scenario_paths.size() == 1) {
    for (std::size_t i = 0; i < opt.scenario_paths.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mu;
    for (int t = 0; t < opt.jobs; ++t)
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(next_mu);
            if (next >= opt.scenario_paths.size()) return;
            i = next++;
          }
          work(i);
        }
      });
    for (auto& th : pool) th.join();
  }
  int worst = kOk;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

int cmd_validate(const std::string& scenario_path, std::ostream& log) {
  try {
    std::ifstream in(scenario_path);
    if (!in) throw SchemaError("cannot open scenario file: " + scenario_path);
    Json doc;
    try {
      in >> doc;
    } catch (const Json::exception& e) {
      throw SchemaError(std::string("scenario is not valid json: ") + e.what());
    }
    std::vector<std::pair<std::string, Json>> parts;
    if (doc.value("workflow", "to") == std::string("hybrid")) {
      if (!doc.contains("inner") || !doc.contains("outer"))
        throw SchemaError("hybrid scenario needs \"inner\" and \"outer\"");
      parts = {{"inner", doc["inner"]}, {"outer", doc["outer"]}};
    } else {
      parts = {{"", doc}};
    }
    Json out = Json::array();
    bool any_error = false;
    for (const auto& [prefix, part] : parts) {
      Scenario sc = scenario_from_json(part);
      for (const Finding& f : validate_scenario(sc)) {
        std::string code = prefix.empty() ? f.code : prefix + ":" + f.code;
        out.push_back({{"level", f.level}, {"code", code}, {"detail", f.detail}});
        if (f.level == "error") any_error = true;
      }
    }
    log << out.dump(2) << "\n";
    return any_error ? kInfeasible : kOk;
  } catch (const std::exception& e) {
    log << "[{\"level\":\"error\",\"code\":\"Schema\",\"detail\":"
        << Json(std::string(e.what())).dump() << "}]\n";
    return classify(e);
  }
}

int cmd_oracle(const std::string& scenario_path, NodeId src, NodeId dst,
               SliceId ts, int max_hop, std::ostream& log) {
  try {
    Scenario sc = load_scenario(scenario_path);
    TrafficMatrix empty;
    OpticalSchedule schedule = build_topology(sc, empty, nullptr);
    OracleReport rep = oracle_earliest(schedule, src, dst, ts, max_hop);
    Json j;
    j["reachable"] = rep.reachable;
    j["earliest_offset"] = rep.earliest_offset;
    j["earliest_slice"] = rep.reachable ? Json(rep.earliest_slice) : Json(nullptr);
    j["path_count"] = rep.path_count;
    Json w = Json::array();
    for (const auto& seq : rep.witnesses) w.push_back(seq);
    j["witnesses"] = std::move(w);
    log << j.dump(2) << "\n";
    return rep.reachable ? kOk : kInfeasible;
  } catch (const std::exception& e) {
    log << "oracle: " << e.what() << "\n";
    return classify(e);
  }
}

int cmd_guardband(Nanos rotation_variance_ns, std::int64_t estimator_error_bytes,
                  std::int64_t bandwidth_bps, Nanos sync_error_ns,
                  Nanos headroom_ns, std::ostream& log) {
  try {
    GuardbandResult r =
        guardband_calc(rotation_variance_ns, estimator_error_bytes,
                       bandwidth_bps, sync_error_ns, headroom_ns);
    Json j;
    j["raw_ns"] = r.raw_ns;
    j["guardband_ns"] = r.guardband_ns;
    j["min_slice_ns"] = r.min_slice_ns;
    log << j.dump(2) << "\n";
    return kOk;
  } catch (const std::exception& e) {
    log << "guardband: " << e.what() << "\n";
    return classify(e);
  }
}

}  // namespace optonet::cli
