#include "trajembed/event_log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trajembed/errors.hpp"

namespace trajembed {

using nlohmann::json;

void write_jsonl(const EventLog& log, std::ostream& os) {
  json meta;
  if (!log.generator.empty()) meta["generator"] = log.generator;
  if (!log.model_hash.empty()) meta["model_hash"] = log.model_hash;
  meta["seed"] = log.seed;
  if (log.truncated) meta["truncated"] = true;
  os << json{{"meta", meta}}.dump() << "\n";
  for (const auto& r : log.records) {
    json line{{"t", r.t}, {"x", r.x}};
    if (!r.mode.empty()) line["mode"] = r.mode;
    if (r.traj >= 0) line["traj"] = r.traj;
    os << line.dump() << "\n";
  }
}

EventLog read_jsonl(std::istream& is) {
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("event log line " + std::to_string(lineno) + ": " +
                            e.what());
    }
    if (j.contains("meta")) {
      const json& m = j["meta"];
      log.generator = m.value("generator", "");
      log.model_hash = m.value("model_hash", "");
      log.seed = m.value("seed", std::uint64_t{0});
      log.truncated = m.value("truncated", false);
      continue;
    }
    if (!j.contains("x") || !j.contains("t"))
      throw ValidationError("event log line " + std::to_string(lineno) +
                            ": record needs fields x and t");
    EventRecord r;
    r.x = j["x"].get<std::string>();
    r.t = j["t"].get<double>();
    if (r.t < 0.0)
      throw NegativeTimeError("event log line " + std::to_string(lineno) +
                              ": negative wait");
    r.mode = j.value("mode", "");
    r.traj = j.value("traj", -1);
    log.records.push_back(std::move(r));
  }
  return log;
}

void write_csv(const EventLog& log, std::ostream& os) {
  bool with_modes = false;
  for (const auto& r : log.records)
    if (!r.mode.empty()) with_modes = true;
  os << (with_modes ? "symbol,wait,mode\n" : "symbol,wait\n");
  char buf[64];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.t);
    os << r.x << "," << buf;
    if (with_modes) os << "," << r.mode;
    os << "\n";
  }
}

EventLog read_csv(std::istream& is) {
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;  // first non-empty line is the header
      continue;
    }
    std::istringstream cells(line);
    EventRecord r;
    std::string wait;
    if (!std::getline(cells, r.x, ',') || !std::getline(cells, wait, ','))
      throw ValidationError("event csv line " + std::to_string(lineno) +
                            ": expected symbol,wait");
    std::getline(cells, r.mode, ',');
    try {
      r.t = std::stod(wait);
    } catch (const std::exception&) {
      throw ValidationError("event csv line " + std::to_string(lineno) +
                            ": bad wait value '" + wait + "'");
    }
    if (r.t < 0.0)
      throw NegativeTimeError("event csv line " + std::to_string(lineno) +
                              ": negative wait");
    log.records.push_back(std::move(r));
  }
  return log;
}

void write_jsonl_file(const EventLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path);
  write_jsonl(log, os);
}

EventLog read_event_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open: " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_csv(is);
  return read_jsonl(is);
}

EventLog classical_sample(const ValidatedSpec& v, std::size_t n_events,
                          std::uint64_t seed, const SampleOptions& opts) {
  EventLog log;
  log.generator = "classical_sample";
  log.seed = seed;
  log.records.reserve(n_events);

  RngStream rng = RngStream::child(seed, 0);
  const RealVector pi = stationary_mode_dist(v);
  std::vector<double> pi_w(pi.data(), pi.data() + pi.size());
  int mode = static_cast<int>(rng.categorical(pi_w));

  for (std::size_t i = 0; i < opts.burn_in + n_events; ++i) {
    const auto& branches = v.branches(mode);
    std::vector<double> w(branches.size());
    for (std::size_t k = 0; k < branches.size(); ++k) w[k] = branches[k].prob;
    const auto& b = branches[rng.categorical(w)];
    const double wait = b.dwell.sample(rng);
    if (i >= opts.burn_in) {
      EventRecord r;
      r.x = b.symbol;
      r.t = wait;
      if (opts.record_modes) r.mode = v.spec().modes[mode];
      log.records.push_back(std::move(r));
    }
    mode = v.mode_index(b.to);
  }
  return log;
}

}  // namespace trajembed
