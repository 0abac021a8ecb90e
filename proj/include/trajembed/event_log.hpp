#ifndef TRAJEMBED_EVENT_LOG_HPP
#define TRAJEMBED_EVENT_LOG_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "trajembed/process.hpp"

namespace trajembed {

// One emitted event: symbol x after waiting t since the previous event.
// `mode` is optional sampler ground truth; `traj` tags multi-trajectory logs.
struct EventRecord {
  std::string x;
  double t = 0.0;
  std::string mode;
  int traj = -1;
};

struct EventLog {
  std::vector<EventRecord> records;
  std::string generator;
  std::string model_hash;
  std::uint64_t seed = 0;
  bool truncated = false;  // sampling hit a survival plateau or time cap
};

// JSON-lines serialization: an optional leading {"meta": ...} line followed
// by one record object per line. write->read->write is byte-identical.
void write_jsonl(const EventLog& log, std::ostream& os);
EventLog read_jsonl(std::istream& is);
void write_jsonl_file(const EventLog& log, const std::string& path);
EventLog read_event_file(const std::string& path);  // .jsonl or .csv by extension

// CSV serialization with a `symbol,wait[,mode]` header.
void write_csv(const EventLog& log, std::ostream& os);
EventLog read_csv(std::istream& is);

struct SampleOptions {
  std::size_t burn_in = 100;  // events discarded before recording starts
  bool record_modes = false;  // attach ground-truth pre-event modes
};

// Samples n events of the classical process. The initial mode is drawn from
// the stationary mode distribution, then `burn_in` events are discarded.
EventLog classical_sample(const ValidatedSpec& v, std::size_t n_events,
                          std::uint64_t seed, const SampleOptions& opts = {});

}  // namespace trajembed

#endif
