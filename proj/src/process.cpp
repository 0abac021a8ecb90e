#include "trajembed/process.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "trajembed/errors.hpp"

namespace trajembed {
namespace {

// Strong connectivity of the mode graph: forward BFS from node 0 plus BFS on
// the reversed graph must each reach every node.
bool strongly_connected(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  if (n == 0) return false;
  std::vector<std::vector<int>> radj(n);
  for (int u = 0; u < n; ++u)
    for (int w : adj[u]) radj[w].push_back(u);
  auto reaches_all = [n](const std::vector<std::vector<int>>& g) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int w : g[u])
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    return std::count(seen.begin(), seen.end(), 1) == n;
  };
  return reaches_all(adj) && reaches_all(radj);
}

template <typename BranchT>
void check_common(const std::vector<std::string>& symbols,
                  const std::vector<std::string>& nodes,
                  const std::vector<std::vector<BranchT>>& branches,
                  const char* node_word, std::vector<std::string>& out) {
  if (symbols.empty()) out.push_back("NonStochastic: empty symbol alphabet");
  if (nodes.empty()) out.push_back(std::string("NonStochastic: no ") + node_word + "s");
  if (std::set<std::string>(symbols.begin(), symbols.end()).size() != symbols.size())
    out.push_back("NonStochastic: duplicate symbol names");
  if (std::set<std::string>(nodes.begin(), nodes.end()).size() != nodes.size())
    out.push_back(std::string("NonStochastic: duplicate ") + node_word + " names");
  if (branches.size() != nodes.size()) {
    out.push_back("NonStochastic: branch table does not align with " +
                  std::string(node_word) + " list");
    return;
  }
  const std::set<std::string> sym_set(symbols.begin(), symbols.end());
  const std::set<std::string> node_set(nodes.begin(), nodes.end());
  for (std::size_t g = 0; g < nodes.size(); ++g) {
    double total = 0.0;
    std::set<std::string> seen;
    for (const auto& b : branches[g]) {
      const std::string where = nodes[g] + "/" + b.symbol;
      if (!sym_set.count(b.symbol))
        out.push_back("NoSuchBranch: unknown symbol in branch " + where);
      if (!node_set.count(b.to))
        out.push_back("NoSuchBranch: unknown successor in branch " + where);
      if (!seen.insert(b.symbol).second)
        out.push_back("DuplicateSymbolBranch: repeated symbol in " + where);
      if (!(b.prob >= 0.0 && b.prob <= 1.0) || !std::isfinite(b.prob))
        out.push_back("NonStochastic: probability outside [0,1] in " + where);
      total += b.prob;
    }
    if (branches[g].empty())
      out.push_back(std::string("NonStochastic: ") + node_word + " " + nodes[g] +
                    " has no branches");
    else if (std::abs(total - 1.0) > 1e-9)
      out.push_back(std::string("NonStochastic: ") + node_word + " " + nodes[g] +
                    " branch probabilities sum to " + std::to_string(total));
  }
}

template <typename BranchT>
std::vector<std::vector<int>> successor_graph(
    const std::vector<std::string>& nodes,
    const std::vector<std::vector<BranchT>>& branches) {
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i]] = static_cast<int>(i);
  std::vector<std::vector<int>> adj(nodes.size());
  for (std::size_t g = 0; g < branches.size() && g < nodes.size(); ++g)
    for (const auto& b : branches[g])
      if (b.prob > 0.0 && idx.count(b.to)) adj[g].push_back(idx[b.to]);
  return adj;
}

}  // namespace

std::vector<std::string> check_spec(const ProcessSpec& spec) {
  std::vector<std::string> out;
  check_common(spec.symbols, spec.modes, spec.branches, "mode", out);
  if (!out.empty()) return out;
  for (std::size_t g = 0; g < spec.modes.size(); ++g)
    for (const auto& b : spec.branches[g])
      b.dwell.check(out, spec.modes[g] + "/" + b.symbol);
  if (!strongly_connected(successor_graph(spec.modes, spec.branches)))
    out.push_back("UnreachableMode: mode graph is not strongly connected");
  return out;
}

std::vector<std::string> check_spec(const DiscreteProcessSpec& spec) {
  std::vector<std::string> out;
  check_common(spec.symbols, spec.states, spec.branches, "state", out);
  if (!out.empty()) return out;
  for (std::size_t s = 0; s < spec.states.size(); ++s)
    for (const auto& b : spec.branches[s])
      if (!std::isfinite(b.phase))
        out.push_back("NonStochastic: non-finite phase in " + spec.states[s] + "/" +
                      b.symbol);
  if (!strongly_connected(successor_graph(spec.states, spec.branches)))
    out.push_back("UnreachableMode: state graph is not strongly connected");
  return out;
}

namespace {
[[noreturn]] void throw_violations(const std::vector<std::string>& violations) {
  std::ostringstream os;
  os << "spec validation failed:";
  for (const auto& v : violations) os << "\n  " << v;
  const std::string msg = os.str();
  if (msg.find("UnreachableMode") != std::string::npos)
    throw UnreachableModeError(msg);
  if (msg.find("DuplicateSymbolBranch") != std::string::npos)
    throw DuplicateSymbolBranchError(msg);
  if (msg.find("NoSuchBranch") != std::string::npos) throw NoSuchBranchError(msg);
  if (msg.find("NonPositiveRate") != std::string::npos)
    throw NonPositiveRateError(msg);
  if (msg.find("BadDensity") != std::string::npos) throw BadDensityError(msg);
  if (msg.find("NegativeTime") != std::string::npos) throw NegativeTimeError(msg);
  throw NonStochasticError(msg);
}
}  // namespace

ValidatedSpec::ValidatedSpec(ProcessSpec spec) : spec_(std::move(spec)) {
  const auto violations = check_spec(spec_);
  if (!violations.empty()) throw_violations(violations);
  for (std::size_t i = 0; i < spec_.modes.size(); ++i)
    mode_idx_[spec_.modes[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < spec_.symbols.size(); ++i)
    symbol_idx_[spec_.symbols[i]] = static_cast<int>(i);
}

int ValidatedSpec::mode_index(const std::string& name) const {
  auto it = mode_idx_.find(name);
  if (it == mode_idx_.end()) throw NoSuchBranchError("unknown mode: " + name);
  return it->second;
}

int ValidatedSpec::symbol_index(const std::string& name) const {
  auto it = symbol_idx_.find(name);
  if (it == symbol_idx_.end()) throw NoSuchBranchError("unknown symbol: " + name);
  return it->second;
}

const Branch* ValidatedSpec::branch(int mode, const std::string& symbol) const {
  for (const auto& b : spec_.branches[mode])
    if (b.symbol == symbol) return &b;
  return nullptr;
}

int ValidatedSpec::successor(int mode, const std::string& symbol) const {
  const Branch* b = branch(mode, symbol);
  return b ? mode_index(b->to) : -1;
}

ValidatedDiscreteSpec::ValidatedDiscreteSpec(DiscreteProcessSpec spec)
    : spec_(std::move(spec)) {
  const auto violations = check_spec(spec_);
  if (!violations.empty()) throw_violations(violations);
  for (std::size_t i = 0; i < spec_.states.size(); ++i)
    state_idx_[spec_.states[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < spec_.symbols.size(); ++i)
    symbol_idx_[spec_.symbols[i]] = static_cast<int>(i);
}

int ValidatedDiscreteSpec::state_index(const std::string& name) const {
  auto it = state_idx_.find(name);
  if (it == state_idx_.end()) throw NoSuchBranchError("unknown state: " + name);
  return it->second;
}

int ValidatedDiscreteSpec::symbol_index(const std::string& name) const {
  auto it = symbol_idx_.find(name);
  if (it == symbol_idx_.end()) throw NoSuchBranchError("unknown symbol: " + name);
  return it->second;
}

const DiscreteBranch* ValidatedDiscreteSpec::branch(int state,
                                                    const std::string& symbol) const {
  for (const auto& b : spec_.branches[state])
    if (b.symbol == symbol) return &b;
  return nullptr;
}

double survival(const ValidatedSpec& v, int mode, double t) {
  if (t < 0.0) throw NegativeTimeError("survival: negative time");
  double s = 0.0;
  for (const auto& b : v.branches(mode)) s += b.prob * b.dwell.tail(t);
  return s;
}

double dwell_density(const ValidatedSpec& v, int mode, const std::string& symbol,
                     double t) {
  if (t < 0.0) throw NegativeTimeError("dwell_density: negative time");
  const Branch* b = v.branch(mode, symbol);
  if (!b)
    throw NoSuchBranchError("dwell_density: no branch " + v.spec().modes[mode] + "/" +
                            symbol);
  return b->prob * b->dwell.density(t);
}

double survival_horizon(const ValidatedSpec& v, double eps) {
  double horizon = 0.0;
  for (int g = 0; g < v.n_modes(); ++g) {
    double lo = 0.0, hi = 1.0;
    while (survival(v, g, hi) > eps && hi < 1e18) {
      lo = hi;
      hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-9 * std::max(hi, 1.0); ++i) {
      const double mid = 0.5 * (lo + hi);
      (survival(v, g, mid) > eps ? lo : hi) = mid;
    }
    horizon = std::max(horizon, hi);
  }
  return horizon;
}

namespace {

// Left stationary vector of a row-stochastic matrix P (rows: from-state).
RealVector stationary_of(const RealMatrix& p) {
  const int n = static_cast<int>(p.rows());
  RealMatrix a = p.transpose() - RealMatrix::Identity(n, n);
  Eigen::FullPivLU<RealMatrix> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < n - 1)
    throw NoUniqueStationaryError("stationary distribution is not unique");
  // Append the normalization row and solve the stacked system.
  RealMatrix sys(n + 1, n);
  sys.topRows(n) = a;
  sys.bottomRows(1).setOnes();
  RealVector rhs = RealVector::Zero(n + 1);
  rhs(n) = 1.0;
  RealVector pi = sys.colPivHouseholderQr().solve(rhs);
  if ((sys * pi - rhs).cwiseAbs().maxCoeff() > 1e-8)
    throw NoUniqueStationaryError("stationary solve residual too large");
  for (int i = 0; i < n; ++i) pi(i) = std::max(pi(i), 0.0);
  return pi / pi.sum();
}

}  // namespace

RealVector stationary_mode_dist(const ValidatedSpec& v) {
  const int n = v.n_modes();
  RealMatrix p = RealMatrix::Zero(n, n);
  for (int g = 0; g < n; ++g)
    for (const auto& b : v.branches(g)) p(g, v.mode_index(b.to)) += b.prob;
  return stationary_of(p);
}

RealVector stationary_state_dist(const ValidatedDiscreteSpec& v) {
  const int n = v.n_states();
  RealMatrix p = RealMatrix::Zero(n, n);
  for (int s = 0; s < n; ++s)
    for (const auto& b : v.branches(s)) p(s, v.state_index(b.to)) += b.prob;
  return stationary_of(p);
}

double mean_event_interval(const ValidatedSpec& v) {
  const RealVector pi = stationary_mode_dist(v);
  double mean = 0.0;
  for (int g = 0; g < v.n_modes(); ++g)
    for (const auto& b : v.branches(g)) mean += pi(g) * b.prob * b.dwell.mean();
  return mean;
}

MemoryMeasures classical_measures(const ValidatedSpec& v) {
  // The stationary classical memory lives on the continuum (mode, age), so
  // both the state count and the entropy diverge; report the finite pieces.
  MemoryMeasures m;
  m.flavor = MeasureFlavor::kClassical;
  m.divergent = true;
  const RealVector pi = stationary_mode_dist(v);
  for (int g = 0; g < v.n_modes(); ++g)
    m.diagnostics["pi[" + v.spec().modes[g] + "]"] = pi(g);
  m.diagnostics["mean_event_interval"] = mean_event_interval(v);
  return m;
}

MemoryMeasures classical_measures(const ValidatedDiscreteSpec& v) {
  MemoryMeasures m;
  m.flavor = MeasureFlavor::kClassical;
  const RealVector pi = stationary_state_dist(v);
  double entropy = 0.0;
  for (int i = 0; i < pi.size(); ++i)
    if (pi(i) > 0.0) entropy -= pi(i) * std::log2(pi(i));
  m.dimension_bits = std::log2(static_cast<double>(v.n_states()));
  m.entropy_bits = entropy;
  return m;
}

}  // namespace trajembed
