#include "trajembed/json_io.hpp"

#include <fstream>

#include "trajembed/errors.hpp"

namespace trajembed {

using nlohmann::json;

SpecKind spec_kind(const json& j) {
  const std::string kind = j.value("kind", "");
  if (kind == "hsmm") return SpecKind::kHsmm;
  if (kind == "hmm") return SpecKind::kHmm;
  throw ValidationError("spec: unknown kind '" + kind + "' (expected hsmm or hmm)");
}

namespace {

json dwell_to_json(const DwellDistribution& d) {
  json out;
  switch (d.kind()) {
    case DwellDistribution::Kind::kExponential:
      out["type"] = "exponential";
      out["params"] = {{"rate", d.components()[0].rate}};
      break;
    case DwellDistribution::Kind::kExpMixture: {
      json comps = json::array();
      for (const auto& c : d.components())
        comps.push_back({{"weight", c.weight}, {"rate", c.rate}});
      out["type"] = "exp_mixture";
      out["params"] = {{"components", comps}};
      break;
    }
    case DwellDistribution::Kind::kTabulated:
      out["type"] = "tabulated";
      out["params"] = {{"t_grid", d.t_grid()}, {"density", d.density_values()}};
      break;
  }
  return out;
}

DwellDistribution dwell_from_json(const json& j) {
  const std::string type = j.value("type", "");
  const json params = j.value("params", json::object());
  if (type == "exponential")
    return DwellDistribution::exponential(params.value("rate", 0.0));
  if (type == "exp_mixture") {
    std::vector<ExpComponent> comps;
    for (const auto& c : params.value("components", json::array()))
      comps.push_back({c.value("weight", 0.0), c.value("rate", 0.0)});
    return DwellDistribution::exp_mixture(std::move(comps));
  }
  if (type == "tabulated")
    return DwellDistribution::tabulated(
        params.value("t_grid", std::vector<double>{}),
        params.value("density", std::vector<double>{}));
  throw ValidationError("spec: unknown dwell type '" + type + "'");
}

template <typename SpecT, typename BranchT>
void branches_from_json(const json& j, SpecT& spec,
                        const std::vector<std::string>& nodes,
                        BranchT (*parse)(const json&)) {
  spec.branches.assign(nodes.size(), {});
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i]] = i;
  for (const auto& b : j.value("branches", json::array())) {
    const std::string from = b.value("from", "");
    auto it = idx.find(from);
    if (it == idx.end())
      throw ValidationError("spec: branch from unknown node '" + from + "'");
    spec.branches[it->second].push_back(parse(b));
  }
}

Branch parse_branch(const json& b) {
  Branch out;
  out.symbol = b.value("symbol", "");
  out.prob = b.value("prob", -1.0);
  out.to = b.value("to", "");
  if (!b.contains("dwell")) throw ValidationError("spec: hsmm branch missing dwell");
  out.dwell = dwell_from_json(b["dwell"]);
  return out;
}

DiscreteBranch parse_discrete_branch(const json& b) {
  DiscreteBranch out;
  out.symbol = b.value("symbol", "");
  out.prob = b.value("prob", -1.0);
  out.to = b.value("to", "");
  out.phase = b.value("phase", 0.0);
  return out;
}

}  // namespace

json to_json(const ProcessSpec& spec) {
  json branches = json::array();
  for (std::size_t g = 0; g < spec.modes.size(); ++g)
    for (const auto& b : spec.branches[g])
      branches.push_back({{"from", spec.modes[g]},
                          {"symbol", b.symbol},
                          {"prob", b.prob},
                          {"to", b.to},
                          {"dwell", dwell_to_json(b.dwell)}});
  return {{"kind", "hsmm"},
          {"symbols", spec.symbols},
          {"modes", spec.modes},
          {"branches", branches}};
}

json to_json(const DiscreteProcessSpec& spec) {
  json branches = json::array();
  for (std::size_t s = 0; s < spec.states.size(); ++s)
    for (const auto& b : spec.branches[s])
      branches.push_back({{"from", spec.states[s]},
                          {"symbol", b.symbol},
                          {"prob", b.prob},
                          {"to", b.to},
                          {"phase", b.phase}});
  return {{"kind", "hmm"},
          {"symbols", spec.symbols},
          {"states", spec.states},
          {"branches", branches}};
}

ProcessSpec process_spec_from_json(const json& j) {
  if (spec_kind(j) != SpecKind::kHsmm)
    throw ValidationError("spec: expected kind hsmm");
  ProcessSpec spec;
  spec.symbols = j.value("symbols", std::vector<std::string>{});
  spec.modes = j.value("modes", std::vector<std::string>{});
  branches_from_json(j, spec, spec.modes, parse_branch);
  return spec;
}

DiscreteProcessSpec discrete_spec_from_json(const json& j) {
  if (spec_kind(j) != SpecKind::kHmm) throw ValidationError("spec: expected kind hmm");
  DiscreteProcessSpec spec;
  spec.symbols = j.value("symbols", std::vector<std::string>{});
  spec.states = j.value("states", std::vector<std::string>{});
  branches_from_json(j, spec, spec.states, parse_discrete_branch);
  return spec;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k)
      row.push_back({{"re", m(i, k).real()}, {"im", m(i, k).imag()}});
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError("matrix: expected array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw DimensionMismatchError("matrix: ragged rows");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = Complex(j[i][k].value("re", 0.0), j[i][k].value("im", 0.0));
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back({{"re", v(i).real()}, {"im", v(i).imag()}});
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = Complex(j[i].value("re", 0.0), j[i].value("im", 0.0));
  return v;
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

void write_json_file(const json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path);
  os << canonical_dump(j);
}

json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open: " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string model_hash(const json& j) {
  const std::string s = canonical_dump(j);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace trajembed
